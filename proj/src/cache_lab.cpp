#include "wcd/cache_lab.h"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <sstream>

namespace wcd::lab {

namespace {

constexpr std::string_view kNotFoundBody = "<html><body><h1>404 Not Found</h1><p>The requested page does not exist.</p></body></html>";
constexpr std::string_view kForbiddenBody = "<html><body><h1>403 Forbidden</h1></body></html>";

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string random_alnum(std::mt19937_64& rng, std::size_t length) {
    static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string out(length, ' ');
    for (auto& c : out) c = alphabet[pick(rng)];
    return out;
}

std::string random_hex(std::mt19937_64& rng, std::size_t length) {
    static constexpr std::string_view alphabet = "0123456789abcdef";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string out(length, ' ');
    for (auto& c : out) c = alphabet[pick(rng)];
    return out;
}

std::map<std::string, std::string> parse_form(std::string_view body) {
    std::map<std::string, std::string> out;
    for (const auto& p : parse_url("http://x/?" + std::string(body)).query_params) out[p.name] = p.value;
    return out;
}

std::optional<std::string> cookie_value(const Headers& headers, std::string_view name) {
    for (const auto& [k, v] : headers) {
        if (to_lower(k) != "cookie") continue;
        std::size_t pos = 0;
        while (pos < v.size()) {
            auto semi = v.find(';', pos);
            if (semi == std::string::npos) semi = v.size();
            auto part = std::string_view(v).substr(pos, semi - pos);
            while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
            auto eq = part.find('=');
            if (eq != std::string_view::npos && part.substr(0, eq) == name) return std::string(part.substr(eq + 1));
            pos = semi + 1;
        }
    }
    return std::nullopt;
}

Headers with_defaults(Headers headers, long long now) {
    if (!find_header(headers, "Content-Type")) headers.emplace_back("Content-Type", "text/html; charset=utf-8");
    headers.emplace_back("Date", http_date(now));
    return headers;
}

std::vector<Marker> make_markers(std::mt19937_64& rng, std::string_view who) {
    return {
        {"email", std::string(who) + "." + random_alnum(rng, 12) + "@mail.example"},
        {"fullname", "N" + random_alnum(rng, 15)},
    };
}

} // namespace

std::string_view variant_name(OriginVariant v) {
    switch (v) {
    case OriginVariant::PathParameterFallback: return "PathParameterFallback";
    case OriginVariant::TruncateAtNewline: return "TruncateAtNewline";
    case OriginVariant::SemicolonParams: return "SemicolonParams";
    case OriginVariant::TruncateAtFragment: return "TruncateAtFragment";
    case OriginVariant::TruncateAtQuestion: return "TruncateAtQuestion";
    }
    return "?";
}

std::optional<OriginVariant> variant_from_name(std::string_view name) {
    for (auto v : kAllOriginVariants) {
        if (to_lower(variant_name(v)) == to_lower(name)) return v;
    }
    return std::nullopt;
}

std::string OriginSemantics::describe() const {
    if (variants.empty()) return "Exact";
    std::string out;
    for (auto v : variants) {
        if (!out.empty()) out += "+";
        out += variant_name(v);
    }
    return out;
}

std::string origin_route_path(const OriginSemantics& origin, std::string_view raw_path) {
    std::string path = origin.decode_before_route ? percent_decode(raw_path) : std::string(raw_path);
    std::string delimiters;
    if (origin.has(OriginVariant::TruncateAtNewline)) delimiters += '\n';
    if (origin.has(OriginVariant::SemicolonParams)) delimiters += ';';
    if (origin.has(OriginVariant::TruncateAtFragment)) delimiters += '#';
    if (origin.has(OriginVariant::TruncateAtQuestion)) delimiters += '?';
    if (!delimiters.empty()) {
        auto cut = path.find_first_of(delimiters);
        if (cut != std::string::npos) path.erase(cut);
    }
    if (path.empty()) path = "/";
    return path;
}

void SimSite::validate() const {
    if (name.empty()) throw ConfigError("site without a name");
    if (host.empty()) throw ConfigError("site " + name + " has no host");
    if (accounts.size() < 2) throw ConfigError("site " + name + " needs victim and attacker accounts");
    for (const auto& [path, r] : resources) {
        if (path.empty() || path.front() != '/') throw ConfigError("resource path must start with '/': " + path);
    }
    std::set<std::string> users;
    for (const auto& a : accounts) {
        if (!users.insert(a.username).second) throw ConfigError("duplicate account " + a.username + " in " + name);
        MarkerSet{a.markers}.validate();
    }
}

std::vector<std::string> SimSite::marker_bearing_paths() const {
    std::vector<std::string> out;
    for (const auto& [path, r] : resources) {
        if (r.protected_ && r.body.find("{{marker:") != std::string::npos) out.push_back(path);
    }
    return out;
}

SimClock advance_clock(SimClock clock, long long seconds) {
    if (seconds < 0) throw std::invalid_argument("cannot move the clock backwards");
    clock.now += seconds;
    return clock;
}

std::string http_date(long long epoch_seconds) {
    static constexpr const char* days[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
    static constexpr const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                             "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s, %02d %s %04d %02d:%02d:%02d GMT", days[tm.tm_wday], tm.tm_mday,
                  months[tm.tm_mon], tm.tm_year + 1900, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string render_template(std::string_view tmpl, const LabAccount* account, const Session* session, long long now,
                            std::string_view request_path) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        auto close = tmpl.find("}}", open);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        auto slot = tmpl.substr(open + 2, close - open - 2);
        if (slot == "user") {
            if (account) out += account->username;
        } else if (slot.starts_with("marker:")) {
            if (account) {
                auto label = slot.substr(7);
                for (const auto& m : account->markers) {
                    if (m.label == label) out += m.value;
                }
            }
        } else if (slot == "csrf") {
            if (session) out += session->csrf;
        } else if (slot == "bundle") {
            if (session) out += session->bundle;
        } else if (slot == "date") {
            out += http_date(now);
        } else if (slot == "path") {
            out += request_path;
        } else {
            out.append(tmpl.substr(open, close + 2 - open));
        }
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

OriginResponse origin_resolve(const SimSite& site, std::string_view raw_path, const Session* session, long long now) {
    OriginResponse out;
    auto path = origin_route_path(site.origin, raw_path);
    auto it = site.resources.find(path);
    if (it == site.resources.end() && site.origin.has(OriginVariant::PathParameterFallback)) {
        // Longest known resource that is a proper directory prefix of the path.
        for (const auto& [candidate, r] : site.resources) {
            if (candidate == "/" || !path.starts_with(candidate) || path.size() <= candidate.size() ||
                path[candidate.size()] != '/') {
                continue;
            }
            if (it == site.resources.end() || candidate.size() > it->first.size()) it = site.resources.find(candidate);
        }
    }
    if (it == site.resources.end()) {
        out.status = 404;
        out.body = std::string(kNotFoundBody);
        out.headers = with_defaults({}, now);
        return out;
    }
    const auto& [resource_path, resource] = *it;
    out.resource_path = resource_path;
    if (resource.protected_ && !session) {
        if (site.deny == DenyMode::Forbidden) {
            out.status = 403;
            out.body = std::string(kForbiddenBody);
            out.headers = with_defaults({}, now);
        } else {
            out.status = 302;
            out.headers = with_defaults({{"Location", site.login_path}}, now);
        }
        return out;
    }
    const LabAccount* account = nullptr;
    if (session) {
        for (const auto& a : site.accounts) {
            if (a.username == session->username) account = &a;
        }
    }
    out.status = resource.status;
    out.body = render_template(resource.body, account, session, now, raw_path);
    out.headers = with_defaults(resource.headers, now);
    return out;
}

std::string_view cache_event_name(CacheEvent e) {
    switch (e) {
    case CacheEvent::Hit: return "Hit";
    case CacheEvent::MissStored: return "MissStored";
    case CacheEvent::MissNotStored: return "MissNotStored";
    case CacheEvent::Expired: return "Expired";
    }
    return "?";
}

ProxyView proxy_view(std::string_view target, bool proxy_decodes_percent) {
    auto qpos = target.find('?');
    auto raw_path = target.substr(0, qpos);
    if (!proxy_decodes_percent) return {std::string(target), std::string(raw_path)};
    auto rule_path = percent_decode(raw_path);
    auto cut = rule_path.find_first_of("?#\n;");
    if (cut != std::string::npos) rule_path.erase(cut);
    return {percent_decode(target), rule_path};
}

SiteRuntime::SiteRuntime(SimSite site) : site_(std::move(site)), rng_(site_.seed) {}

void SiteRuntime::advance(long long seconds) { clock_ = advance_clock(clock_, seconds); }

std::size_t SiteRuntime::cache_size() const {
    std::size_t n = 0;
    for (const auto& [region, entries] : cache_) n += entries.size();
    return n;
}

std::string SiteRuntime::random_token(std::size_t length) { return random_hex(rng_, length); }

std::string SiteRuntime::create_session(const std::string& username) {
    Session s;
    s.id = random_token(32);
    s.username = username;
    s.csrf = random_token(32);
    s.bundle = random_token(16);
    s.expires_at = clock_.now + site_.session_ttl;
    auto id = s.id;
    sessions_[id] = std::move(s);
    return id;
}

const Session* SiteRuntime::session_for(const Headers& headers) {
    auto sid = cookie_value(headers, site_.session_cookie);
    if (!sid) return nullptr;
    auto it = sessions_.find(*sid);
    if (it == sessions_.end()) return nullptr;
    if (it->second.expires_at <= clock_.now) {
        sessions_.erase(it);
        return nullptr;
    }
    return &it->second;
}

OriginResponse SiteRuntime::origin_handle(const LabRequest& request) {
    ++origin_requests_;
    auto raw_path = std::string_view(request.target).substr(0, request.target.find('?'));
    const auto now = clock_.now;

    if (request.method == "POST" && raw_path == site_.login_path) {
        auto form = parse_form(request.body);
        for (const auto& a : site_.accounts) {
            if (a.username == form["username"] && a.password == form["password"]) {
                auto sid = create_session(a.username);
                OriginResponse out;
                out.status = 302;
                out.resource_path = site_.login_path;
                out.headers = with_defaults(
                    {{"Location", "/"},
                     {"Set-Cookie", site_.session_cookie + "=" + sid + "; Max-Age=" + std::to_string(site_.session_ttl) +
                                        "; Path=/; HttpOnly"},
                     {"Cache-Control", "no-store"}},
                    now);
                return out;
            }
        }
        OriginResponse out;
        out.status = 401;
        out.resource_path = site_.login_path;
        out.body = "<html><body><p>Invalid credentials</p></body></html>";
        out.headers = with_defaults({{"Cache-Control", "no-store"}}, now);
        return out;
    }
    if (raw_path == site_.logout_path) {
        if (auto sid = cookie_value(request.headers, site_.session_cookie)) sessions_.erase(*sid);
        OriginResponse out;
        out.status = 302;
        out.resource_path = site_.logout_path;
        out.headers = with_defaults({{"Location", "/"}, {"Set-Cookie", site_.session_cookie + "=; Max-Age=0; Path=/"}}, now);
        return out;
    }
    return origin_resolve(site_, raw_path, session_for(request.headers), now);
}

void SiteRuntime::decorate(LabResponse& response, CacheEvent event, long long age) const {
    const bool hit = event == CacheEvent::Hit;
    response.headers.emplace_back("X-Cache", hit ? "HIT" : "MISS");
    if (hit) response.headers.emplace_back("Age", std::to_string(age));
    const auto& profile = site_.cache_profile.name;
    if (profile.starts_with("akamai")) {
        response.headers.emplace_back("Server", "AkamaiGHost");
    } else if (profile.starts_with("cloudflare")) {
        response.headers.emplace_back("Server", "cloudflare");
        response.headers.emplace_back("CF-Cache-Status", hit ? "HIT" : "MISS");
        response.headers.emplace_back("CF-RAY", "7f00000000000000-LAB");
    } else if (profile.starts_with("cloudfront")) {
        response.headers.emplace_back("Via", "1.1 lab.cloudfront.net (CloudFront)");
        response.headers.emplace_back("X-Amz-Cf-Pop", "LAB1-C1");
    } else if (profile.starts_with("fastly")) {
        response.headers.emplace_back("X-Served-By", "cache-lab1");
        response.headers.emplace_back("X-Fastly-Request-ID", "lab");
    }
}

LabResponse SiteRuntime::proxy_handle(const LabRequest& request) {
    const auto now = clock_.now;
    LabResponse response;
    const bool cacheable_method = request.method == "GET" || request.method == "HEAD";
    if (!cacheable_method) {
        auto origin = origin_handle(request);
        response.status = origin.status;
        response.headers = std::move(origin.headers);
        response.body = std::move(origin.body);
        response.event = CacheEvent::MissNotStored;
        decorate(response, response.event, 0);
        return response;
    }

    auto view = proxy_view(request.target, site_.proxy_decodes_percent);
    auto& region = cache_[request.region];
    bool expired = false;
    if (auto it = region.find(view.key); it != region.end()) {
        if (it->second.fresh(now)) {
            response.status = it->second.status;
            response.headers = it->second.headers;
            response.body = it->second.body;
            response.event = CacheEvent::Hit;
            decorate(response, response.event, now - it->second.stored_at);
            return response;
        }
        region.erase(it);
        expired = true;
    }
    if (!expired && site_.tiered_retry) {
        for (auto& [name, entries] : cache_) {
            if (name == request.region) continue;
            auto it = entries.find(view.key);
            if (it == entries.end() || !it->second.fresh(now)) continue;
            region[view.key] = it->second;
            response.status = it->second.status;
            response.headers = it->second.headers;
            response.body = it->second.body;
            response.event = CacheEvent::Hit;
            decorate(response, response.event, now - it->second.stored_at);
            return response;
        }
    }

    auto origin = origin_handle(request);
    auto headers = collect_cache_headers(origin.headers);
    auto decision = decide(site_.cache_profile, view.rule_path, origin.status,
                           headers.cache_control.value_or(CacheControlDirectives{}));
    const long long ttl = decision.store ? site_.ttl_override.value_or(decision.ttl) : 0;
    const bool store = decision.store && ttl > 0;
    if (store) region[view.key] = CacheEntry{view.key, origin.body, origin.status, origin.headers, now, ttl};

    response.status = origin.status;
    response.headers = std::move(origin.headers);
    response.body = std::move(origin.body);
    response.event = expired ? CacheEvent::Expired : store ? CacheEvent::MissStored : CacheEvent::MissNotStored;
    decorate(response, response.event, 0);
    return response;
}

bool oracle_vulnerable(const SimSite& site, Technique technique, long long delay_seconds) {
    if (site.accounts.size() < 2) return false;
    const auto& victim = site.accounts[0];
    const auto& attacker = site.accounts[1];
    for (const auto& path : site.marker_bearing_paths()) {
        SiteRuntime runtime(site);
        auto victim_sid = runtime.create_session(victim.username);
        auto attacker_sid = runtime.create_session(attacker.username);
        auto attack = make_attack_url(parse_url("http://" + site.host + path), technique, "oracle0000000000");
        auto target = parse_url(attack.rendered).target();

        runtime.proxy_handle({"GET", target, {{"Cookie", site.session_cookie + "=" + victim_sid}}, "", "default"});
        if (delay_seconds > 0) runtime.advance(delay_seconds);
        auto seen = runtime.proxy_handle({"GET", target, {{"Cookie", site.session_cookie + "=" + attacker_sid}}, "", "default"});
        for (const auto& m : victim.markers) {
            if (seen.body.find(m.value) != std::string::npos) return true;
        }
    }
    return false;
}

namespace {

Resource resource_from_json(const nlohmann::json& j) {
    Resource r;
    r.status = j.value("status", 200);
    r.body = j.value("body", "");
    r.protected_ = j.value("protected", false);
    if (j.contains("headers")) {
        for (const auto& [k, v] : j.at("headers").items()) r.headers.emplace_back(k, v.get<std::string>());
    }
    return r;
}

SimSite site_from_json(const nlohmann::json& j) {
    SimSite s;
    s.name = j.at("name").get<std::string>();
    s.host = to_lower(j.at("host").get<std::string>());
    if (j.contains("origin")) {
        const auto& o = j.at("origin");
        for (const auto& v : o.value("variants", nlohmann::json::array())) {
            auto parsed = variant_from_name(v.get<std::string>());
            if (!parsed) throw ConfigError("unknown origin variant: " + v.get<std::string>());
            s.origin.variants.insert(*parsed);
        }
        s.origin.decode_before_route = o.value("decode_before_route", true);
    }
    s.cache_profile = profile_from_json(j.at("cache_profile"));
    s.proxy_decodes_percent = j.value("proxy_decodes_percent", false);
    s.tiered_retry = j.value("tiered_retry", false);
    if (j.contains("ttl_override")) s.ttl_override = j.at("ttl_override").get<long long>();
    auto deny = j.value("deny", std::string("login_redirect"));
    if (deny == "forbidden") s.deny = DenyMode::Forbidden;
    else if (deny == "login_redirect") s.deny = DenyMode::LoginRedirect;
    else throw ConfigError("unknown deny mode: " + deny);
    s.login_path = j.value("login_path", s.login_path);
    s.logout_path = j.value("logout_path", s.logout_path);
    s.session_cookie = j.value("session_cookie", s.session_cookie);
    s.session_ttl = j.value("session_ttl", s.session_ttl);
    s.seed = j.value("seed", s.seed);
    for (const auto& a : j.at("accounts")) {
        LabAccount acct{a.at("username").get<std::string>(), a.at("password").get<std::string>(), {}};
        for (const auto& m : a.value("markers", nlohmann::json::array()))
            acct.markers.push_back({m.at("label").get<std::string>(), m.at("value").get<std::string>()});
        s.accounts.push_back(std::move(acct));
    }
    for (const auto& [path, r] : j.at("resources").items()) s.resources[path] = resource_from_json(r);
    s.validate();
    return s;
}

} // namespace

std::vector<SimSite> load_scenario(std::string_view json_text) {
    try {
        auto doc = nlohmann::json::parse(json_text);
        std::vector<SimSite> sites;
        std::set<std::string> hosts;
        for (const auto& s : doc.at("sites")) {
            sites.push_back(site_from_json(s));
            if (!hosts.insert(sites.back().host).second) throw ConfigError("duplicate host " + sites.back().host);
        }
        return sites;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
}

std::vector<SimSite> load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

nlohmann::json scenario_to_json(const std::vector<SimSite>& sites) {
    auto arr = nlohmann::json::array();
    for (const auto& s : sites) {
        nlohmann::json j;
        j["name"] = s.name;
        j["host"] = s.host;
        auto variants = nlohmann::json::array();
        for (auto v : s.origin.variants) variants.push_back(variant_name(v));
        j["origin"] = {{"variants", variants}, {"decode_before_route", s.origin.decode_before_route}};
        j["cache_profile"] = profile_to_json(s.cache_profile);
        j["proxy_decodes_percent"] = s.proxy_decodes_percent;
        j["tiered_retry"] = s.tiered_retry;
        if (s.ttl_override) j["ttl_override"] = *s.ttl_override;
        j["deny"] = s.deny == DenyMode::Forbidden ? "forbidden" : "login_redirect";
        j["login_path"] = s.login_path;
        j["logout_path"] = s.logout_path;
        j["session_cookie"] = s.session_cookie;
        j["session_ttl"] = s.session_ttl;
        j["seed"] = s.seed;
        auto accounts = nlohmann::json::array();
        for (const auto& a : s.accounts) {
            auto markers = nlohmann::json::array();
            for (const auto& m : a.markers) markers.push_back({{"label", m.label}, {"value", m.value}});
            accounts.push_back({{"username", a.username}, {"password", a.password}, {"markers", markers}});
        }
        j["accounts"] = accounts;
        nlohmann::json resources = nlohmann::json::object();
        for (const auto& [path, r] : s.resources) {
            nlohmann::json rj{{"status", r.status}, {"body", r.body}, {"protected", r.protected_}};
            nlohmann::json headers = nlohmann::json::object();
            for (const auto& [k, v] : r.headers) headers[k] = v;
            if (!headers.empty()) rj["headers"] = headers;
            resources[path] = rj;
        }
        j["resources"] = resources;
        arr.push_back(j);
    }
    return {{"sites", arr}};
}

SimSite make_account_site(const SiteOptions& options) {
    SimSite s;
    s.name = options.name;
    s.host = options.host;
    s.origin = options.origin;
    s.cache_profile = options.profile;
    s.proxy_decodes_percent = options.proxy_decodes_percent;
    s.tiered_retry = options.tiered_retry;
    s.ttl_override = options.ttl_override;
    s.seed = options.seed;

    std::mt19937_64 rng(options.seed * 0x9E3779B97F4A7C15ULL + 7);
    s.accounts.push_back({"alice", "alice-pw-" + random_alnum(rng, 8), make_markers(rng, "alice")});
    s.accounts.push_back({"mallory", "mallory-pw-" + random_alnum(rng, 8), make_markers(rng, "mallory")});

    s.resources["/"] = {200,
                        "<html><head><title>" + options.name +
                            "</title></head><body><h1>Welcome</h1>"
                            "<a href=\"/about\">About us</a> <a href=\"/account.php\">My account</a> "
                            "<a href=\"/logout\">Log out</a></body></html>",
                        {},
                        false};
    s.resources["/about"] = {200, "<html><body><h1>About</h1><p>A small demo shop.</p></body></html>", {}, false};
    s.resources["/login"] = {200,
                             "<html><body><form method=\"post\" action=\"/login\">"
                             "<input name=\"username\"><input type=\"password\" name=\"password\">"
                             "<button>Sign in</button></form></body></html>",
                             {},
                             false};
    s.resources["/static/site.css"] = {200, "body { font-family: sans-serif; }", {{"Content-Type", "text/css"}}, false};

    Headers account_headers;
    if (options.protected_no_store) account_headers.emplace_back("Cache-Control", "no-store");
    s.resources["/account.php"] = {
        200,
        "<html><head><title>Account</title><script src=\"/static/app.{{bundle}}.js\"></script></head><body>"
        "<h1>Hello {{user}}</h1>"
        "<p class=\"email\">{{marker:email}}</p><p class=\"name\">{{marker:fullname}}</p>"
        "<form method=\"post\" action=\"/account.php\"><input type=\"hidden\" name=\"csrf_token\" value=\"{{csrf}}\">"
        "<button>Save</button></form>"
        "<a href=\"/oauth/authorize?client_id=wcdlab&amp;state={{csrf}}\">Connect</a>"
        "<script>var bundleHint = \"{{bundle}}\";</script>"
        "<footer>Rendered {{date}}</footer><a href=\"/logout\">Log out</a></body></html>",
        account_headers,
        true};
    return s;
}

std::vector<SimSite> standard_catalog() {
    std::vector<std::set<OriginVariant>> subsets{{}};
    for (auto v : kAllOriginVariants) subsets.push_back({v});
    for (std::size_t i = 0; i < kAllOriginVariants.size(); ++i)
        for (std::size_t j = i + 1; j < kAllOriginVariants.size(); ++j)
            subsets.push_back({kAllOriginVariants[i], kAllOriginVariants[j]});

    std::vector<SimSite> sites;
    std::uint64_t index = 0;
    for (const auto& subset : subsets) {
        for (const auto& profile : builtin_profiles()) {
            for (bool no_store : {false, true}) {
                SiteOptions o;
                char host[32];
                std::snprintf(host, sizeof(host), "wcd%03llu.test", static_cast<unsigned long long>(index));
                o.host = host;
                o.origin.variants = subset;
                o.origin.decode_before_route = true;
                o.name = o.origin.describe() + "/" + profile.name + (no_store ? "/no-store" : "");
                o.profile = profile;
                o.protected_no_store = no_store;
                o.seed = 1000 + index;
                sites.push_back(make_account_site(o));
                ++index;
            }
        }
    }
    return sites;
}

SimSite classic_site() {
    SiteOptions o;
    o.name = "classic-replay";
    o.host = "classic.test";
    o.origin.variants = {OriginVariant::PathParameterFallback};
    o.profile = builtin_profile("akamai_default");
    o.profile.name = "akamai_extension_rule";
    o.profile.rules.push_back(CacheRule{{"jpg", "jpeg", "png", "gif", "css", "js"}, "", {}, kDefaultTtl, false});
    o.seed = 42;
    return make_account_site(o);
}

SimSite sitemap_site() {
    SiteOptions o;
    o.name = "sitemap-1200";
    o.host = "sitemap.test";
    o.profile = builtin_profile("akamai_default");
    o.seed = 7;
    auto s = make_account_site(o);
    s.resources.erase("/login");

    std::string home = "<html><body><h1>Catalog</h1>";
    auto link = [&](const std::string& href) { home += "<a href=\"" + href + "\">" + href + "</a>\n"; };
    link("/about");
    link("/account.php");
    link("/logout");
    link("http://elsewhere.example/partner");
    for (int n = 1; n <= 600; ++n) {
        auto path = "/item/" + std::to_string(n);
        link(path);
        auto next = "/item/" + std::to_string(n % 600 + 1);
        s.resources[path] = {200, "<html><body><p>Item " + std::to_string(n) + "</p><a href=\"" + next +
                                      "\">next</a><a href=\"/\">home</a></body></html>", {}, false};
    }
    for (int n = 1; n <= 300; ++n) {
        auto path = "/blog/" + std::to_string(n) + "/comments";
        link(path);
        s.resources[path] = {200, "<html><body><p>Comments on post " + std::to_string(n) +
                                      "</p><a href=\"/logout\">Log out</a></body></html>", {}, false};
    }
    s.resources["/search"] = {200, "<html><body><p>Search results</p></body></html>", {}, false};
    for (int n = 1; n <= 200; ++n) link("/search?q=term" + std::to_string(n));
    s.resources["/catalog"] = {200, "<html><body><p>Catalog page</p></body></html>", {}, false};
    for (int n = 1; n <= 97; ++n) link("/catalog?page=" + std::to_string(n) + "&amp;sort=asc");
    home += "</body></html>";
    s.resources["/"].body = home;
    return s;
}

std::optional<std::vector<SimSite>> builtin_scenario(std::string_view name) {
    if (name == "catalog") return standard_catalog();
    if (name == "classic") return std::vector<SimSite>{classic_site()};
    if (name == "sitemap") return std::vector<SimSite>{sitemap_site()};
    return std::nullopt;
}

} // namespace wcd::lab
