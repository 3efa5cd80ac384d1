#include "wcd/http_engine.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <thread>

namespace wcd {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool domain_matches(std::string_view cookie_domain, std::string_view host) {
    if (cookie_domain == host) return true;
    return host.size() > cookie_domain.size() && host.ends_with(cookie_domain) &&
           host[host.size() - cookie_domain.size() - 1] == '.';
}

std::optional<long long> parse_http_date(std::string_view s) {
    std::tm tm{};
    std::istringstream in{std::string(s)};
    in >> std::get_time(&tm, "%a, %d %b %Y %H:%M:%S");
    if (in.fail()) return std::nullopt;
    return static_cast<long long>(timegm(&tm));
}

bool is_redirect(int status) {
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

std::string regex_escape(std::string_view s) {
    static const std::string special = R"(\^$.|?*+()[]{}/)";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos) out += '\\';
        out += c;
    }
    return out;
}

} // namespace

std::optional<std::string> find_header(const Headers& headers, std::string_view name) {
    for (const auto& [k, v] : headers) {
        if (k.size() == name.size() &&
            std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) {
                return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
            })) {
            return v;
        }
    }
    return std::nullopt;
}

std::string_view role_name(Role r) {
    switch (r) {
    case Role::Victim: return "victim";
    case Role::Attacker: return "attacker";
    case Role::Unauthenticated: return "unauthenticated";
    }
    return "?";
}

long long system_epoch_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void CookieJar::store(std::string_view host, std::string_view set_cookie, long long now) {
    Cookie c;
    c.domain = to_lower(host);
    bool remove = false;
    std::size_t pos = 0;
    bool first = true;
    while (pos <= set_cookie.size()) {
        auto semi = set_cookie.find(';', pos);
        if (semi == std::string_view::npos) semi = set_cookie.size();
        auto part = trim(set_cookie.substr(pos, semi - pos));
        pos = semi + 1;
        auto eq = part.find('=');
        auto key = trim(part.substr(0, eq));
        auto val = eq == std::string_view::npos ? std::string_view{} : trim(part.substr(eq + 1));
        if (first) {
            if (eq == std::string_view::npos || key.empty()) return;
            c.name = std::string(key);
            c.value = std::string(val);
            first = false;
            continue;
        }
        auto lkey = to_lower(key);
        if (lkey == "max-age") {
            try {
                auto secs = std::stoll(std::string(val));
                if (secs <= 0) remove = true;
                else c.expiry = now + secs;
            } catch (const std::exception&) {
            }
        } else if (lkey == "expires" && !c.expiry) {
            if (auto t = parse_http_date(val)) c.expiry = *t;
        } else if (lkey == "domain" && !val.empty()) {
            auto d = to_lower(val);
            if (d.front() == '.') d.erase(0, 1);
            if (domain_matches(d, c.domain)) c.domain = d;
        }
    }
    if (c.expiry && *c.expiry <= now) remove = true;
    auto same = [&](const Cookie& o) { return o.name == c.name && o.domain == c.domain; };
    cookies_.erase(std::remove_if(cookies_.begin(), cookies_.end(), same), cookies_.end());
    if (!remove) cookies_.push_back(std::move(c));
}

void CookieJar::put(Cookie c) {
    auto same = [&](const Cookie& o) { return o.name == c.name && o.domain == c.domain; };
    cookies_.erase(std::remove_if(cookies_.begin(), cookies_.end(), same), cookies_.end());
    cookies_.push_back(std::move(c));
}

std::string CookieJar::header_for(std::string_view host, long long now) const {
    std::string out;
    auto h = to_lower(host);
    for (const auto& c : cookies_) {
        if (!domain_matches(c.domain, h)) continue;
        if (c.expiry && *c.expiry <= now) continue;
        if (!out.empty()) out += "; ";
        out += c.name + "=" + c.value;
    }
    return out;
}

std::optional<Cookie> CookieJar::find(std::string_view name) const {
    for (const auto& c : cookies_) {
        if (c.name == name) return c;
    }
    return std::nullopt;
}

RateLimiter::RateLimiter(double requests_per_second, std::chrono::milliseconds guard) : rate_(requests_per_second) {
    if (!(requests_per_second > 0)) throw std::invalid_argument("rate must be positive");
    capacity_ = requests_per_second >= 1.0 ? static_cast<std::size_t>(std::floor(requests_per_second)) : 1;
    // floor(rate) per second; slower rates get one request per 1/rate seconds.
    auto window_s = requests_per_second >= 1.0 ? 1.0 : 1.0 / requests_per_second;
    window_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(window_s)) +
              guard;
}

void RateLimiter::acquire(const std::string& host) {
    std::unique_lock lock(mu_);
    while (true) {
        auto now = std::chrono::steady_clock::now();
        auto& log = sent_[host];
        while (!log.empty() && now - log.front() >= window_) log.pop_front();
        if (log.size() < capacity_) {
            log.push_back(now);
            return;
        }
        auto wake = log.front() + window_;
        lock.unlock();
        std::this_thread::sleep_until(wake);
        lock.lock();
    }
}

HttpEngine::HttpEngine(std::shared_ptr<Transport> transport, std::shared_ptr<RateLimiter> limiter,
                       EngineOptions options, EpochClock clock)
    : transport_(std::move(transport)), limiter_(std::move(limiter)), options_(options), clock_(std::move(clock)) {}

RawResponse HttpEngine::send_with_retry(const RawRequest& request) {
    for (int attempt = 0;; ++attempt) {
        if (limiter_) limiter_->acquire(request.url.host);
        try {
            return transport_->send(request);
        } catch (const NetworkError&) {
            if (attempt >= options_.max_retries) throw;
            std::this_thread::sleep_for(options_.retry_backoff * (attempt + 1));
        }
    }
}

HttpExchange HttpEngine::fetch(Identity& identity, std::string_view url, std::string_view method,
                               const std::vector<std::pair<std::string, std::string>>& form) {
    HttpExchange ex;
    ex.url = std::string(url);
    ex.method = std::string(method);
    ex.identity_role = identity.role;

    RawRequest req;
    req.method = std::string(method);
    req.url = parse_url(url);
    if (!form.empty()) req.body = form_encode(form);

    auto started = std::chrono::steady_clock::now();
    for (int hop = 0;; ++hop) {
        req.headers.clear();
        req.headers.emplace_back("User-Agent",
                                 identity.user_agent.empty() ? std::string(kDefaultUserAgent) : identity.user_agent);
        if (identity.role != Role::Unauthenticated) {
            auto cookie = identity.cookie_jar.header_for(req.url.host, clock_());
            if (!cookie.empty()) req.headers.emplace_back("Cookie", cookie);
        }
        if (!req.body.empty()) req.headers.emplace_back("Content-Type", "application/x-www-form-urlencoded");
        ex.hops.push_back(req.url.str());

        auto resp = send_with_retry(req);
        if (identity.role != Role::Unauthenticated) {
            for (const auto& [k, v] : resp.headers) {
                if (to_lower(k) == "set-cookie") identity.cookie_jar.store(req.url.host, v, clock_());
            }
        }
        ex.request_headers = req.headers;
        ex.status = resp.status;
        ex.response_headers = std::move(resp.headers);
        ex.body = std::move(resp.body);

        auto location = find_header(ex.response_headers, "Location");
        if (!is_redirect(ex.status) || !location) break;
        if (hop >= options_.max_redirects) throw TooManyRedirects("more than " + std::to_string(options_.max_redirects) + " redirects from " + ex.url);
        auto next = resolve_url(req.url, *location);
        if (!next) break;
        next->fragment.reset();
        if (ex.status != 307 && ex.status != 308) {
            req.method = "GET";
            req.body.clear();
        }
        req.url = std::move(*next);
    }
    ex.timing_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    return ex;
}

bool HttpEngine::session_valid(const Identity& identity) const {
    if (!identity.credentials) return false;
    auto c = identity.cookie_jar.find(identity.credentials->session_cookie);
    return c && (!c->expiry || *c->expiry > clock_());
}

void HttpEngine::login(Identity& identity) {
    if (!identity.credentials) throw AuthFailure("identity has no login descriptor");
    const auto& d = *identity.credentials;
    HttpExchange ex;
    try {
        ex = fetch(identity, d.url, d.method, d.fields);
    } catch (const std::exception& e) {
        throw AuthFailure("login request to " + d.url + " failed: " + e.what());
    }
    if (!session_valid(identity)) {
        throw AuthFailure("login to " + d.url + " did not set session cookie '" + d.session_cookie +
                          "' (status " + std::to_string(ex.status) + ")");
    }
    if (!d.success_contains.empty() && ex.body.find(d.success_contains) == std::string::npos) {
        throw AuthFailure("login to " + d.url + " succeeded without the expected page content");
    }
}

Identity HttpEngine::maintain_session(Identity identity) {
    if (!identity.credentials) throw AuthFailure("identity has no login descriptor");
    if (!session_valid(identity)) login(identity);
    return identity;
}

const std::vector<std::string>& default_logout_patterns() {
    static const std::vector<std::string> patterns = {"logout", "signout", "sign-out", "log-out", "session/destroy"};
    return patterns;
}

bool is_logout_link(std::string_view url, const std::vector<std::string>& patterns) {
    std::string target(url);
    if (auto scheme = target.find("://"); scheme != std::string::npos) {
        auto path_start = target.find('/', scheme + 3);
        target = path_start == std::string::npos ? "/" : target.substr(path_start);
    }
    if (auto hash = target.find('#'); hash != std::string::npos) target.erase(hash);
    target = to_lower(target);
    for (const auto& p : patterns) {
        std::regex re("(^|[^a-z0-9])" + regex_escape(to_lower(p)) + "([^a-z0-9]|$)");
        if (std::regex_search(target, re)) return true;
    }
    return false;
}

std::string form_encode(const std::vector<std::pair<std::string, std::string>>& fields) {
    static constexpr char hex[] = "0123456789ABCDEF";
    auto encode = [](std::string_view s) {
        std::string out;
        for (unsigned char c : s) {
            if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
                out += static_cast<char>(c);
            } else {
                out += '%';
                out += hex[c >> 4];
                out += hex[c & 15];
            }
        }
        return out;
    };
    std::string out;
    for (const auto& [k, v] : fields) {
        if (!out.empty()) out += '&';
        out += encode(k) + "=" + encode(v);
    }
    return out;
}

} // namespace wcd
