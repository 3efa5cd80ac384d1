#include "wcd/scan.h"

#include "wcd/cache_policy.h"
#include "wcd/lab_server.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace wcd {

namespace {

LoginDescriptor login_from_json(const nlohmann::json& j) {
    LoginDescriptor d;
    d.url = j.at("url").get<std::string>();
    d.method = j.value("method", d.method);
    if (j.contains("fields")) {
        const auto& f = j.at("fields");
        if (f.is_object()) {
            for (const auto& [k, v] : f.items()) d.fields.emplace_back(k, v.get<std::string>());
        } else {
            for (const auto& pair : f) d.fields.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
        }
    }
    d.session_cookie = j.value("session_cookie", d.session_cookie);
    d.success_contains = j.value("success_contains", "");
    return d;
}

nlohmann::json login_to_json(const LoginDescriptor& d) {
    nlohmann::json fields = nlohmann::json::array();
    for (const auto& [k, v] : d.fields) fields.push_back({k, v});
    return {{"url", d.url},
            {"method", d.method},
            {"fields", fields},
            {"session_cookie", d.session_cookie},
            {"success_contains", d.success_contains}};
}

} // namespace

ScanConfig parse_scan_config(const nlohmann::json& j) {
    ScanConfig c;
    try {
        if (j.contains("resolve")) {
            for (const auto& [k, v] : j.at("resolve").items()) c.resolve[k] = v.get<std::string>();
        }
        c.user_agent = j.value("user_agent", c.user_agent);
        if (j.contains("sites")) {
            if (!j.at("sites").is_object()) throw ConfigError("site config: \"sites\" must be an object");
            for (const auto& [ref, s] : j.at("sites").items()) {
                SiteCredentials creds;
                if (s.contains("victim")) creds.victim = login_from_json(s.at("victim"));
                if (s.contains("attacker")) creds.attacker = login_from_json(s.at("attacker"));
                for (const auto& m : s.value("markers", nlohmann::json::array()))
                    creds.markers.markers.push_back({m.at("label").get<std::string>(), m.at("value").get<std::string>()});
                try {
                    creds.markers.validate();
                } catch (const std::invalid_argument& e) {
                    throw ConfigError("site '" + ref + "': " + e.what());
                }
                c.sites[ref] = std::move(creds);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("site config: ") + e.what());
    }
    return c;
}

ScanConfig load_scan_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read site config " + path);
    try {
        return parse_scan_config(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("site config " + path + ": " + e.what());
    }
}

nlohmann::json scan_config_to_json(const ScanConfig& config) {
    nlohmann::json sites = nlohmann::json::object();
    for (const auto& [ref, s] : config.sites) {
        nlohmann::json entry = nlohmann::json::object();
        if (s.victim) entry["victim"] = login_to_json(*s.victim);
        if (s.attacker) entry["attacker"] = login_to_json(*s.attacker);
        nlohmann::json markers = nlohmann::json::array();
        for (const auto& m : s.markers.markers) markers.push_back({{"label", m.label}, {"value", m.value}});
        entry["markers"] = markers;
        sites[ref] = entry;
    }
    return {{"resolve", config.resolve}, {"user_agent", config.user_agent}, {"sites", sites}};
}

ScanResult run_scan(const SeedPool& pool, const ScanConfig& config, const ScanOptions& options) {
    std::shared_ptr<Transport> transport = options.transport;
    if (!transport) {
        TransportOptions topts;
        topts.resolve = config.resolve;
        if (options.use_proxy_environment) apply_proxy_environment(topts);
        transport = make_http_transport(std::move(topts));
    }
    auto limiter = options.limiter ? options.limiter : std::make_shared<RateLimiter>(options.rate);

    DetectorConfig detector;
    detector.extension = options.extension;
    detector.attack_options = options.attack_options;
    detector.attacker_delay_seconds = options.delay_seconds;
    detector.delay = options.delay;
    NonceGenerator nonces(options.seed ^ 0x5eedULL);

    std::vector<std::vector<ScanVerdict>> per_site(pool.sites.size());
    std::vector<SiteOutcome> outcomes(pool.sites.size());
    std::mutex out_mu;
    std::atomic<std::size_t> next{0};

    auto work_site = [&](std::size_t index) {
        const auto& seed = pool.sites[index];
        auto& outcome = outcomes[index];
        outcome.domain = seed.primary_domain;
        HttpEngine engine(transport, limiter);

        auto ref = seed.login_ref.empty() ? seed.primary_domain : seed.login_ref;
        auto creds_it = config.sites.find(ref);
        if (creds_it == config.sites.end() || !creds_it->second.victim || !creds_it->second.attacker) {
            outcome.error = "no victim and attacker credentials for '" + ref + "'";
            return;
        }
        const auto& creds = creds_it->second;
        MarkerSet markers = creds.markers;
        if (!seed.markers_ref.empty()) {
            auto m = config.sites.find(seed.markers_ref);
            if (m == config.sites.end()) {
                outcome.error = "unknown marker reference '" + seed.markers_ref + "'";
                return;
            }
            markers = m->second.markers;
        }

        Identity victim{Role::Victim, {}, creds.victim, config.user_agent};
        Identity attacker{Role::Attacker, {}, creds.attacker, config.user_agent};
        try {
            engine.login(victim);
            engine.login(attacker);
        } catch (const std::exception& e) {
            outcome.error = e.what();
            return;
        }

        CrawlOptions copts;
        copts.budget = options.budget;
        copts.seed = options.seed;
        copts.extra_hosts = seed.subdomains;
        std::ostringstream journal_buf;
        copts.journal = options.journal ? &journal_buf : nullptr;
        AttackSurface surface;
        try {
            surface = crawl_domain(engine, seed.root, victim, copts);
        } catch (const std::exception& e) {
            outcome.error = std::string("crawl failed: ") + e.what();
            return;
        }
        if (options.journal) {
            std::lock_guard lock(out_mu);
            *options.journal << journal_buf.str();
        }
        if (options.mode == ScanMode::MarkerGated) surface = filter_marked_pages(std::move(surface), markers);
        outcome.truncated = surface.truncated;
        outcome.pages_tested = surface.pages.size();
        const auto cdn = cdn_label(surface.root_headers);

        for (const auto& page : surface.pages) {
            for (auto technique : options.techniques) {
                ScanVerdict v;
                try {
                    victim = engine.maintain_session(std::move(victim));
                    attacker = engine.maintain_session(std::move(attacker));
                    v = run_wcd_test(engine, page, technique, victim, attacker, markers, detector, nonces);
                } catch (const std::exception& e) {
                    v.page = page.str();
                    v.domain = page.host;
                    v.technique = technique;
                    v.status = VerdictStatus::Inconclusive;
                    v.error = e.what();
                }
                v.cdn_vendors = cdn;
                if (options.on_verdict) {
                    std::lock_guard lock(out_mu);
                    options.on_verdict(v);
                }
                per_site[index].push_back(std::move(v));
            }
        }
    };

    auto worker = [&] {
        for (std::size_t i = next++; i < pool.sites.size(); i = next++) work_site(i);
    };
    const auto n = std::max<std::size_t>(1, std::min(options.workers, pool.sites.size()));
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    ScanResult result;
    result.sites = std::move(outcomes);
    for (auto& verdicts : per_site) {
        for (auto& v : verdicts) {
            result.site_map.emplace(v.domain, registrable_domain(v.domain));
            result.verdicts.push_back(std::move(v));
        }
    }
    return result;
}

SeedPool lab_seed_pool(const std::vector<lab::SimSite>& sites, int port) {
    SeedPool pool;
    for (const auto& s : sites) {
        SeedSite seed;
        seed.primary_domain = s.host;
        seed.root = parse_url("http://" + s.host + ":" + std::to_string(port) + "/");
        seed.login_ref = s.host;
        pool.sites.push_back(std::move(seed));
    }
    return pool;
}

ScanConfig lab_scan_config(const std::vector<lab::SimSite>& sites, int port) {
    ScanConfig config;
    for (const auto& s : sites) {
        config.resolve[s.host] = "127.0.0.1";
        if (s.accounts.size() < 2) continue;
        auto login = [&](const lab::LabAccount& a) {
            LoginDescriptor d;
            d.url = "http://" + s.host + ":" + std::to_string(port) + s.login_path;
            d.fields = {{"username", a.username}, {"password", a.password}};
            d.session_cookie = s.session_cookie;
            return d;
        };
        SiteCredentials creds;
        creds.victim = login(s.accounts[0]);
        creds.attacker = login(s.accounts[1]);
        creds.markers.markers = s.accounts[0].markers;
        config.sites[s.host] = std::move(creds);
    }
    return config;
}

SelfcheckResult run_selfcheck(const std::vector<lab::SimSite>& sites, const SelfcheckOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    lab::LabServer server(sites);
    const int port = server.start();

    ScanOptions sopts;
    sopts.techniques = options.techniques;
    sopts.budget = options.budget;
    sopts.rate = options.rate;
    sopts.workers = options.workers;
    sopts.mode = options.mode;
    sopts.seed = options.seed;
    sopts.delay_seconds = options.delay_seconds;
    sopts.delay = [&server](const ParsedUrl& page, long long seconds) { server.advance_clock(page.host, seconds); };
    sopts.use_proxy_environment = false;

    SelfcheckResult result;
    result.scan = run_scan(lab_seed_pool(sites, port), lab_scan_config(sites, port), sopts);
    server.stop();

    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto& site = sites[i];
        const auto& outcome = result.scan.sites[i];
        for (auto technique : options.techniques) {
            SelfcheckRow row;
            row.site = site.name;
            row.host = site.host;
            row.technique = technique;
            row.inconclusive = !outcome.error.empty();
            for (const auto& v : result.scan.verdicts) {
                if (v.domain != site.host || v.technique != technique) continue;
                if (v.status == VerdictStatus::Inconclusive) row.inconclusive = true;
                if (v.vulnerable) row.scanner = true;
            }
            row.oracle = lab::oracle_vulnerable(site, technique, options.delay_seconds);
            if (!row.agrees()) ++result.disagreements;
            result.rows.push_back(std::move(row));
        }
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

} // namespace wcd
