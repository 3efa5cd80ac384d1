// Deterministic origin server and caching proxy pair.
//
// The origin implements the URL-parsing variants that let a path-confusion
// payload reach a real page; the proxy keys its cache on the URL as it sees
// it and consults a CdnProfile for storage. Everything runs on a simulated
// clock so TTL behavior is reproducible.

#pragma once

#include "wcd/cache_policy.h"
#include "wcd/detector.h"
#include "wcd/http_engine.h"
#include "wcd/url.h"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace wcd::lab {

enum class OriginVariant {
    PathParameterFallback,
    TruncateAtNewline,
    SemicolonParams,
    TruncateAtFragment,
    TruncateAtQuestion,
};

inline constexpr std::array<OriginVariant, 5> kAllOriginVariants = {
    OriginVariant::PathParameterFallback, OriginVariant::TruncateAtNewline, OriginVariant::SemicolonParams,
    OriginVariant::TruncateAtFragment, OriginVariant::TruncateAtQuestion,
};

std::string_view variant_name(OriginVariant v);
std::optional<OriginVariant> variant_from_name(std::string_view name);

struct OriginSemantics {
    std::set<OriginVariant> variants;
    bool decode_before_route = true;

    bool has(OriginVariant v) const { return variants.contains(v); }
    std::string describe() const;
};

// The path the origin routes on after decoding and truncation.
std::string origin_route_path(const OriginSemantics& origin, std::string_view raw_path);

struct Resource {
    int status = 200;
    // Template; see render_template for the placeholders.
    std::string body;
    Headers headers;
    bool protected_ = false;
};

struct LabAccount {
    std::string username;
    std::string password;
    std::vector<Marker> markers;
};

enum class DenyMode { LoginRedirect, Forbidden };

struct SimSite {
    std::string name;
    std::string host;
    OriginSemantics origin;
    CdnProfile cache_profile;
    bool proxy_decodes_percent = false;
    std::map<std::string, Resource> resources;
    std::vector<LabAccount> accounts;
    DenyMode deny = DenyMode::LoginRedirect;
    std::string login_path = "/login";
    std::string logout_path = "/logout";
    std::string session_cookie = "sid";
    long long session_ttl = 86400;
    std::optional<long long> ttl_override;
    bool tiered_retry = false;
    std::uint64_t seed = 1;

    // Throws ConfigError on an inconsistent definition.
    void validate() const;
    // Protected resources whose template carries at least one marker slot.
    std::vector<std::string> marker_bearing_paths() const;
};

struct SimClock {
    long long now = 0;
};

inline constexpr long long kSimEpoch = 1700000000; // 2023-11-14T22:13:20Z

SimClock advance_clock(SimClock clock, long long seconds);

std::string http_date(long long epoch_seconds);

struct Session {
    std::string id;
    std::string username;
    std::string csrf;
    std::string bundle; // per-session script name component
    long long expires_at = 0;
};

struct OriginResponse {
    std::string resource_path; // empty when nothing matched
    int status = 404;
    std::string body;
    Headers headers;
};

// Body placeholders: {{user}}, {{marker:<label>}}, {{csrf}}, {{bundle}},
// {{date}}, {{path}}.
std::string render_template(std::string_view tmpl, const LabAccount* account, const Session* session,
                            long long now, std::string_view request_path);

// Pure routing for GET requests on static and protected resources.
OriginResponse origin_resolve(const SimSite& site, std::string_view raw_path, const Session* session, long long now);

enum class CacheEvent { Hit, MissStored, MissNotStored, Expired };

std::string_view cache_event_name(CacheEvent e);

struct CacheEntry {
    std::string key;
    std::string body;
    int status = 0;
    Headers headers;
    long long stored_at = 0;
    long long ttl = 0;

    bool fresh(long long now) const { return stored_at + ttl > now; }
};

struct LabRequest {
    std::string method = "GET";
    std::string target; // raw request target: path[?query]
    Headers headers;
    std::string body;
    std::string region = "default";
};

struct LabResponse {
    int status = 0;
    Headers headers;
    std::string body;
    CacheEvent event = CacheEvent::MissNotStored;
};

// Proxy view of a request: the cache key and the path matched against
// caching rules.
struct ProxyView {
    std::string key;
    std::string rule_path;
};

ProxyView proxy_view(std::string_view target, bool proxy_decodes_percent);

// One site's mutable state: cache, sessions and clock. Not thread-safe; the
// lab server serializes access.
class SiteRuntime {
public:
    explicit SiteRuntime(SimSite site);

    LabResponse proxy_handle(const LabRequest& request);

    const SimSite& site() const { return site_; }
    SimClock clock() const { return clock_; }
    void advance(long long seconds);
    std::size_t origin_requests() const { return origin_requests_; }
    std::size_t cache_size() const;

    // Creates a session directly, bypassing the login form.
    std::string create_session(const std::string& username);

private:
    OriginResponse origin_handle(const LabRequest& request);
    const Session* session_for(const Headers& headers);
    std::string random_token(std::size_t length);
    void decorate(LabResponse& response, CacheEvent event, long long age) const;

    SimSite site_;
    SimClock clock_{kSimEpoch};
    std::mt19937_64 rng_;
    std::map<std::string, Session> sessions_;
    // region -> key -> entry
    std::map<std::string, std::map<std::string, CacheEntry>> cache_;
    std::size_t origin_requests_ = 0;
};

// Ground truth: replays victim then attacker (after delay_seconds of
// simulated time) against a fresh runtime for every marker-bearing page and
// reports whether the attacker saw a victim marker.
bool oracle_vulnerable(const SimSite& site, Technique technique, long long delay_seconds = 0);

// Scenario files (JSON):
// { "sites": [ { "name", "host", "origin": { "variants": [...],
//   "decode_before_route": true }, "cache_profile": "akamai_default" | {...},
//   "proxy_decodes_percent": false, "tiered_retry": false, "ttl_override": 60,
//   "deny": "login_redirect" | "forbidden", "session_ttl": 86400, "seed": 1,
//   "accounts": [ { "username", "password", "markers": [ {"label","value"} ] } ],
//   "resources": { "/path": { "status": 200, "body": "...", "protected": false,
//                             "headers": { "Cache-Control": "no-store" } } } } ] }
std::vector<SimSite> load_scenario(std::string_view json_text);
std::vector<SimSite> load_scenario_file(const std::string& path);
nlohmann::json scenario_to_json(const std::vector<SimSite>& sites);

// Builders for the shipped scenarios.
struct SiteOptions {
    std::string name;
    std::string host;
    OriginSemantics origin;
    CdnProfile profile;
    bool protected_no_store = false;
    bool proxy_decodes_percent = false;
    bool tiered_retry = false;
    std::optional<long long> ttl_override;
    std::uint64_t seed = 1;
};

// A small account site: public home/about/login pages and a protected
// /account.php that embeds the victim's markers and session secrets.
SimSite make_account_site(const SiteOptions& options);

// Every origin-variant subset of size <= 2, times the four built-in
// profiles, times no-store present/absent on protected pages.
std::vector<SimSite> standard_catalog();
// The classic scenario: path-parameter fallback origin, extension-rule cache,
// image payload.
SimSite classic_site();
// 1,200 linked pages in 7 structural groups plus a logout link.
SimSite sitemap_site();

// Named built-in scenarios: "catalog", "classic", "sitemap".
std::optional<std::vector<SimSite>> builtin_scenario(std::string_view name);

} // namespace wcd::lab
