// Cache-Control parsing and CDN cacheability rules.
//
// A CdnProfile models the default behavior of a caching rules engine: which
// objects it stores without being told, and which origin Cache-Control
// directives it honors as a veto. Optional CacheRules are evaluated before the
// profile default and model site-specific configuration.

#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wcd {

struct Directive {
    std::string name;
    std::optional<std::string> value;

    bool operator==(const Directive&) const = default;
};

struct CacheControlDirectives {
    bool no_store = false;
    bool no_cache = false;
    bool private_ = false;
    bool public_ = false;
    std::optional<long long> max_age;
    bool must_revalidate = false;
    bool no_transform = false;
    std::vector<Directive> extensions;
    // Every directive as it appeared (name lowercased), recognized or not.
    std::vector<Directive> all;

    bool operator==(const CacheControlDirectives&) const = default;
};

CacheControlDirectives parse_cache_control(std::string_view header_value);
std::string serialize_cache_control(const CacheControlDirectives& d);
// Distinct directive names, sorted, with values blanked, e.g.
// "max-age=, public"; the key used when tallying header combinations.
std::string cache_control_shape(const CacheControlDirectives& d);

// Expires and Pragma are parsed for reporting only.
struct ResponseCacheHeaders {
    std::optional<CacheControlDirectives> cache_control;
    std::optional<std::string> expires;
    bool pragma_no_cache = false;
    std::optional<std::string> pragma;
};

ResponseCacheHeaders collect_cache_headers(const std::vector<std::pair<std::string, std::string>>& headers);

struct HonoredHeaders {
    bool no_store = false;
    bool no_cache = false;
    bool private_ = false;

    bool forbids(const CacheControlDirectives& d) const {
        return (no_store && d.no_store) || (no_cache && d.no_cache) || (private_ && d.private_);
    }
    bool operator==(const HonoredHeaders&) const = default;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CacheRule {
    std::set<std::string> extensions; // match on the last path segment's extension
    std::string glob;                 // or on the whole path ('*' and '?')
    HonoredHeaders honor;
    long long ttl = 3600;
    bool override_headers = false;

    bool matches(std::string_view path) const;
};

enum class DefaultCached { ExtensionList, AllObjects, ExtensionListOrHeaderOptIn };

std::string_view default_cached_name(DefaultCached d);

inline constexpr long long kDefaultTtl = 3600;

struct CdnProfile {
    std::string name;
    DefaultCached default_cached = DefaultCached::ExtensionList;
    std::set<std::string> static_extensions;
    HonoredHeaders honored;
    long long default_ttl = kDefaultTtl;
    std::vector<CacheRule> rules;
};

enum class DecisionReason { ExtensionMatch, HeaderOptIn, HeaderForbids, DefaultAll, NoMatch };

std::string_view reason_name(DecisionReason r);

struct CacheDecision {
    bool store = false;
    long long ttl = 0;
    DecisionReason reason = DecisionReason::NoMatch;
};

const std::set<std::string>& default_static_extensions();

// Extension of the last '/'-separated segment, lowercased; empty if none.
std::string path_extension(std::string_view path);

CacheDecision decide(const CdnProfile& profile, std::string_view request_path, int status,
                     const CacheControlDirectives& directives);

std::vector<CdnProfile> builtin_profiles();
// Throws ConfigError for unknown names.
CdnProfile builtin_profile(std::string_view name);

// JSON schema:
//   { "profiles": [ { "name": "...", "default_cached": "extension_list" |
//       "all_objects" | "extension_list_or_header_opt_in",
//       "static_extensions": ["css", ...], "honored": ["no-store", ...],
//       "default_ttl": 3600,
//       "rules": [ { "extensions": [...] | "glob": "/static/*",
//                    "honor": [...], "ttl": 60, "override_headers": false } ] } ] }
std::vector<CdnProfile> load_profiles(std::string_view json_text);
CdnProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const CdnProfile& profile);

} // namespace wcd
