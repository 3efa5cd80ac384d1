#include "wcd/cache_policy.h"

#include <algorithm>
#include <cctype>
#include <charconv>

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

// Splits on commas that are not inside a quoted-string.
std::vector<std::string_view> split_directives(std::string_view value) {
    std::vector<std::string_view> parts;
    bool quoted = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < value.size(); ++i) {
        char c = value[i];
        if (c == '"' && (i == 0 || value[i - 1] != '\\')) quoted = !quoted;
        if (c == ',' && !quoted) {
            parts.push_back(value.substr(start, i - start));
            start = i + 1;
        }
    }
    parts.push_back(value.substr(start));
    return parts;
}

std::optional<long long> parse_seconds(std::string_view v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty() || out < 0) return std::nullopt;
    return out;
}

bool glob_match(std::string_view pattern, std::string_view text) {
    std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

HonoredHeaders honored_from_json(const nlohmann::json& arr) {
    HonoredHeaders h;
    for (const auto& item : arr) {
        auto name = to_lower(item.get<std::string>());
        if (name == "no-store") h.no_store = true;
        else if (name == "no-cache") h.no_cache = true;
        else if (name == "private") h.private_ = true;
        else throw ConfigError("unknown honored header: " + name);
    }
    return h;
}

nlohmann::json honored_to_json(const HonoredHeaders& h) {
    auto arr = nlohmann::json::array();
    if (h.no_store) arr.push_back("no-store");
    if (h.no_cache) arr.push_back("no-cache");
    if (h.private_) arr.push_back("private");
    return arr;
}

} // namespace

CacheControlDirectives parse_cache_control(std::string_view header_value) {
    CacheControlDirectives d;
    for (auto part : split_directives(header_value)) {
        part = trim(part);
        if (part.empty()) continue;
        Directive dir;
        auto eq = part.find('=');
        dir.name = to_lower(trim(part.substr(0, eq)));
        if (eq != std::string_view::npos) dir.value = std::string(trim(part.substr(eq + 1)));
        d.all.push_back(dir);

        const auto& n = dir.name;
        if (n == "no-store") d.no_store = true;
        else if (n == "no-cache") d.no_cache = true;
        else if (n == "private") d.private_ = true;
        else if (n == "public") d.public_ = true;
        else if (n == "must-revalidate") d.must_revalidate = true;
        else if (n == "no-transform") d.no_transform = true;
        else if (n == "max-age" && dir.value && parse_seconds(*dir.value)) d.max_age = parse_seconds(*dir.value);
        else d.extensions.push_back(dir);
    }
    return d;
}

std::string serialize_cache_control(const CacheControlDirectives& d) {
    std::string out;
    for (const auto& dir : d.all) {
        if (!out.empty()) out += ", ";
        out += dir.name;
        if (dir.value) out += "=" + *dir.value;
    }
    return out;
}

std::string cache_control_shape(const CacheControlDirectives& d) {
    std::set<std::string> tokens;
    for (const auto& dir : d.all) tokens.insert(dir.name + (dir.value ? "=" : ""));
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ", ";
        out += t;
    }
    return out;
}

ResponseCacheHeaders collect_cache_headers(const std::vector<std::pair<std::string, std::string>>& headers) {
    ResponseCacheHeaders out;
    for (const auto& [name, value] : headers) {
        auto lower = to_lower(name);
        if (lower == "cache-control") {
            auto parsed = parse_cache_control(value);
            if (!out.cache_control) {
                out.cache_control = std::move(parsed);
            } else {
                // Repeated headers combine as one comma-separated list.
                auto merged = serialize_cache_control(*out.cache_control) + ", " + serialize_cache_control(parsed);
                out.cache_control = parse_cache_control(merged);
            }
        } else if (lower == "expires") {
            out.expires = value;
        } else if (lower == "pragma") {
            out.pragma = value;
            if (to_lower(value).find("no-cache") != std::string::npos) out.pragma_no_cache = true;
        }
    }
    return out;
}

bool CacheRule::matches(std::string_view path) const {
    if (!extensions.empty()) return extensions.contains(path_extension(path));
    return glob_match(glob, path);
}

std::string_view default_cached_name(DefaultCached d) {
    switch (d) {
    case DefaultCached::ExtensionList: return "extension_list";
    case DefaultCached::AllObjects: return "all_objects";
    case DefaultCached::ExtensionListOrHeaderOptIn: return "extension_list_or_header_opt_in";
    }
    return "?";
}

std::string_view reason_name(DecisionReason r) {
    switch (r) {
    case DecisionReason::ExtensionMatch: return "ExtensionMatch";
    case DecisionReason::HeaderOptIn: return "HeaderOptIn";
    case DecisionReason::HeaderForbids: return "HeaderForbids";
    case DecisionReason::DefaultAll: return "DefaultAll";
    case DecisionReason::NoMatch: return "NoMatch";
    }
    return "?";
}

const std::set<std::string>& default_static_extensions() {
    static const std::set<std::string> exts = {"css", "js",  "jpg", "jpeg", "png", "gif", "ico",
                                               "svg", "woff", "woff2", "txt", "pdf", "exe", "zip"};
    return exts;
}

std::string path_extension(std::string_view path) {
    auto slash = path.rfind('/');
    auto last = slash == std::string_view::npos ? path : path.substr(slash + 1);
    auto dot = last.rfind('.');
    if (dot == std::string_view::npos || dot + 1 == last.size()) return {};
    return to_lower(last.substr(dot + 1));
}

CacheDecision decide(const CdnProfile& profile, std::string_view request_path, int status,
                     const CacheControlDirectives& directives) {
    const auto no_store = [](DecisionReason r) { return CacheDecision{false, 0, r}; };
    if (status != 200 && status != 404) return no_store(DecisionReason::NoMatch);

    for (const auto& rule : profile.rules) {
        if (!rule.matches(request_path)) continue;
        if (!rule.override_headers && rule.honor.forbids(directives)) return no_store(DecisionReason::HeaderForbids);
        return {true, rule.ttl, DecisionReason::ExtensionMatch};
    }

    if (profile.honored.forbids(directives)) return no_store(DecisionReason::HeaderForbids);

    const bool ext_match = profile.static_extensions.contains(path_extension(request_path));
    switch (profile.default_cached) {
    case DefaultCached::ExtensionList:
        if (ext_match) return {true, profile.default_ttl, DecisionReason::ExtensionMatch};
        return no_store(DecisionReason::NoMatch);
    case DefaultCached::AllObjects:
        return {true, profile.default_ttl, DecisionReason::DefaultAll};
    case DefaultCached::ExtensionListOrHeaderOptIn:
        if (ext_match) return {true, profile.default_ttl, DecisionReason::ExtensionMatch};
        if (directives.public_ || directives.max_age.value_or(0) > 0)
            return {true, profile.default_ttl, DecisionReason::HeaderOptIn};
        return no_store(DecisionReason::NoMatch);
    }
    return no_store(DecisionReason::NoMatch);
}

std::vector<CdnProfile> builtin_profiles() {
    const auto& exts = default_static_extensions();
    return {
        {"akamai_default", DefaultCached::ExtensionList, exts, {false, false, false}, kDefaultTtl, {}},
        {"cloudflare_default", DefaultCached::ExtensionListOrHeaderOptIn, exts, {true, true, true}, kDefaultTtl, {}},
        {"cloudfront_default", DefaultCached::AllObjects, exts, {true, true, true}, kDefaultTtl, {}},
        {"fastly_default", DefaultCached::AllObjects, exts, {false, false, true}, kDefaultTtl, {}},
    };
}

CdnProfile builtin_profile(std::string_view name) {
    for (auto& p : builtin_profiles()) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown CDN profile: " + std::string(name));
}

CdnProfile profile_from_json(const nlohmann::json& j) {
    try {
        if (j.is_string()) return builtin_profile(j.get<std::string>());
        CdnProfile p;
        if (j.contains("base")) p = builtin_profile(j.at("base").get<std::string>());
        p.name = j.value("name", p.name);
        if (p.name.empty()) throw ConfigError("profile without a name");
        if (j.contains("default_cached")) {
            auto v = j.at("default_cached").get<std::string>();
            if (v == "extension_list") p.default_cached = DefaultCached::ExtensionList;
            else if (v == "all_objects") p.default_cached = DefaultCached::AllObjects;
            else if (v == "extension_list_or_header_opt_in") p.default_cached = DefaultCached::ExtensionListOrHeaderOptIn;
            else throw ConfigError("unknown default_cached: " + v);
        }
        if (j.contains("static_extensions")) {
            p.static_extensions.clear();
            for (const auto& e : j.at("static_extensions")) p.static_extensions.insert(to_lower(e.get<std::string>()));
        } else if (p.static_extensions.empty()) {
            p.static_extensions = default_static_extensions();
        }
        if (j.contains("honored")) p.honored = honored_from_json(j.at("honored"));
        p.default_ttl = j.value("default_ttl", p.default_ttl);
        if (p.default_ttl < 0) throw ConfigError("negative default_ttl in profile " + p.name);
        if (j.contains("rules")) {
            p.rules.clear();
            for (const auto& r : j.at("rules")) {
                CacheRule rule;
                const bool has_ext = r.contains("extensions");
                const bool has_glob = r.contains("glob");
                if (has_ext == has_glob) throw ConfigError("cache rule needs exactly one of extensions/glob");
                if (has_ext) {
                    for (const auto& e : r.at("extensions")) rule.extensions.insert(to_lower(e.get<std::string>()));
                    if (rule.extensions.empty()) throw ConfigError("empty extension set in cache rule");
                } else {
                    rule.glob = r.at("glob").get<std::string>();
                }
                if (r.contains("honor")) rule.honor = honored_from_json(r.at("honor"));
                rule.ttl = r.value("ttl", p.default_ttl);
                rule.override_headers = r.value("override_headers", false);
                p.rules.push_back(std::move(rule));
            }
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed profile: ") + e.what());
    }
}

nlohmann::json profile_to_json(const CdnProfile& profile) {
    nlohmann::json j;
    j["name"] = profile.name;
    j["default_cached"] = default_cached_name(profile.default_cached);
    j["static_extensions"] = profile.static_extensions;
    j["honored"] = honored_to_json(profile.honored);
    j["default_ttl"] = profile.default_ttl;
    if (!profile.rules.empty()) {
        auto rules = nlohmann::json::array();
        for (const auto& r : profile.rules) {
            nlohmann::json rj;
            if (!r.extensions.empty()) rj["extensions"] = r.extensions;
            else rj["glob"] = r.glob;
            rj["honor"] = honored_to_json(r.honor);
            rj["ttl"] = r.ttl;
            rj["override_headers"] = r.override_headers;
            rules.push_back(rj);
        }
        j["rules"] = rules;
    }
    return j;
}

std::vector<CdnProfile> load_profiles(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("profile file is not valid JSON: ") + e.what());
    }
    if (!doc.contains("profiles") || !doc.at("profiles").is_array()) throw ConfigError("missing \"profiles\" array");
    std::vector<CdnProfile> out;
    for (const auto& p : doc.at("profiles")) out.push_back(profile_from_json(p));
    return out;
}

} // namespace wcd
