#include "wcd/url.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace wcd {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

int default_port(std::string_view scheme) { return scheme == "https" ? 443 : 80; }

bool valid_host_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_';
}

std::vector<QueryParam> parse_query(std::string_view q) {
    std::vector<QueryParam> params;
    if (q.empty()) return params;
    std::size_t pos = 0;
    while (pos <= q.size()) {
        auto amp = q.find('&', pos);
        if (amp == std::string_view::npos) amp = q.size();
        auto pair = q.substr(pos, amp - pos);
        if (!pair.empty()) {
            auto eq = pair.find('=');
            std::string name(pair.substr(0, eq));
            std::string value = eq == std::string_view::npos ? "" : std::string(pair.substr(eq + 1));
            std::replace(name.begin(), name.end(), '+', ' ');
            std::replace(value.begin(), value.end(), '+', ' ');
            params.push_back({percent_decode(name), percent_decode(value)});
        }
        pos = amp + 1;
    }
    return params;
}

std::vector<std::string> split_path(std::string_view raw_path) {
    std::vector<std::string> segments;
    if (raw_path.empty() || raw_path == "/") return segments;
    std::string_view rest = raw_path;
    if (rest.front() == '/') rest.remove_prefix(1);
    std::size_t pos = 0;
    while (true) {
        auto slash = rest.find('/', pos);
        if (slash == std::string_view::npos) {
            segments.push_back(percent_decode(rest.substr(pos)));
            break;
        }
        segments.push_back(percent_decode(rest.substr(pos, slash - pos)));
        pos = slash + 1;
    }
    return segments;
}

std::string remove_dot_segments(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t pos = path.empty() || path.front() != '/' ? 0 : 1;
    bool trailing_slash = false;
    while (pos <= path.size()) {
        auto slash = path.find('/', pos);
        if (slash == std::string_view::npos) slash = path.size();
        auto seg = path.substr(pos, slash - pos);
        trailing_slash = false;
        if (seg == "..") {
            if (!out.empty()) out.pop_back();
            trailing_slash = true;
        } else if (seg == ".") {
            trailing_slash = true;
        } else {
            out.push_back(seg);
        }
        pos = slash + 1;
    }
    std::string result;
    for (auto seg : out) {
        result += '/';
        result += seg;
    }
    if (trailing_slash || result.empty()) result += '/';
    return result;
}

} // namespace

std::string percent_decode(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            int hi = hex_value(s[i + 1]);
            int lo = hex_value(s[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out += static_cast<char>(hi * 16 + lo);
                i += 2;
                continue;
            }
        }
        out += s[i];
    }
    return out;
}

std::string ParsedUrl::origin() const {
    std::string out = scheme + "://" + host;
    if (explicit_port && port != default_port(scheme)) out += ":" + std::to_string(port);
    return out;
}

std::string ParsedUrl::target() const {
    std::string out = raw_path.empty() ? "/" : raw_path;
    if (has_query) out += "?" + raw_query;
    return out;
}

std::string ParsedUrl::str() const {
    std::string out = origin() + raw_path;
    if (has_query) out += "?" + raw_query;
    if (fragment) out += "#" + *fragment;
    return out;
}

ParsedUrl parse_url(std::string_view raw) {
    auto sep = raw.find("://");
    if (sep == std::string_view::npos || sep == 0) {
        throw MalformedUrl("missing scheme: " + std::string(raw));
    }
    ParsedUrl url;
    url.scheme = to_lower(raw.substr(0, sep));
    if (url.scheme != "http" && url.scheme != "https") {
        throw MalformedUrl("unsupported scheme: " + url.scheme);
    }
    auto rest = raw.substr(sep + 3);
    auto auth_end = rest.find_first_of("/?#");
    auto authority = rest.substr(0, auth_end);
    rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

    if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);

    std::string_view host_part = authority;
    std::string_view port_part;
    if (!authority.empty() && authority.front() == '[') {
        auto close = authority.find(']');
        if (close == std::string_view::npos) throw MalformedUrl("unterminated IPv6 host");
        host_part = authority.substr(0, close + 1);
        if (close + 1 < authority.size()) {
            if (authority[close + 1] != ':') throw MalformedUrl("junk after IPv6 host");
            port_part = authority.substr(close + 2);
        }
    } else if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
        host_part = authority.substr(0, colon);
        port_part = authority.substr(colon + 1);
    }
    if (host_part.empty()) throw MalformedUrl("empty host: " + std::string(raw));
    if (host_part.front() != '[' &&
        !std::all_of(host_part.begin(), host_part.end(), valid_host_char)) {
        throw MalformedUrl("invalid host: " + std::string(host_part));
    }
    url.host = to_lower(host_part);
    url.port = default_port(url.scheme);
    if (!port_part.empty()) {
        if (port_part.size() > 5 ||
            !std::all_of(port_part.begin(), port_part.end(),
                         [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            throw MalformedUrl("invalid port: " + std::string(port_part));
        }
        url.port = std::stoi(std::string(port_part));
        if (url.port <= 0 || url.port > 65535) throw MalformedUrl("port out of range");
        url.explicit_port = true;
    }

    auto hash = rest.find('#');
    if (hash != std::string_view::npos) {
        url.fragment = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    auto qmark = rest.find('?');
    if (qmark != std::string_view::npos) {
        url.has_query = true;
        url.raw_query = std::string(rest.substr(qmark + 1));
        rest = rest.substr(0, qmark);
    }
    url.raw_path = rest.empty() ? "/" : std::string(rest);
    url.path_segments = split_path(url.raw_path);
    url.query_params = parse_query(url.raw_query);
    return url;
}

std::optional<ParsedUrl> resolve_url(const ParsedUrl& base, std::string_view href) {
    while (!href.empty() && std::isspace(static_cast<unsigned char>(href.front()))) href.remove_prefix(1);
    while (!href.empty() && std::isspace(static_cast<unsigned char>(href.back()))) href.remove_suffix(1);
    if (href.empty()) return std::nullopt;

    try {
        auto colon = href.find(':');
        auto first_delim = href.find_first_of("/?#");
        if (colon != std::string_view::npos && (first_delim == std::string_view::npos || colon < first_delim)) {
            auto scheme = to_lower(href.substr(0, colon));
            if (scheme != "http" && scheme != "https") return std::nullopt;
            return parse_url(href);
        }
        if (href.starts_with("//")) return parse_url(base.scheme + ":" + std::string(href));

        std::string prefix = base.origin();
        std::string base_path = base.raw_path.empty() ? "/" : base.raw_path;
        if (href.front() == '#') return parse_url(prefix + base.target() + std::string(href));
        if (href.front() == '?') return parse_url(prefix + base_path + std::string(href));

        auto tail_pos = std::min(href.find_first_of("?#"), href.size());
        auto path = std::string(href.substr(0, tail_pos));
        if (path.front() != '/') path = base_path.substr(0, base_path.rfind('/') + 1) + path;
        return parse_url(prefix + remove_dot_segments(path) + std::string(href.substr(tail_pos)));
    } catch (const MalformedUrl&) {
        return std::nullopt;
    }
}

std::string_view technique_name(Technique t) {
    switch (t) {
    case Technique::PathParameter: return "PathParameter";
    case Technique::EncodedNewline: return "EncodedNewline";
    case Technique::EncodedSemicolon: return "EncodedSemicolon";
    case Technique::EncodedPound: return "EncodedPound";
    case Technique::EncodedQuestion: return "EncodedQuestion";
    }
    return "?";
}

std::optional<Technique> technique_from_name(std::string_view name) {
    auto lower = to_lower(name);
    for (auto t : kAllTechniques) {
        if (to_lower(technique_name(t)) == lower) return t;
    }
    static const std::map<std::string, Technique, std::less<>> aliases = {
        {"path", Technique::PathParameter},     {"newline", Technique::EncodedNewline},
        {"semicolon", Technique::EncodedSemicolon}, {"pound", Technique::EncodedPound},
        {"question", Technique::EncodedQuestion},
    };
    if (auto it = aliases.find(lower); it != aliases.end()) return it->second;
    return std::nullopt;
}

std::string_view technique_separator(Technique t) {
    switch (t) {
    case Technique::PathParameter: return "/";
    case Technique::EncodedNewline: return "%0A";
    case Technique::EncodedSemicolon: return "%3B";
    case Technique::EncodedPound: return "%23";
    case Technique::EncodedQuestion: return "%3F";
    }
    return "/";
}

AttackUrl make_attack_url(const ParsedUrl& base, Technique technique, std::string random_name,
                          std::string extension, AttackOptions options) {
    AttackUrl attack;
    attack.base = base;
    attack.technique = technique;
    attack.random_name = std::move(random_name);
    attack.extension = std::move(extension);

    std::string path = base.raw_path;
    // A path ending in '/' would make PathParameter produce "//name.css".
    if (technique == Technique::PathParameter && !path.empty() && path.back() == '/') path.pop_back();
    if (technique != Technique::PathParameter && path.empty()) path = "/";

    attack.rendered = base.origin() + path + std::string(technique_separator(technique));
    if (technique == Technique::EncodedQuestion && options.embedded_query_param) attack.rendered += "name=val";
    attack.rendered += attack.random_name + "." + attack.extension;
    return attack;
}

NonceGenerator::NonceGenerator(std::uint64_t seed) : rng_(seed) {}

std::string NonceGenerator::next() {
    static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::lock_guard lock(mu_);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    while (true) {
        std::string name(kLength, ' ');
        for (auto& c : name) c = alphabet[pick(rng_)];
        if (issued_.insert(name).second) return name;
    }
}

std::string UrlGroupKey::str() const {
    std::string out = host + abstract_path;
    if (!param_names.empty()) {
        out += '?';
        for (std::size_t i = 0; i < param_names.size(); ++i) {
            if (i) out += '&';
            out += param_names[i];
        }
    }
    return out;
}

bool is_numeric_segment(std::string_view segment) {
    return !segment.empty() &&
           std::all_of(segment.begin(), segment.end(), [](char c) { return c >= '0' && c <= '9'; });
}

UrlGroupKey group_key(const ParsedUrl& url) {
    UrlGroupKey key;
    key.host = url.host;
    for (const auto& seg : url.path_segments) {
        key.abstract_path += '/';
        key.abstract_path += is_numeric_segment(seg) ? std::string(kNumericPlaceholder) : seg;
    }
    if (key.abstract_path.empty()) key.abstract_path = "/";
    for (const auto& p : url.query_params) key.param_names.push_back(p.name);
    std::sort(key.param_names.begin(), key.param_names.end());
    key.param_names.erase(std::unique(key.param_names.begin(), key.param_names.end()), key.param_names.end());
    return key;
}

ParsedUrl abstract_url(const ParsedUrl& url) {
    ParsedUrl out = url;
    std::string raw;
    for (auto& seg : out.path_segments) {
        if (is_numeric_segment(seg)) seg = std::string(kNumericPlaceholder);
        raw += '/';
        raw += seg;
    }
    out.raw_path = raw.empty() ? url.raw_path : raw;
    out.raw_query.clear();
    for (std::size_t i = 0; i < out.query_params.size(); ++i) {
        out.query_params[i].value.clear();
        if (i) out.raw_query += '&';
        out.raw_query += out.query_params[i].name + "=";
    }
    return out;
}

std::vector<ParsedUrl> select_representatives(const std::vector<ParsedUrl>& urls, std::uint64_t seed) {
    std::vector<UrlGroupKey> order;
    std::map<UrlGroupKey, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < urls.size(); ++i) {
        auto key = group_key(urls[i]);
        auto [it, inserted] = members.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::vector<ParsedUrl> reps;
    reps.reserve(order.size());
    for (const auto& key : order) {
        const auto& idx = members[key];
        std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
        reps.push_back(urls[idx[pick(rng)]]);
    }
    return reps;
}

std::string registrable_domain(std::string_view host) {
    static const std::set<std::string, std::less<>> multi_label_suffixes = {
        "co.uk",  "org.uk", "ac.uk",  "gov.uk", "me.uk",  "com.au", "net.au", "org.au", "edu.au",
        "co.jp",  "ne.jp",  "or.jp",  "ac.jp",  "com.br", "net.br", "com.cn", "net.cn", "org.cn",
        "co.in",  "net.in", "co.kr",  "or.kr",  "com.mx", "co.nz",  "com.tr", "com.tw", "co.za",
        "com.sg", "com.hk", "com.ar", "co.id",  "com.my", "com.ph", "com.vn", "com.ua", "co.il",
    };
    std::string h = to_lower(host);
    if (!h.empty() && h.back() == '.') h.pop_back();
    if (h.empty() || h.front() == '[') return h;
    if (std::all_of(h.begin(), h.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; }))
        return h;

    std::vector<std::size_t> dots;
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] == '.') dots.push_back(i);
    if (dots.empty()) return h;
    std::size_t labels = 2;
    if (dots.size() >= 2) {
        auto last_two = std::string_view(h).substr(dots[dots.size() - 2] + 1);
        if (multi_label_suffixes.contains(last_two)) labels = 3;
    }
    if (dots.size() < labels) return h;
    return h.substr(dots[dots.size() - labels] + 1);
}

} // namespace wcd
