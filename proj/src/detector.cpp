#include "wcd/detector.h"

#include "wcd/cache_policy.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>
#include <stdexcept>
#include <thread>

namespace wcd {

extern const char* const kCommonEnglishWords;

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string html_unescape(std::string_view s) {
    static const std::array<std::pair<std::string_view, char>, 6> entities = {{
        {"&amp;", '&'}, {"&quot;", '"'}, {"&#39;", '\''}, {"&#x27;", '\''}, {"&lt;", '<'}, {"&gt;", '>'},
    }};
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        bool replaced = false;
        if (s[i] == '&') {
            for (const auto& [ent, ch] : entities) {
                if (s.substr(i, ent.size()) == ent) {
                    out += ch;
                    i += ent.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) out += s[i++];
    }
    return out;
}

using Attributes = std::vector<std::pair<std::string, std::string>>;

Attributes parse_attributes(const std::string& tag) {
    static const std::regex attr_re(R"re(([A-Za-z_:][-A-Za-z0-9_:.]*)\s*(?:=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'=<>`]+)))?)re");
    Attributes attrs;
    auto start = tag.find_first_of(" \t\r\n/");
    if (start == std::string::npos) return attrs;
    auto inner = tag.substr(start);
    for (std::sregex_iterator it(inner.begin(), inner.end(), attr_re), end; it != end; ++it) {
        const auto& m = *it;
        std::string value = m[2].matched ? m[2].str() : m[3].matched ? m[3].str() : m[4].str();
        attrs.emplace_back(to_lower(m[1].str()), html_unescape(value));
    }
    return attrs;
}

std::optional<std::string> attr(const Attributes& attrs, std::string_view name) {
    for (const auto& [k, v] : attrs) {
        if (k == name) return v;
    }
    return std::nullopt;
}

bool name_has_keyword(std::string_view name, const std::vector<std::string>& keywords) {
    auto lower = to_lower(name);
    return std::any_of(keywords.begin(), keywords.end(),
                       [&](const std::string& k) { return lower.find(to_lower(k)) != std::string::npos; });
}

bool looks_like_html(std::string_view body) {
    auto first = body.find_first_not_of(" \t\r\n");
    return first != std::string_view::npos && body[first] == '<';
}

} // namespace

void MarkerSet::validate() const {
    std::set<std::string> seen;
    for (const auto& m : markers) {
        if (m.value.size() < 12) throw std::invalid_argument("marker '" + m.label + "' is shorter than 12 characters");
        if (shannon_entropy(m.value) < 3.0) throw std::invalid_argument("marker '" + m.label + "' has low entropy");
        if (!seen.insert(m.value).second) throw std::invalid_argument("duplicate marker value for '" + m.label + "'");
    }
}

double shannon_entropy(std::string_view s) {
    if (s.empty()) return 0.0;
    std::array<std::size_t, 256> counts{};
    for (unsigned char c : s) ++counts[c];
    double h = 0.0;
    const double n = static_cast<double>(s.size());
    for (auto c : counts) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

Dictionary::Dictionary(const std::vector<std::string>& words) {
    for (const auto& w : words) insert(w);
}

Dictionary Dictionary::from_text(std::string_view text) {
    Dictionary d;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto word = text.substr(pos, nl - pos);
        while (!word.empty() && std::isspace(static_cast<unsigned char>(word.back()))) word.remove_suffix(1);
        d.insert(word);
        pos = nl + 1;
    }
    return d;
}

std::shared_ptr<const Dictionary> Dictionary::common_english() {
    static const auto dict = std::make_shared<const Dictionary>(from_text(kCommonEnglishWords));
    return dict;
}

void Dictionary::insert(std::string_view word) {
    auto lower = to_lower(word);
    if (lower.size() < kMinWordLength) return;
    if (!std::all_of(lower.begin(), lower.end(), [](char c) { return c >= 'a' && c <= 'z'; })) return;
    int node = 0;
    for (char c : lower) {
        int idx = c - 'a';
        if (nodes_[static_cast<std::size_t>(node)].next[static_cast<std::size_t>(idx)] < 0) {
            nodes_[static_cast<std::size_t>(node)].next[static_cast<std::size_t>(idx)] = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
        }
        node = nodes_[static_cast<std::size_t>(node)].next[static_cast<std::size_t>(idx)];
    }
    if (!nodes_[static_cast<std::size_t>(node)].terminal) ++words_;
    nodes_[static_cast<std::size_t>(node)].terminal = true;
}

std::size_t Dictionary::longest_match(std::string_view lowered, std::size_t pos) const {
    std::size_t best = 0;
    int node = 0;
    for (std::size_t i = pos; i < lowered.size(); ++i) {
        char c = lowered[i];
        if (c < 'a' || c > 'z') break;
        node = nodes_[static_cast<std::size_t>(node)].next[static_cast<std::size_t>(c - 'a')];
        if (node < 0) break;
        if (nodes_[static_cast<std::size_t>(node)].terminal) best = i - pos + 1;
    }
    return best >= kMinWordLength ? best : 0;
}

std::string Dictionary::strip(std::string_view value) const {
    auto lowered = to_lower(value);
    std::string residual;
    for (std::size_t i = 0; i < value.size();) {
        if (auto len = longest_match(lowered, i)) {
            i += len;
        } else {
            residual += value[i++];
        }
    }
    return residual;
}

void RandomnessConfig::validate() const {
    if (min_residual_length == 0) throw std::invalid_argument("min_residual_length must be positive");
    if (!(entropy_threshold_bits_per_char > 0)) throw std::invalid_argument("entropy threshold must be positive");
}

RandomnessConfig default_randomness_config() {
    RandomnessConfig c;
    c.dictionary = Dictionary::common_english();
    return c;
}

RandomnessScore randomness_score(std::string_view value, const RandomnessConfig& config) {
    RandomnessScore score;
    score.residual = config.dictionary ? config.dictionary->strip(value) : std::string(value);
    score.residual_length = score.residual.size();
    score.entropy_bits_per_char = shannon_entropy(score.residual);
    return score;
}

std::string_view source_name(SecretSource s) {
    switch (s) {
    case SecretSource::HiddenFormField: return "HiddenFormField";
    case SecretSource::AnchorQueryString: return "AnchorQueryString";
    case SecretSource::InlineScriptVariable: return "InlineScriptVariable";
    case SecretSource::ScriptFileName: return "ScriptFileName";
    }
    return "?";
}

std::string_view trigger_name(SecretTrigger t) {
    return t == SecretTrigger::KeywordMatch ? "KeywordMatch" : "EntropyMatch";
}

std::vector<std::string> extract_markers(std::string_view body, const MarkerSet& markers) {
    std::vector<std::string> labels;
    for (const auto& m : markers.markers) {
        if (!m.value.empty() && body.find(m.value) != std::string_view::npos) labels.push_back(m.label);
    }
    return labels;
}

std::vector<SecretCandidate> extract_secrets(std::string_view body_view, const RandomnessConfig& config) {
    static const std::regex input_re(R"(<input\b[^>]*>)", std::regex::icase);
    static const std::regex anchor_re(R"(<a\b[^>]*>)", std::regex::icase);
    static const std::regex script_re(R"(<script\b([^>]*)>([\s\S]*?)</script\s*>)", std::regex::icase);
    static const std::regex assign_re(R"re(([A-Za-z_$][\w$]*)\s*[:=]\s*(["'`])([^"'`\r\n]*)\2)re");

    const std::string body(body_view);
    std::vector<SecretCandidate> out;
    auto consider = [&](std::string name, std::string value, SecretSource source) {
        if (value.empty()) return;
        auto score = randomness_score(value, config);
        SecretCandidate c{std::move(name), std::move(value), source, SecretTrigger::KeywordMatch,
                          score.entropy_bits_per_char, score.residual_length};
        if (name_has_keyword(c.name, config.keywords)) {
            c.trigger = SecretTrigger::KeywordMatch;
        } else if (score.residual_length >= config.min_residual_length &&
                   score.entropy_bits_per_char >= config.entropy_threshold_bits_per_char) {
            c.trigger = SecretTrigger::EntropyMatch;
        } else {
            return;
        }
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
    };
    auto scan_script = [&](const std::string& text) {
        for (std::sregex_iterator it(text.begin(), text.end(), assign_re), end; it != end; ++it) {
            consider((*it)[1].str(), (*it)[3].str(), SecretSource::InlineScriptVariable);
        }
    };

    if (!looks_like_html(body)) {
        scan_script(body);
        return out;
    }

    for (std::sregex_iterator it(body.begin(), body.end(), input_re), end; it != end; ++it) {
        auto attrs = parse_attributes(it->str());
        if (to_lower(attr(attrs, "type").value_or("")) != "hidden") continue;
        consider(attr(attrs, "name").value_or(attr(attrs, "id").value_or("")), attr(attrs, "value").value_or(""),
                 SecretSource::HiddenFormField);
    }
    for (std::sregex_iterator it(body.begin(), body.end(), anchor_re), end; it != end; ++it) {
        auto href = attr(parse_attributes(it->str()), "href");
        if (!href) continue;
        auto q = href->find('?');
        if (q == std::string::npos) continue;
        auto query = href->substr(q + 1);
        if (auto hash = query.find('#'); hash != std::string::npos) query.erase(hash);
        std::size_t pos = 0;
        while (pos <= query.size()) {
            auto amp = query.find('&', pos);
            if (amp == std::string::npos) amp = query.size();
            auto pair = query.substr(pos, amp - pos);
            auto eq = pair.find('=');
            if (eq != std::string::npos) consider(percent_decode(pair.substr(0, eq)), percent_decode(pair.substr(eq + 1)), SecretSource::AnchorQueryString);
            pos = amp + 1;
        }
    }
    for (std::sregex_iterator it(body.begin(), body.end(), script_re), end; it != end; ++it) {
        auto attrs = parse_attributes("<script" + (*it)[1].str() + ">");
        if (auto src = attr(attrs, "src")) {
            auto path = src->substr(0, src->find_first_of("?#"));
            auto file = path.substr(path.rfind('/') == std::string::npos ? 0 : path.rfind('/') + 1);
            auto stem = file.substr(0, file.rfind('.'));
            consider(file, stem, SecretSource::ScriptFileName);
        } else {
            scan_script((*it)[2].str());
        }
    }
    return out;
}

std::string normalize_body(std::string_view body, const std::vector<std::string>& nonces) {
    static const std::regex date_re(
        R"((Mon|Tue|Wed|Thu|Fri|Sat|Sun), \d{2} (Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec) \d{4} \d{2}:\d{2}:\d{2} GMT)");
    std::string out(body);
    for (const auto& nonce : nonces) {
        if (nonce.empty()) continue;
        std::string cleaned;
        std::size_t pos = 0;
        for (auto hit = out.find(nonce); hit != std::string::npos; hit = out.find(nonce, pos)) {
            cleaned.append(out, pos, hit - pos);
            pos = hit + nonce.size();
        }
        cleaned.append(out, pos);
        out = std::move(cleaned);
    }
    if (out.find(" GMT") != std::string::npos) out = std::regex_replace(out, date_re, "");
    return out;
}

bool responses_identical(const HttpExchange& a, const HttpExchange& b, const std::vector<std::string>& nonces) {
    if (a.body == b.body) return true;
    return normalize_body(a.body, nonces) == normalize_body(b.body, nonces);
}

void sleep_delay(const ParsedUrl&, long long seconds) {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::seconds(seconds));
}

ScanVerdict run_wcd_test(HttpEngine& engine, const ParsedUrl& page, Technique technique, Identity& victim,
                         Identity& attacker, const MarkerSet& markers, const DetectorConfig& config,
                         NonceGenerator& nonces) {
    ScanVerdict v;
    v.page = page.str();
    v.domain = page.host;
    v.technique = technique;
    auto attack = make_attack_url(page, technique, nonces.next(), config.extension, config.attack_options);
    v.attack_url = attack.rendered;

    Identity unauthenticated{Role::Unauthenticated, {}, std::nullopt, attacker.user_agent};
    HttpExchange victim_ex, attacker_ex, unauth_ex;
    try {
        victim_ex = engine.fetch(victim, attack.rendered);
        if (config.attacker_delay_seconds > 0 && config.delay) config.delay(page, config.attacker_delay_seconds);
        attacker_ex = engine.fetch(attacker, attack.rendered);
        unauth_ex = engine.fetch(unauthenticated, attack.rendered);
    } catch (const std::exception& e) {
        v.status = VerdictStatus::Inconclusive;
        v.error = e.what();
        return v;
    }
    v.victim_status = victim_ex.status;
    v.attacker_status = attacker_ex.status;
    v.unauth_status = unauth_ex.status;

    const std::vector<std::string> nonce_list{attack.random_name};
    v.markers_leaked = extract_markers(attacker_ex.body, markers);
    v.responses_identical = responses_identical(victim_ex, attacker_ex, nonce_list);
    if (v.responses_identical || !v.markers_leaked.empty()) {
        v.secrets = extract_secrets(attacker_ex.body, config.randomness);
    }
    v.vulnerable = !v.markers_leaked.empty() || (v.responses_identical && !v.secrets.empty());
    if (v.vulnerable) {
        const bool unauth_markers = !extract_markers(unauth_ex.body, markers).empty();
        const bool unauth_same = responses_identical(victim_ex, unauth_ex, nonce_list) && !v.secrets.empty();
        v.unauth_exploitable = unauth_markers || unauth_same;
    }

    auto cache_headers = collect_cache_headers(attacker_ex.response_headers);
    if (cache_headers.cache_control) v.cache_control_shape = cache_control_shape(*cache_headers.cache_control);
    v.has_expires = cache_headers.expires.has_value();
    v.pragma_no_cache = cache_headers.pragma_no_cache;
    for (const auto& name : {"Age", "X-Cache", "CF-Cache-Status", "X-Cache-Status", "Via"}) {
        if (auto value = find_header(attacker_ex.response_headers, name)) v.cache_evidence.emplace_back(name, *value);
    }
    return v;
}

} // namespace wcd
