#include "wcd/reporting.h"

#include "wcd/cache_policy.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace wcd {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool pattern_matches(const Headers& headers, const std::pair<std::string, std::string>& pattern) {
    const auto& [name, needle] = pattern;
    const bool prefix = !name.empty() && name.back() == '*';
    const auto stem = prefix ? name.substr(0, name.size() - 1) : name;
    for (const auto& [k, v] : headers) {
        auto key = lower(k);
        if (prefix ? key.rfind(stem, 0) != 0 : key != stem) continue;
        if (needle.empty() || lower(v).find(needle) != std::string::npos) return true;
    }
    return false;
}

std::string status_class(int status) {
    if (status < 100 || status > 599) return "other";
    return std::to_string(status / 100) + "xx";
}

bool is_encoded(Technique t) { return t != Technique::PathParameter; }

std::size_t pick(const Triple& t, Granularity g) {
    switch (g) {
    case Granularity::Pages: return t.pages;
    case Granularity::Domains: return t.domains;
    case Granularity::Sites: return t.sites;
    }
    return 0;
}

std::string pct(std::size_t part, std::size_t whole) {
    if (whole == 0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * static_cast<double>(part) / static_cast<double>(whole));
    return buf;
}

class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
    void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
    void rule() { rules_.push_back(rows_.size()); }

    std::string str() const {
        std::vector<std::size_t> width;
        for (const auto& r : rows_) {
            width.resize(std::max(width.size(), r.size()));
            for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
        }
        std::size_t total = 0;
        for (auto w : width) total += w + 2;
        std::ostringstream out;
        auto line = [&] { out << std::string(total, '-') << '\n'; };
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            if (std::find(rules_.begin(), rules_.end(), r) != rules_.end()) line();
            for (std::size_t i = 0; i < rows_[r].size(); ++i) {
                const auto& cell = rows_[r][i];
                auto pad = std::string(width[i] - cell.size(), ' ');
                out << (i == 0 ? cell + pad : pad + cell) << (i + 1 < rows_[r].size() ? "  " : "");
            }
            out << '\n';
            if (r == 0) line();
        }
        return out.str();
    }

private:
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> rules_;
};

std::vector<std::string> triple_cells(const Triple& t, const Triple& of) {
    return {std::to_string(t.pages), pct(t.pages, of.pages), std::to_string(t.domains), pct(t.domains, of.domains),
            std::to_string(t.sites), pct(t.sites, of.sites)};
}

const std::vector<std::string> kTripleHeader{"Pages", "%", "Domains", "%", "Sites", "%"};

std::vector<std::string> with_label(std::string label, std::vector<std::string> cells) {
    cells.insert(cells.begin(), std::move(label));
    return cells;
}

std::string triple_table(const std::string& title, const std::map<std::string, TargetSet>& cells, const Triple& of) {
    auto header = kTripleHeader;
    header.insert(header.begin(), title);
    TextTable t(header);
    for (const auto& [k, v] : cells) t.row(with_label(k, triple_cells(v.counts(), of)));
    return t.str();
}

} // namespace

const std::vector<CdnFingerprint>& default_fingerprints() {
    static const std::vector<CdnFingerprint> table = {
        {"Cloudflare", {{"cf-ray", ""}, {"cf-cache-status", ""}, {"server", "cloudflare"}}},
        {"Akamai", {{"server", "akamaighost"}, {"x-akamai-*", ""}, {"akamai-grn", ""}}},
        {"CloudFront", {{"x-amz-cf-id", ""}, {"x-amz-cf-pop", ""}, {"via", "cloudfront"}}},
        {"Fastly", {{"x-served-by", "cache-"}, {"x-fastly-request-id", ""}, {"fastly-debug-digest", ""}}},
        {std::string(kOtherCdn), {{"x-cache", ""}, {"x-cache-status", ""}, {"x-cdn", ""}, {"x-edge-location", ""}}},
    };
    return table;
}

std::vector<CdnFingerprint> load_fingerprints(const nlohmann::json& j) {
    if (!j.is_array()) throw ConfigError("fingerprints must be an array");
    std::vector<CdnFingerprint> out;
    for (const auto& entry : j) {
        CdnFingerprint f;
        f.vendor = entry.at("vendor").get<std::string>();
        for (const auto& p : entry.at("patterns")) {
            f.header_patterns.emplace_back(lower(p.at(0).get<std::string>()), lower(p.at(1).get<std::string>()));
        }
        if (f.vendor.empty() || f.header_patterns.empty())
            throw ConfigError("fingerprint needs a vendor and at least one pattern");
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<std::string> cdn_label(const Headers& headers, const std::vector<CdnFingerprint>& fingerprints) {
    std::vector<std::string> out;
    const CdnFingerprint* other = nullptr;
    for (const auto& f : fingerprints) {
        if (f.vendor == kOtherCdn) {
            other = &f;
            continue;
        }
        if (std::any_of(f.header_patterns.begin(), f.header_patterns.end(),
                        [&](const auto& p) { return pattern_matches(headers, p); }))
            out.push_back(f.vendor);
    }
    if (out.empty() && other &&
        std::any_of(other->header_patterns.begin(), other->header_patterns.end(),
                    [&](const auto& p) { return pattern_matches(headers, p); }))
        out.push_back(other->vendor);
    return out;
}

std::vector<std::string> cdn_label(const HttpExchange& exchange, const std::vector<CdnFingerprint>& fingerprints) {
    return cdn_label(exchange.response_headers, fingerprints);
}

double chi_square_df1_sf(double x) {
    if (!(x > 0)) return 1.0;
    return std::erfc(std::sqrt(x / 2.0));
}

ChiSquare chi_square_2x2(long long a, long long b, long long c, long long d) {
    if (a < 0 || b < 0 || c < 0 || d < 0) throw std::invalid_argument("counts must be non-negative");
    const double r1 = static_cast<double>(a + b), r2 = static_cast<double>(c + d);
    const double c1 = static_cast<double>(a + c), c2 = static_cast<double>(b + d);
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) throw DegenerateTable("2x2 table has an empty row or column");
    const double n = r1 + r2;
    const double cross = static_cast<double>(a) * static_cast<double>(d) - static_cast<double>(b) * static_cast<double>(c);
    ChiSquare out;
    out.statistic = n * cross * cross / (r1 * r2 * c1 * c2);
    out.p_value = chi_square_df1_sf(out.statistic);
    return out;
}

void TargetSet::add(const std::string& page, const std::string& domain, const std::string& site) {
    pages_.insert(page);
    domains_.insert(domain);
    sites_.insert(site);
}

void TargetSet::merge(const TargetSet& other) {
    pages_.insert(other.pages_.begin(), other.pages_.end());
    domains_.insert(other.domains_.begin(), other.domains_.end());
    sites_.insert(other.sites_.begin(), other.sites_.end());
}

Triple TargetSet::minus(const TargetSet& other) const {
    auto diff = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        return static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [&](const auto& x) { return !b.contains(x); }));
    };
    return {diff(pages_, other.pages_), diff(domains_, other.domains_), diff(sites_, other.sites_)};
}

TargetSet AggregateStats::all_encoded() const {
    TargetSet out;
    for (const auto& [t, set] : vulnerable_by_technique) {
        if (is_encoded(t)) out.merge(set);
    }
    return out;
}

std::array<std::array<Triple, 5>, 6> AggregateStats::uniqueness() const {
    std::array<std::array<Triple, 5>, 6> m{};
    static const TargetSet empty;
    auto set_for = [&](Technique t) -> const TargetSet& {
        auto it = vulnerable_by_technique.find(t);
        return it == vulnerable_by_technique.end() ? empty : it->second;
    };
    auto encoded = all_encoded();
    for (std::size_t j = 0; j < kAllTechniques.size(); ++j) {
        const auto& vj = set_for(kAllTechniques[j]);
        for (std::size_t i = 0; i < kAllTechniques.size(); ++i) {
            if (i != j) m[i][j] = set_for(kAllTechniques[i]).minus(vj);
        }
        m[5][j] = encoded.minus(vj);
    }
    return m;
}

SiteMap default_site_map(const std::vector<ScanVerdict>& verdicts) {
    SiteMap map;
    for (const auto& v : verdicts) map.emplace(v.domain, registrable_domain(v.domain));
    return map;
}

AggregateStats aggregate(const std::vector<ScanVerdict>& verdicts, const SiteMap& site_map) {
    AggregateStats s;
    for (const auto& v : verdicts) {
        ++s.verdicts;
        auto site_it = site_map.find(v.domain);
        if (site_it == site_map.end()) {
            s.quarantined.push_back("unmapped domain '" + v.domain + "' for " + v.page);
            continue;
        }
        if (v.status == VerdictStatus::Inconclusive) {
            ++s.inconclusive;
            continue;
        }
        const auto& site = site_it->second;
        auto add = [&](TargetSet& set) { set.add(v.page, v.domain, site); };

        add(s.tested);
        add(s.tested_by_technique[v.technique]);
        for (const auto& cdn : v.cdn_vendors) add(s.tested_by_cdn[cdn]);
        if (!v.vulnerable) continue;

        add(s.vulnerable);
        add(s.vulnerable_by_technique[v.technique]);
        auto& split = s.by_technique_status[v.technique];
        add(v.attacker_status == 200 ? split.first : split.second);
        add(s.by_status_class[status_class(v.attacker_status)]);
        add(s.by_cache_control[v.cache_control_shape.empty() ? "(none)" : v.cache_control_shape]);
        if (v.has_expires) add(s.with_expires);
        if (v.pragma_no_cache) add(s.with_pragma_no_cache);
        for (const auto& cdn : v.cdn_vendors) add(s.vulnerable_by_cdn[cdn]);
        const bool markers = !v.markers_leaked.empty();
        const bool secrets = !v.secrets.empty();
        add(s.by_leak[markers && secrets ? "both" : markers ? "markers" : "secrets"]);
        if (v.unauth_exploitable) add(s.unauth_exploitable);
    }
    return s;
}

nlohmann::json verdict_to_json(const ScanVerdict& v) {
    nlohmann::json secrets = nlohmann::json::array();
    for (const auto& c : v.secrets) {
        secrets.push_back({{"name", c.name},
                           {"value", c.value},
                           {"source", source_name(c.source)},
                           {"trigger", trigger_name(c.trigger)},
                           {"entropy", c.entropy_bits_per_char},
                           {"residual_length", c.residual_length}});
    }
    nlohmann::json evidence = nlohmann::json::object();
    for (const auto& [k, val] : v.cache_evidence) evidence[k] = val;
    return {{"type", "verdict"},
            {"page", v.page},
            {"domain", v.domain},
            {"technique", technique_name(v.technique)},
            {"attack_url", v.attack_url},
            {"status", v.status == VerdictStatus::Complete ? "complete" : "inconclusive"},
            {"error", v.error},
            {"victim_status", v.victim_status},
            {"attacker_status", v.attacker_status},
            {"unauth_status", v.unauth_status},
            {"markers_leaked", v.markers_leaked},
            {"secrets", secrets},
            {"responses_identical", v.responses_identical},
            {"vulnerable", v.vulnerable},
            {"unauth_exploitable", v.unauth_exploitable},
            {"cache_control", v.cache_control_shape},
            {"expires", v.has_expires},
            {"pragma_no_cache", v.pragma_no_cache},
            {"cache_evidence", evidence},
            {"cdn", v.cdn_vendors}};
}

ScanVerdict verdict_from_json(const nlohmann::json& j) {
    ScanVerdict v;
    v.page = j.at("page").get<std::string>();
    v.domain = j.at("domain").get<std::string>();
    auto t = technique_from_name(j.at("technique").get<std::string>());
    if (!t) throw ConfigError("unknown technique in verdict record");
    v.technique = *t;
    v.attack_url = j.value("attack_url", "");
    v.status = j.value("status", "complete") == "inconclusive" ? VerdictStatus::Inconclusive : VerdictStatus::Complete;
    v.error = j.value("error", "");
    v.victim_status = j.value("victim_status", 0);
    v.attacker_status = j.value("attacker_status", 0);
    v.unauth_status = j.value("unauth_status", 0);
    v.markers_leaked = j.value("markers_leaked", std::vector<std::string>{});
    const auto secrets = j.value("secrets", nlohmann::json::array());
    for (const auto& c : secrets) {
        SecretCandidate s;
        s.name = c.value("name", "");
        s.value = c.value("value", "");
        auto source = c.value("source", "");
        for (auto src : {SecretSource::HiddenFormField, SecretSource::AnchorQueryString,
                         SecretSource::InlineScriptVariable, SecretSource::ScriptFileName}) {
            if (source_name(src) == source) s.source = src;
        }
        s.trigger = c.value("trigger", "") == "EntropyMatch" ? SecretTrigger::EntropyMatch : SecretTrigger::KeywordMatch;
        s.entropy_bits_per_char = c.value("entropy", 0.0);
        s.residual_length = c.value("residual_length", std::size_t{0});
        v.secrets.push_back(std::move(s));
    }
    v.responses_identical = j.value("responses_identical", false);
    v.vulnerable = j.value("vulnerable", false);
    v.unauth_exploitable = j.value("unauth_exploitable", false);
    v.cache_control_shape = j.value("cache_control", "");
    v.has_expires = j.value("expires", false);
    v.pragma_no_cache = j.value("pragma_no_cache", false);
    const auto evidence = j.value("cache_evidence", nlohmann::json::object());
    for (const auto& [k, val] : evidence.items()) v.cache_evidence.emplace_back(k, val.get<std::string>());
    v.cdn_vendors = j.value("cdn", std::vector<std::string>{});
    return v;
}

std::vector<ScanVerdict> read_verdict_records(std::string_view jsonl) {
    std::vector<ScanVerdict> out;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("record " + std::to_string(lineno) + ": " + e.what());
        }
        if (j.value("type", "verdict") != "verdict") continue;
        try {
            out.push_back(verdict_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("record " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

namespace {

nlohmann::json triple_json(const Triple& t) { return {{"pages", t.pages}, {"domains", t.domains}, {"sites", t.sites}}; }

nlohmann::json map_json(const std::map<std::string, TargetSet>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) j[k] = triple_json(v.counts());
    return j;
}

} // namespace

nlohmann::json stats_to_json(const AggregateStats& stats) {
    nlohmann::json techniques = nlohmann::json::object();
    for (auto t : kAllTechniques) {
        auto tested = stats.tested_by_technique.contains(t) ? stats.tested_by_technique.at(t).counts() : Triple{};
        auto vuln = stats.vulnerable_by_technique.contains(t) ? stats.vulnerable_by_technique.at(t).counts() : Triple{};
        nlohmann::json row = {{"tested", triple_json(tested)}, {"vulnerable", triple_json(vuln)}};
        if (auto it = stats.by_technique_status.find(t); it != stats.by_technique_status.end()) {
            row["status_200"] = triple_json(it->second.first.counts());
            row["status_other"] = triple_json(it->second.second.counts());
        }
        techniques[std::string(technique_name(t))] = row;
    }
    nlohmann::json matrix = nlohmann::json::object();
    auto m = stats.uniqueness();
    for (std::size_t i = 0; i < m.size(); ++i) {
        auto row_name = i < kAllTechniques.size() ? std::string(technique_name(kAllTechniques[i])) : std::string(kAllEncoded);
        for (std::size_t j = 0; j < kAllTechniques.size(); ++j)
            matrix[row_name][std::string(technique_name(kAllTechniques[j]))] = triple_json(m[i][j]);
    }
    return {{"type", "summary"},
            {"verdicts", stats.verdicts},
            {"inconclusive", stats.inconclusive},
            {"quarantined", stats.quarantined},
            {"tested", triple_json(stats.tested.counts())},
            {"vulnerable", triple_json(stats.vulnerable.counts())},
            {"all_encoded", triple_json(stats.all_encoded().counts())},
            {"techniques", techniques},
            {"uniqueness", matrix},
            {"status_class", map_json(stats.by_status_class)},
            {"cache_control", map_json(stats.by_cache_control)},
            {"expires", triple_json(stats.with_expires.counts())},
            {"pragma_no_cache", triple_json(stats.with_pragma_no_cache.counts())},
            {"cdn_tested", map_json(stats.tested_by_cdn)},
            {"cdn_vulnerable", map_json(stats.vulnerable_by_cdn)},
            {"leak", map_json(stats.by_leak)},
            {"unauth_exploitable", triple_json(stats.unauth_exploitable.counts())}};
}

std::string redact_host(std::string_view host) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (unsigned char c : host) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "site-%08llx", static_cast<unsigned long long>(h & 0xffffffffULL));
    return buf;
}

ScanVerdict redact(ScanVerdict v) {
    auto scrub = [&](std::string& text) {
        for (const auto& host : {v.domain, registrable_domain(v.domain)}) {
            if (host.empty()) continue;
            auto alias = redact_host(host);
            for (auto pos = text.find(host); pos != std::string::npos; pos = text.find(host, pos + alias.size()))
                text.replace(pos, host.size(), alias);
        }
    };
    scrub(v.page);
    scrub(v.attack_url);
    for (auto& s : v.secrets) s.value = "<redacted>";
    v.domain = redact_host(v.domain);
    return v;
}

std::string render_table(const AggregateStats& stats, const ReportOptions& options) {
    std::ostringstream out;
    const auto total = stats.vulnerable.counts();

    out << "Vulnerable targets by technique\n";
    {
        auto header = kTripleHeader;
        header.insert(header.begin(), "Technique");
        TextTable t(header);
        for (auto tech : kAllTechniques) {
            auto it = stats.vulnerable_by_technique.find(tech);
            t.row(with_label(std::string(technique_name(tech)),
                             triple_cells(it == stats.vulnerable_by_technique.end() ? Triple{} : it->second.counts(), total)));
        }
        t.rule();
        t.row(with_label(std::string(kAllEncoded), triple_cells(stats.all_encoded().counts(), total)));
        t.row(with_label(std::string(kTotal), triple_cells(total, total)));
        out << t.str() << '\n';
    }

    out << "Tested targets\n";
    {
        TextTable t({"", "Pages", "Domains", "Sites"});
        auto row = [&](const std::string& label, const Triple& c) {
            t.row({label, std::to_string(c.pages), std::to_string(c.domains), std::to_string(c.sites)});
        };
        row("Tested", stats.tested.counts());
        row("Vulnerable", total);
        row("Unauthenticated", stats.unauth_exploitable.counts());
        out << t.str();
        out << "verdicts " << stats.verdicts << ", inconclusive " << stats.inconclusive << ", quarantined "
            << stats.quarantined.size() << "\n\n";
    }

    out << "Exploitable by the row technique and not the column technique (pages / domains / sites)\n";
    {
        std::vector<std::string> header{""};
        for (auto tech : kAllTechniques) header.emplace_back(technique_name(tech));
        TextTable t(header);
        auto m = stats.uniqueness();
        for (std::size_t i = 0; i < m.size(); ++i) {
            std::vector<std::string> cells{i < kAllTechniques.size() ? std::string(technique_name(kAllTechniques[i]))
                                                                    : std::string(kAllEncoded)};
            if (i == kAllTechniques.size()) t.rule();
            for (std::size_t j = 0; j < kAllTechniques.size(); ++j) {
                if (i == j) {
                    cells.emplace_back("-");
                    continue;
                }
                cells.push_back(std::to_string(pick(m[i][j], Granularity::Pages)) + " / " +
                                std::to_string(pick(m[i][j], Granularity::Domains)) + " / " +
                                std::to_string(pick(m[i][j], Granularity::Sites)));
            }
            t.row(std::move(cells));
        }
        out << t.str() << '\n';
    }

    out << "Attacker response status\n";
    {
        TextTable t({"Technique", "200 Pages", "200 Domains", "200 Sites", "!200 Pages", "!200 Domains", "!200 Sites"});
        for (auto tech : kAllTechniques) {
            auto it = stats.by_technique_status.find(tech);
            Triple ok, other;
            if (it != stats.by_technique_status.end()) {
                ok = it->second.first.counts();
                other = it->second.second.counts();
            }
            t.row({std::string(technique_name(tech)), std::to_string(ok.pages), std::to_string(ok.domains),
                   std::to_string(ok.sites), std::to_string(other.pages), std::to_string(other.domains),
                   std::to_string(other.sites)});
        }
        out << t.str() << '\n';
        out << triple_table("Status class", stats.by_status_class, total) << '\n';
    }

    out << triple_table("Cache-Control", stats.by_cache_control, total);
    {
        TextTable t({"Header", "Pages", "Domains", "Sites"});
        auto e = stats.with_expires.counts(), p = stats.with_pragma_no_cache.counts();
        t.row({"Expires", std::to_string(e.pages), std::to_string(e.domains), std::to_string(e.sites)});
        t.row({"Pragma: no-cache", std::to_string(p.pages), std::to_string(p.domains), std::to_string(p.sites)});
        out << t.str() << '\n';
    }

    {
        TextTable t({"CDN", "Tested Domains", "Tested Sites", "Vulnerable Domains", "Vulnerable Sites"});
        std::set<std::string> vendors;
        for (const auto& [k, v] : stats.tested_by_cdn) vendors.insert(k);
        for (const auto& vendor : vendors) {
            auto tested = stats.tested_by_cdn.at(vendor).counts();
            auto it = stats.vulnerable_by_cdn.find(vendor);
            auto vuln = it == stats.vulnerable_by_cdn.end() ? Triple{} : it->second.counts();
            t.row({vendor, std::to_string(tested.domains), std::to_string(tested.sites), std::to_string(vuln.domains),
                   std::to_string(vuln.sites)});
        }
        out << t.str() << '\n';
    }

    out << triple_table("Leak", stats.by_leak, total) << '\n';

    out << "Vulnerable sites\n";
    for (const auto& site : stats.vulnerable.sites()) out << "  " << (options.redact ? redact_host(site) : site) << '\n';
    if (!stats.quarantined.empty()) {
        out << "Quarantined\n";
        for (const auto& q : stats.quarantined) out << "  " << q << '\n';
    }
    return out.str();
}

std::string render_records(const std::vector<ScanVerdict>& verdicts, const AggregateStats& stats,
                           const ReportOptions& options) {
    std::ostringstream out;
    for (const auto& v : verdicts) out << verdict_to_json(options.redact ? redact(v) : v).dump() << '\n';
    auto summary = stats_to_json(stats);
    if (options.redact) summary["quarantined"] = summary["quarantined"].size();
    out << summary.dump() << '\n';
    return out.str();
}

} // namespace wcd
