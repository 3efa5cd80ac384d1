// Verdict aggregation over pages, domains and sites, CDN labeling, the 2x2
// chi-square incidence test, and report rendering.

#pragma once

#include "wcd/detector.h"
#include "wcd/http_engine.h"
#include "wcd/url.h"

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wcd {

struct CdnFingerprint {
    std::string vendor;
    // (lowercase header name, lowercase substring); an empty substring means
    // the header's presence is enough. Header names ending in '*' match by
    // prefix.
    std::vector<std::pair<std::string, std::string>> header_patterns;
};

inline constexpr std::string_view kOtherCdn = "Other";

// Cloudflare, Akamai, CloudFront and Fastly, then a generic "Other" entry
// that only applies when no named vendor matched.
const std::vector<CdnFingerprint>& default_fingerprints();
// [{"vendor": "...", "patterns": [["header", "substring"], ...]}, ...]
std::vector<CdnFingerprint> load_fingerprints(const nlohmann::json& j);

std::vector<std::string> cdn_label(const Headers& headers,
                                   const std::vector<CdnFingerprint>& fingerprints = default_fingerprints());
std::vector<std::string> cdn_label(const HttpExchange& exchange,
                                   const std::vector<CdnFingerprint>& fingerprints = default_fingerprints());

class DegenerateTable : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ChiSquare {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Pearson's test on [[a, b], [c, d]] without continuity correction, df = 1.
ChiSquare chi_square_2x2(long long a, long long b, long long c, long long d);
// Survival function of the chi-square distribution with one degree of freedom.
double chi_square_df1_sf(double x);

struct Triple {
    std::size_t pages = 0;
    std::size_t domains = 0;
    std::size_t sites = 0;

    bool operator==(const Triple&) const = default;
};

// Distinct pages, domains and sites seen by one cell of a table.
class TargetSet {
public:
    void add(const std::string& page, const std::string& domain, const std::string& site);
    Triple counts() const { return {pages_.size(), domains_.size(), sites_.size()}; }
    const std::set<std::string>& pages() const { return pages_; }
    const std::set<std::string>& domains() const { return domains_; }
    const std::set<std::string>& sites() const { return sites_; }
    void merge(const TargetSet& other);
    // Items in this set and not in other, per granularity.
    Triple minus(const TargetSet& other) const;

private:
    std::set<std::string> pages_, domains_, sites_;
};

enum class Granularity { Pages, Domains, Sites };

inline constexpr std::string_view kAllEncoded = "All Encoded";
inline constexpr std::string_view kTotal = "Total";

struct AggregateStats {
    std::size_t verdicts = 0;
    std::size_t inconclusive = 0;
    std::vector<std::string> quarantined; // diagnostics for unmapped domains

    TargetSet tested;
    TargetSet vulnerable;
    std::map<Technique, TargetSet> tested_by_technique;
    std::map<Technique, TargetSet> vulnerable_by_technique;
    // Vulnerable targets split by whether the attacker got a 200.
    std::map<Technique, std::pair<TargetSet, TargetSet>> by_technique_status; // (200, other)
    std::map<std::string, TargetSet> by_status_class;   // "2xx", "3xx", ...
    std::map<std::string, TargetSet> by_cache_control;  // shape, "(none)" when absent
    TargetSet with_expires;
    TargetSet with_pragma_no_cache;
    std::map<std::string, TargetSet> tested_by_cdn;
    std::map<std::string, TargetSet> vulnerable_by_cdn;
    std::map<std::string, TargetSet> by_leak;           // "markers", "secrets", "both"
    TargetSet unauth_exploitable;

    TargetSet all_encoded() const;
    // Row i: targets exploitable by technique i but not by technique j. The
    // sixth row is the union of the encoded techniques. Diagonal is zero.
    std::array<std::array<Triple, 5>, 6> uniqueness() const;
};

using SiteMap = std::map<std::string, std::string>; // domain -> site

// Every verdict domain mapped to its registrable domain.
SiteMap default_site_map(const std::vector<ScanVerdict>& verdicts);

AggregateStats aggregate(const std::vector<ScanVerdict>& verdicts, const SiteMap& site_map);

nlohmann::json verdict_to_json(const ScanVerdict& v);
ScanVerdict verdict_from_json(const nlohmann::json& j);
std::vector<ScanVerdict> read_verdict_records(std::string_view jsonl);

nlohmann::json stats_to_json(const AggregateStats& stats);

// Stable pseudonym for a host, used when redacting reports.
std::string redact_host(std::string_view host);
ScanVerdict redact(ScanVerdict v);

struct ReportOptions {
    bool redact = false;
};

// Human-readable tables: per-technique targets with "All Encoded" and
// "Total" rows, the uniqueness matrix, status classes, cache headers, CDNs
// and leak types, then the list of vulnerable sites.
std::string render_table(const AggregateStats& stats, const ReportOptions& options = {});
// One flattened record per verdict, then one summary record.
std::string render_records(const std::vector<ScanVerdict>& verdicts, const AggregateStats& stats,
                           const ReportOptions& options = {});

} // namespace wcd
