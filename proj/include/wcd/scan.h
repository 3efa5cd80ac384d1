// The end-to-end pipeline: seeds -> login -> crawl -> per-page tests ->
// verdicts, plus the lab selfcheck that diffs the scanner against ground
// truth.

#pragma once

#include "wcd/cache_lab.h"
#include "wcd/crawler.h"
#include "wcd/detector.h"
#include "wcd/http_engine.h"
#include "wcd/reporting.h"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace wcd {

// Credentials and markers for one site, referenced from seed lines.
struct SiteCredentials {
    std::optional<LoginDescriptor> victim;
    std::optional<LoginDescriptor> attacker;
    MarkerSet markers;
};

// Site config file:
// { "resolve": {"*.test": "127.0.0.1"}, "user_agent": "...",
//   "sites": { "<ref>": {
//       "victim":   {"url", "method", "fields": {...}, "session_cookie", "success_contains"},
//       "attacker": {...},
//       "markers":  [{"label", "value"}] } } }
struct ScanConfig {
    std::map<std::string, std::string> resolve;
    std::string user_agent{kDefaultUserAgent};
    std::map<std::string, SiteCredentials> sites;
};

ScanConfig parse_scan_config(const nlohmann::json& j);
ScanConfig load_scan_config(const std::string& path);
nlohmann::json scan_config_to_json(const ScanConfig& config);

enum class ScanMode { Full, MarkerGated };

struct ScanOptions {
    std::vector<Technique> techniques{kAllTechniques.begin(), kAllTechniques.end()};
    std::size_t budget = 500;
    double rate = 2.0; // requests per second per host
    ScanMode mode = ScanMode::Full;
    long long delay_seconds = 0;
    DelayFn delay = sleep_delay;
    std::size_t workers = 4;
    std::uint64_t seed = 1;
    std::string extension = "css";
    AttackOptions attack_options;
    std::ostream* journal = nullptr;
    // Called from worker threads, serialized.
    std::function<void(const ScanVerdict&)> on_verdict;
    // Used instead of a real HTTP transport when set.
    std::shared_ptr<Transport> transport;
    // Shared pacing; created from `rate` when empty.
    std::shared_ptr<RateLimiter> limiter;
    bool use_proxy_environment = true;
};

struct SiteOutcome {
    std::string domain;
    std::size_t pages_tested = 0;
    bool truncated = false;
    std::string error; // login or crawl failure; empty on success
};

struct ScanResult {
    std::vector<ScanVerdict> verdicts; // ordered by seed, page, technique
    SiteMap site_map;
    std::vector<SiteOutcome> sites;
};

ScanResult run_scan(const SeedPool& pool, const ScanConfig& config, const ScanOptions& options);

// Lab selfcheck.

struct SelfcheckOptions {
    std::vector<Technique> techniques{kAllTechniques.begin(), kAllTechniques.end()};
    double rate = 100.0;
    std::size_t workers = 16;
    std::size_t budget = 500;
    long long delay_seconds = 0;
    ScanMode mode = ScanMode::Full;
    std::uint64_t seed = 1;
};

struct SelfcheckRow {
    std::string site;
    std::string host;
    Technique technique = Technique::PathParameter;
    bool scanner = false;
    bool oracle = false;
    bool inconclusive = false;

    bool agrees() const { return !inconclusive && scanner == oracle; }
};

struct SelfcheckResult {
    std::vector<SelfcheckRow> rows;
    std::size_t disagreements = 0;
    double seconds = 0.0;
    ScanResult scan;
};

// Seed pool and config that point the scanner at lab sites listening on
// 127.0.0.1:port.
SeedPool lab_seed_pool(const std::vector<lab::SimSite>& sites, int port);
ScanConfig lab_scan_config(const std::vector<lab::SimSite>& sites, int port);

// Serves the sites on an ephemeral port, scans them with simulated-clock
// delays, and compares every site x technique against oracle_vulnerable.
SelfcheckResult run_selfcheck(const std::vector<lab::SimSite>& sites, const SelfcheckOptions& options = {});

} // namespace wcd
