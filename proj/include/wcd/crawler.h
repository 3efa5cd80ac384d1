// Seed ingestion and attack-surface discovery: breadth-first crawl of a
// domain as the victim, structural grouping and budget enforcement.

#pragma once

#include "wcd/detector.h"
#include "wcd/http_engine.h"
#include "wcd/url.h"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wcd {

struct SeedSite {
    std::string primary_domain; // lowercase host
    ParsedUrl root;             // start URL, "/" unless the line gave a path
    std::vector<std::string> subdomains;
    std::string login_ref;      // key into the site config, may be empty
    std::string markers_ref;

    bool operator==(const SeedSite& o) const { return primary_domain == o.primary_domain; }
};

struct SeedPool {
    std::vector<SeedSite> sites;
};

// Seed file: one site per line,
//   <url-or-host> [login=<ref>] [markers=<ref>] [subdomains=a.example,b.example]
// Blank lines and '#' comments are ignored. Duplicate hosts keep the first
// line. Throws ConfigError with the line number on malformed input.
SeedPool parse_seed_pool(std::string_view text);

// Reads the file, parses it and, when a probe engine is given, drops hosts
// (and listed subdomains) that give no HTTP response to a GET of their root.
SeedPool ingest_domains(const std::string& path, HttpEngine* probe = nullptr);
SeedPool filter_live(SeedPool pool, HttpEngine& probe);

struct CrawlOptions {
    std::size_t budget = 500;       // distinct group keys per domain
    std::size_t raw_cap_factor = 10; // fetch at most budget * factor URLs
    std::uint64_t seed = 1;         // representative selection
    std::vector<std::string> logout_patterns = default_logout_patterns();
    // Hosts outside the start host's registrable domain that are in scope.
    std::vector<std::string> extra_hosts;
    std::ostream* journal = nullptr; // line-delimited JSON records
};

struct AttackSurface {
    std::string domain;
    std::vector<ParsedUrl> pages;   // one representative per group
    std::size_t pages_seen = 0;     // distinct URLs discovered
    std::size_t fetches = 0;
    std::size_t groups = 0;
    bool truncated = false;
    // Victim-rendered bodies keyed by URL string, for every fetched page.
    std::map<std::string, std::string> victim_bodies;
    // Response headers of the start page, used for CDN labeling.
    Headers root_headers;
};

// Anchor hrefs in body resolved against base; fragments dropped.
std::vector<ParsedUrl> extract_links(std::string_view body, const ParsedUrl& base);

AttackSurface crawl_domain(HttpEngine& engine, const ParsedUrl& start, Identity& victim,
                           const CrawlOptions& options = {});

// Keeps representatives whose victim body carries at least one marker.
AttackSurface filter_marked_pages(AttackSurface surface, const MarkerSet& markers);

} // namespace wcd
