// wcdscan: command-line driver for scanning, the cache lab and reports.
//
// Exit codes: 0 clean, 2 vulnerabilities found, 1 error or selfcheck
// disagreement.

#include "wcd/cache_lab.h"
#include "wcd/crawler.h"
#include "wcd/lab_server.h"
#include "wcd/reporting.h"
#include "wcd/scan.h"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

constexpr int kClean = 0;
constexpr int kError = 1;
constexpr int kVulnerable = 2;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::vector<wcd::Technique> parse_techniques(const std::string& list) {
    std::vector<wcd::Technique> out;
    if (list == "all") return {wcd::kAllTechniques.begin(), wcd::kAllTechniques.end()};
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = wcd::technique_from_name(item);
        if (!t) throw wcd::ConfigError("unknown technique '" + item + "'");
        if (std::find(out.begin(), out.end(), *t) == out.end()) out.push_back(*t);
    }
    if (out.empty()) throw wcd::ConfigError("no techniques selected");
    return out;
}

wcd::ScanMode parse_mode(const std::string& mode) {
    if (mode == "full") return wcd::ScanMode::Full;
    if (mode == "marker-gated") return wcd::ScanMode::MarkerGated;
    throw wcd::ConfigError("unknown mode '" + mode + "'");
}

std::vector<wcd::lab::SimSite> scenario(const std::string& name) {
    if (auto builtin = wcd::lab::builtin_scenario(name)) return *builtin;
    return wcd::lab::load_scenario_file(name);
}

std::string read_all(const std::string& path) {
    if (path == "-") {
        std::stringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path);
    if (!in) throw wcd::ConfigError("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw wcd::ConfigError("cannot write " + path);
    out << text;
}

void print_report(const std::vector<wcd::ScanVerdict>& verdicts, const wcd::SiteMap& site_map,
                  const std::string& format, bool redact) {
    auto stats = wcd::aggregate(verdicts, site_map);
    wcd::ReportOptions ro{redact};
    std::cout << (format == "records" ? wcd::render_records(verdicts, stats, ro) : wcd::render_table(stats, ro));
}

bool any_vulnerable(const std::vector<wcd::ScanVerdict>& verdicts) {
    return std::any_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.vulnerable; });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Web cache deception scanner and cache lab"};
    app.require_subcommand(1);

    std::string techniques = "all";
    std::string format = "table";
    std::string mode = "full";
    bool redact = false;

    auto* scan = app.add_subcommand("scan", "Crawl seed sites and test them for web cache deception");
    std::string seeds_path, config_path, out_path, journal_path;
    wcd::ScanOptions sopts;
    bool no_probe = false;
    scan->add_option("--seeds", seeds_path, "Seed pool file")->required();
    scan->add_option("--config", config_path, "Site config with credentials and markers (JSON)");
    scan->add_option("--techniques", techniques, "Comma-separated techniques or 'all'");
    scan->add_option("--budget", sopts.budget, "Distinct page groups per domain")->capture_default_str();
    scan->add_option("--rate", sopts.rate, "Requests per second per host")->capture_default_str();
    scan->add_option("--mode", mode, "full or marker-gated")->capture_default_str();
    scan->add_option("--delay", sopts.delay_seconds, "Seconds between victim and attacker requests");
    scan->add_option("--format", format, "table or records")->capture_default_str();
    scan->add_flag("--redact", redact, "Mask site names in the report");
    scan->add_option("--workers", sopts.workers, "Concurrent site workers")->capture_default_str();
    scan->add_option("--seed", sopts.seed, "Seed for nonces and representative selection");
    scan->add_option("--out", out_path, "Write verdict records (JSONL) here");
    scan->add_option("--journal", journal_path, "Write crawl journal (JSONL) here");
    scan->add_flag("--no-probe", no_probe, "Skip the liveness probe of seed hosts");

    auto* lab = app.add_subcommand("lab", "Serve lab scenario sites over HTTP");
    std::string lab_scenario = "catalog", lab_address = "127.0.0.1", dump_path, seeds_out, config_out;
    int lab_port = 8080;
    lab->add_option("--scenario", lab_scenario, "catalog, classic, sitemap or a scenario file")->capture_default_str();
    lab->add_option("--address", lab_address)->capture_default_str();
    lab->add_option("--port", lab_port)->capture_default_str();
    lab->add_option("--dump", dump_path, "Write the scenario as JSON and exit");
    lab->add_option("--write-seeds", seeds_out, "Write a seed file for the served sites");
    lab->add_option("--write-config", config_out, "Write a site config for the served sites");

    auto* oracle = app.add_subcommand("oracle", "Print ground-truth verdicts for a scenario");
    std::string oracle_scenario = "catalog";
    long long oracle_delay = 0;
    oracle->add_option("--scenario", oracle_scenario)->capture_default_str();
    oracle->add_option("--techniques", techniques);
    oracle->add_option("--delay", oracle_delay, "Simulated seconds between victim and attacker");
    oracle->add_option("--format", format, "table or records")->capture_default_str();

    auto* report = app.add_subcommand("report", "Aggregate verdict records into tables");
    std::string report_input = "-";
    report->add_option("--input", report_input, "Verdict records (JSONL), '-' for stdin")->capture_default_str();
    report->add_option("--format", format, "table or records")->capture_default_str();
    report->add_flag("--redact", redact, "Mask site names");

    auto* selfcheck = app.add_subcommand("selfcheck", "Scan a lab scenario and compare with the oracle");
    std::string check_scenario = "catalog";
    wcd::SelfcheckOptions copts;
    selfcheck->add_option("--scenario", check_scenario)->capture_default_str();
    selfcheck->add_option("--techniques", techniques);
    selfcheck->add_option("--rate", copts.rate)->capture_default_str();
    selfcheck->add_option("--workers", copts.workers)->capture_default_str();
    selfcheck->add_option("--budget", copts.budget)->capture_default_str();
    selfcheck->add_option("--delay", copts.delay_seconds);
    selfcheck->add_option("--mode", mode)->capture_default_str();
    selfcheck->add_option("--format", format, "table or records")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (format != "table" && format != "records") throw wcd::ConfigError("unknown format '" + format + "'");

        if (*scan) {
            sopts.techniques = parse_techniques(techniques);
            sopts.mode = parse_mode(mode);
            if (!(sopts.rate > 0)) throw wcd::ConfigError("--rate must be positive");
            auto config = config_path.empty() ? wcd::ScanConfig{} : wcd::load_scan_config(config_path);
            auto pool = wcd::ingest_domains(seeds_path);
            if (!no_probe && !pool.sites.empty()) {
                wcd::TransportOptions topts;
                topts.resolve = config.resolve;
                topts.timeout = std::chrono::seconds(5);
                wcd::apply_proxy_environment(topts);
                std::shared_ptr<wcd::Transport> transport = wcd::make_http_transport(topts);
                wcd::HttpEngine probe(transport, std::make_shared<wcd::RateLimiter>(sopts.rate));
                auto before = pool.sites.size();
                pool = wcd::filter_live(std::move(pool), probe);
                if (pool.sites.size() < before)
                    std::cerr << "dropped " << before - pool.sites.size() << " unresponsive host(s)\n";
            }
            std::ofstream journal;
            if (!journal_path.empty()) {
                journal.open(journal_path);
                if (!journal) throw wcd::ConfigError("cannot write " + journal_path);
                sopts.journal = &journal;
            }
            auto result = wcd::run_scan(pool, config, sopts);
            for (const auto& site : result.sites) {
                if (!site.error.empty()) std::cerr << site.domain << ": " << site.error << '\n';
            }
            if (!out_path.empty()) {
                std::ostringstream records;
                for (const auto& v : result.verdicts) records << wcd::verdict_to_json(v).dump() << '\n';
                write_file(out_path, records.str());
            }
            print_report(result.verdicts, result.site_map, format, redact);
            return any_vulnerable(result.verdicts) ? kVulnerable : kClean;
        }

        if (*lab) {
            auto sites = scenario(lab_scenario);
            if (!dump_path.empty()) {
                write_file(dump_path, wcd::lab::scenario_to_json(sites).dump(2) + "\n");
                return kClean;
            }
            wcd::lab::LabServer server(sites);
            int port = server.start(lab_address, lab_port);
            if (!seeds_out.empty()) {
                std::ostringstream seeds;
                for (const auto& s : wcd::lab_seed_pool(sites, port).sites)
                    seeds << s.root.str() << " login=" << s.login_ref << '\n';
                write_file(seeds_out, seeds.str());
            }
            if (!config_out.empty())
                write_file(config_out, wcd::scan_config_to_json(wcd::lab_scan_config(sites, port)).dump(2) + "\n");
            std::cerr << "serving " << sites.size() << " lab site(s) on " << lab_address << ":" << port << '\n';
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            return kClean;
        }

        if (*oracle) {
            auto sites = scenario(oracle_scenario);
            auto list = parse_techniques(techniques);
            bool any = false;
            for (const auto& site : sites) {
                nlohmann::json record = {{"site", site.name}, {"host", site.host}};
                std::ostringstream line;
                line << site.host << "  " << site.name;
                for (auto t : list) {
                    bool v = wcd::lab::oracle_vulnerable(site, t, oracle_delay);
                    any = any || v;
                    record[std::string(wcd::technique_name(t))] = v;
                    line << "  " << wcd::technique_name(t) << "=" << (v ? "yes" : "no");
                }
                std::cout << (format == "records" ? record.dump() : line.str()) << '\n';
            }
            return any ? kVulnerable : kClean;
        }

        if (*report) {
            auto verdicts = wcd::read_verdict_records(read_all(report_input));
            print_report(verdicts, wcd::default_site_map(verdicts), format, redact);
            return kClean;
        }

        if (*selfcheck) {
            copts.techniques = parse_techniques(techniques);
            copts.mode = parse_mode(mode);
            auto result = wcd::run_selfcheck(scenario(check_scenario), copts);
            for (const auto& row : result.rows) {
                if (format == "records") {
                    std::cout << nlohmann::json{{"site", row.site},
                                                {"host", row.host},
                                                {"technique", wcd::technique_name(row.technique)},
                                                {"scanner", row.scanner},
                                                {"oracle", row.oracle},
                                                {"inconclusive", row.inconclusive}}
                                     .dump()
                              << '\n';
                } else if (!row.agrees()) {
                    std::cout << "DISAGREE " << row.host << " " << row.site << " " << wcd::technique_name(row.technique)
                              << " scanner=" << (row.inconclusive ? "inconclusive" : row.scanner ? "yes" : "no")
                              << " oracle=" << (row.oracle ? "yes" : "no") << '\n';
                }
            }
            for (const auto& site : result.scan.sites) {
                if (!site.error.empty()) std::cerr << site.domain << ": " << site.error << '\n';
            }
            std::cerr << result.rows.size() << " comparisons, " << result.disagreements << " disagreement(s), "
                      << result.scan.verdicts.size() << " verdicts in " << result.seconds << " s\n";
            return result.disagreements == 0 ? kClean : kError;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
    return kClean;
}
