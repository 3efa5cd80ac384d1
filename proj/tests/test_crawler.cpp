#include "wcd/cache_lab.h"
#include "wcd/crawler.h"

#include "lab_transport.h"

#include <catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using namespace wcd;

namespace {

std::vector<std::string> strs(const std::vector<ParsedUrl>& urls) {
    std::vector<std::string> out;
    for (const auto& u : urls) out.push_back(u.str());
    return out;
}

} // namespace

TEST_CASE("seed files parse hosts, options and comments") {
    auto pool = parse_seed_pool(
        "# shops\n"
        "\n"
        "Shop.Example.com login=shop markers=alice\n"
        "https://bank.example/portal/ subdomains=API.bank.example,m.bank.example  # trailing\n"
        "shop.example.com login=other\n");
    REQUIRE(pool.sites.size() == 2);
    CHECK(pool.sites[0].primary_domain == "shop.example.com");
    CHECK(pool.sites[0].root.str() == "http://shop.example.com/");
    CHECK(pool.sites[0].login_ref == "shop");
    CHECK(pool.sites[0].markers_ref == "alice");
    CHECK(pool.sites[1].root.str() == "https://bank.example/portal/");
    CHECK(pool.sites[1].subdomains == std::vector<std::string>{"api.bank.example", "m.bank.example"});
    CHECK(parse_seed_pool("").sites.empty());
}

TEST_CASE("malformed seed lines report their line number") {
    try {
        parse_seed_pool("a.example\nb.example colour=blue\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_seed_pool("http://\n"), ConfigError);
    CHECK_THROWS_AS(parse_seed_pool("a.example login\n"), ConfigError);
    CHECK_THROWS_AS(ingest_domains("/nonexistent/seeds.txt"), ConfigError);
}

TEST_CASE("liveness filter drops silent hosts and subdomains") {
    auto site = lab::classic_site();
    auto other = lab::classic_site();
    other.host = "www.classic.test";
    auto transport = std::make_shared<testing::LabTransport>(std::vector<lab::SimSite>{site, other});
    HttpEngine probe(transport, nullptr, EngineOptions{5, 0, {}});
    auto pool = parse_seed_pool("classic.test subdomains=www.classic.test,gone.classic.test\ndead.test\n");
    auto live = filter_live(pool, probe);
    REQUIRE(live.sites.size() == 1);
    CHECK(live.sites[0].subdomains == std::vector<std::string>{"www.classic.test"});

    auto path = std::string(WCD_BINARY_DIR) + "/crawler_seeds.txt";
    std::ofstream(path) << "classic.test\ndead.test\n";
    CHECK(ingest_domains(path).sites.size() == 2);
    CHECK(ingest_domains(path, &probe).sites.size() == 1);
}

TEST_CASE("anchor extraction resolves, unescapes and drops fragments") {
    auto base = parse_url("http://s.example/dir/page.html");
    auto links = extract_links(
        "<a href=\"/catalog?page=2&amp;sort=asc\">x</a> <A class=x HREF='rel/item#top'>y</A>"
        "<a href=next>z</a><a href=\"#only\">f</a><a name=\"nohref\">n</a>"
        "<link href=\"/style.css\"><img src=\"/a.png\"><a href=\"http://other.example/\">o</a>",
        base);
    CHECK(strs(links) == std::vector<std::string>{"http://s.example/catalog?page=2&sort=asc",
                                                  "http://s.example/dir/rel/item", "http://s.example/dir/next",
                                                  "http://other.example/"});
}

TEST_CASE("sitemap crawl yields one representative per structural group") {
    auto site = lab::sitemap_site();
    auto transport = std::make_shared<testing::LabTransport>(std::vector<lab::SimSite>{site});
    HttpEngine engine(transport, nullptr);
    auto crawl = [&](std::size_t budget, std::uint64_t seed) {
        Identity anon;
        CrawlOptions opts;
        opts.budget = budget;
        opts.seed = seed;
        return crawl_domain(engine, parse_url("http://sitemap.test/"), anon, opts);
    };

    std::ostringstream journal;
    Identity anon;
    CrawlOptions jopts;
    jopts.journal = &journal;
    auto first = crawl_domain(engine, parse_url("http://sitemap.test/"), anon, jopts);
    CHECK(first.pages.size() == 7);
    CHECK(first.groups == 7);
    CHECK_FALSE(first.truncated);
    CHECK(first.pages_seen == 1200);
    CHECK_FALSE(first.root_headers.empty());
    for (const auto& t : transport->targets) CHECK(t.find("logout") == std::string::npos);
    for (const auto& t : transport->targets) CHECK(t.find("partner") == std::string::npos);

    std::size_t representatives = 0;
    std::istringstream lines(journal.str());
    for (std::string line; std::getline(lines, line);) {
        auto record = nlohmann::json::parse(line);
        if (record["event"] == "representative") ++representatives;
    }
    CHECK(representatives == 7);

    auto again = crawl(500, 1);
    CHECK(strs(again.pages) == strs(first.pages));

    auto tiny = crawl(1, 1);
    CHECK(tiny.pages.size() == 1);
    CHECK(tiny.pages[0].str() == "http://sitemap.test/");
    CHECK(tiny.truncated);

    auto three = crawl(3, 1);
    CHECK(three.pages.size() == 3);
    CHECK(three.truncated);
}

TEST_CASE("raw fetch cap stops runaway crawls") {
    auto site = lab::sitemap_site();
    auto transport = std::make_shared<testing::LabTransport>(std::vector<lab::SimSite>{site});
    HttpEngine engine(transport, nullptr);
    Identity anon;
    CrawlOptions opts;
    opts.budget = 7;
    opts.raw_cap_factor = 2;
    auto s = crawl_domain(engine, parse_url("http://sitemap.test/"), anon, opts);
    CHECK(s.fetches == 14);
    CHECK(s.truncated);
    CHECK(s.pages.size() <= 7);
}

TEST_CASE("marker-gated filtering keeps only pages showing the victim's markers") {
    auto site = lab::classic_site();
    auto transport = std::make_shared<testing::LabTransport>(std::vector<lab::SimSite>{site});
    HttpEngine engine(transport, nullptr);
    Identity victim{Role::Victim, {}, testing::lab_login(site, 0), ""};
    engine.login(victim);
    auto surface = crawl_domain(engine, parse_url("http://classic.test/"), victim);
    CHECK(surface.pages.size() >= 3);
    auto marked = filter_marked_pages(surface, MarkerSet{site.accounts[0].markers});
    CHECK(strs(marked.pages) == std::vector<std::string>{"http://classic.test/account.php"});
    auto other = filter_marked_pages(surface, MarkerSet{site.accounts[1].markers});
    CHECK(other.pages.empty());
}
