#include "wcd/url.h"

#include "oracles/grouping.h"
#include "oracles/url_reference.h"

#include <catch_amalgamated.hpp>

#include <random>
#include <set>
#include <thread>

using namespace wcd;

TEST_CASE("parse_url splits components and decodes query parameters") {
    auto u = parse_url("HTTPS://Shop.Example.COM:8443/a/b%20c/page.php?x=1&y=hello%20world#top");
    CHECK(u.scheme == "https");
    CHECK(u.host == "shop.example.com");
    CHECK(u.port == 8443);
    CHECK(u.explicit_port);
    CHECK(u.raw_path == "/a/b%20c/page.php");
    CHECK(u.path_segments == std::vector<std::string>{"a", "b c", "page.php"});
    REQUIRE(u.query_params.size() == 2);
    CHECK(u.query_params[1] == QueryParam{"y", "hello world"});
    CHECK(u.fragment == "top");
    CHECK(u.target() == "/a/b%20c/page.php?x=1&y=hello%20world");
    CHECK(u.str() == "https://shop.example.com:8443/a/b%20c/page.php?x=1&y=hello%20world#top");
}

TEST_CASE("encoded slash stays inside one segment") {
    auto u = parse_url("http://h.example/a%2Fb/c");
    CHECK(u.path_segments == std::vector<std::string>{"a/b", "c"});
    CHECK(u.raw_path == "/a%2Fb/c");
}

TEST_CASE("default ports are implied and omitted from the origin") {
    CHECK(parse_url("http://a.example/").port == 80);
    CHECK(parse_url("https://a.example/").port == 443);
    CHECK(parse_url("http://a.example:80/").origin() == "http://a.example");
    CHECK(parse_url("http://a.example:8080/").origin() == "http://a.example:8080");
}

TEST_CASE("malformed URLs are rejected") {
    CHECK_THROWS_AS(parse_url("no-scheme.example/path"), MalformedUrl);
    CHECK_THROWS_AS(parse_url("ftp://a.example/"), MalformedUrl);
    CHECK_THROWS_AS(parse_url("http:///path"), MalformedUrl);
    CHECK_THROWS_AS(parse_url("http://a.example:99999/"), MalformedUrl);
    CHECK_THROWS_AS(parse_url("http://a.example:12ab/"), MalformedUrl);
    CHECK_THROWS_AS(parse_url("http://bad host/"), MalformedUrl);
}

TEST_CASE("parser agrees with a generic URI splitter") {
    const std::vector<std::string> urls = {
        "http://a.example/",
        "http://a.example/x/y/z.html",
        "http://a.example/x?q=1",
        "http://a.example/x?q=1#frag",
        "http://a.example/x#frag?not-query",
        "https://a.example:444/p;jsessionid=1/q",
        "http://a.example/%0A/%3B/%23/%3F",
        "http://a.example/search?q=a%26b&r",
        "http://a.example?only=query",
    };
    for (const auto& raw : urls) {
        auto ours = parse_url(raw);
        auto ref = oracle::split_uri(raw);
        INFO(raw);
        CHECK(ours.scheme == ref.scheme);
        // An empty path is normalized to "/".
        CHECK(ours.raw_path == (ref.path.empty() ? "/" : ref.path));
        CHECK(ours.has_query == ref.query.has_value());
        if (ref.query) CHECK(ours.raw_query == *ref.query);
        CHECK(ours.fragment == ref.fragment);
        if (!ref.path.empty()) CHECK(ours.str() == raw);
    }
    CHECK(parse_url("http://a.example?only=query").str() == "http://a.example/?only=query");
}

TEST_CASE("percent_decode keeps invalid escapes") {
    CHECK(percent_decode("a%2Fb") == "a/b");
    CHECK(percent_decode("%0A%3b") == "\n;");
    CHECK(percent_decode("100%") == "100%");
    CHECK(percent_decode("%zz") == "%zz");
    CHECK(percent_decode("%4") == "%4");
    CHECK(percent_decode("a+b") == "a+b");
}

TEST_CASE("resolve_url handles the common reference forms") {
    auto base = parse_url("http://a.example:8080/dir/page.php?x=1");
    auto r = [&](std::string_view href) {
        auto u = resolve_url(base, href);
        return u ? u->str() : std::string("<none>");
    };
    CHECK(r("other.php") == "http://a.example:8080/dir/other.php");
    CHECK(r("/root") == "http://a.example:8080/root");
    CHECK(r("../up") == "http://a.example:8080/up");
    CHECK(r("./same/") == "http://a.example:8080/dir/same/");
    CHECK(r("?y=2") == "http://a.example:8080/dir/page.php?y=2");
    CHECK(r("#frag") == "http://a.example:8080/dir/page.php?x=1#frag");
    CHECK(r("//cdn.example/lib.js") == "http://cdn.example/lib.js");
    CHECK(r("https://b.example/") == "https://b.example/");
    CHECK(r("mailto:someone@a.example") == "<none>");
    CHECK(r("javascript:void(0)") == "<none>");
    CHECK(r("  /trimmed  ") == "http://a.example:8080/trimmed");
}

TEST_CASE("attack URLs place the separator before the nonce file") {
    auto base = parse_url("http://shop.example/account.php?tab=1#x");
    const std::string nonce = "abcdefghij012345";
    CHECK(make_attack_url(base, Technique::PathParameter, nonce).rendered ==
          "http://shop.example/account.php/abcdefghij012345.css");
    CHECK(make_attack_url(base, Technique::EncodedNewline, nonce).rendered ==
          "http://shop.example/account.php%0Aabcdefghij012345.css");
    CHECK(make_attack_url(base, Technique::EncodedSemicolon, nonce).rendered ==
          "http://shop.example/account.php%3Babcdefghij012345.css");
    CHECK(make_attack_url(base, Technique::EncodedPound, nonce).rendered ==
          "http://shop.example/account.php%23abcdefghij012345.css");
    CHECK(make_attack_url(base, Technique::EncodedQuestion, nonce).rendered ==
          "http://shop.example/account.php%3Fabcdefghij012345.css");
    CHECK(make_attack_url(base, Technique::EncodedQuestion, nonce, "css", {true}).rendered ==
          "http://shop.example/account.php%3Fname=valabcdefghij012345.css");
    CHECK(make_attack_url(base, Technique::PathParameter, nonce, "jpg").rendered ==
          "http://shop.example/account.php/abcdefghij012345.jpg");
}

TEST_CASE("attack URL on a directory path does not double the slash") {
    auto base = parse_url("http://shop.example/profile/");
    CHECK(make_attack_url(base, Technique::PathParameter, "n").rendered == "http://shop.example/profile/n.css");
    CHECK(make_attack_url(parse_url("http://shop.example"), Technique::EncodedPound, "n").rendered ==
          "http://shop.example/%23n.css");
}

TEST_CASE("every attack URL reparses and keeps the base host") {
    NonceGenerator gen(3);
    for (const auto& raw : {"http://a.example/", "http://a.example/x/y", "https://a.example:8443/p.php?q=1"}) {
        auto base = parse_url(raw);
        for (auto t : kAllTechniques) {
            auto a = make_attack_url(base, t, gen.next());
            auto re = parse_url(a.rendered);
            CHECK(re.host == base.host);
            CHECK(re.port == base.port);
            CHECK_FALSE(re.fragment.has_value());
            CHECK_FALSE(re.has_query);
            CHECK(a.rendered.ends_with(a.random_name + ".css"));
        }
    }
}

TEST_CASE("technique names and aliases") {
    for (auto t : kAllTechniques) CHECK(technique_from_name(technique_name(t)) == t);
    CHECK(technique_from_name("question") == Technique::EncodedQuestion);
    CHECK(technique_from_name("ENCODEDPOUND") == Technique::EncodedPound);
    CHECK_FALSE(technique_from_name("bogus").has_value());
}

TEST_CASE("nonce generator yields unique lowercase alphanumeric names") {
    NonceGenerator gen(42);
    std::set<std::string> seen;
    for (int i = 0; i < 20000; ++i) {
        auto n = gen.next();
        REQUIRE(n.size() == NonceGenerator::kLength);
        REQUIRE(std::all_of(n.begin(), n.end(), [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }));
        REQUIRE(seen.insert(n).second);
    }
    NonceGenerator a(7), b(7);
    CHECK(a.next() == b.next());
}

TEST_CASE("nonce generator is safe under concurrent use") {
    NonceGenerator gen(9);
    std::vector<std::vector<std::string>> out(4);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 2000; ++i) out[t].push_back(gen.next());
        });
    for (auto& t : threads) t.join();
    std::set<std::string> all;
    for (auto& v : out) all.insert(v.begin(), v.end());
    CHECK(all.size() == 8000);
}

TEST_CASE("numeric path segments collapse into one group") {
    auto k1 = group_key(parse_url("http://s.example/item/12/view"));
    auto k2 = group_key(parse_url("http://s.example/item/99887/view"));
    auto k3 = group_key(parse_url("http://s.example/item/12a/view"));
    CHECK(k1 == k2);
    CHECK_FALSE(k1 == k3);
    CHECK(k1.str() == "s.example/item/{n}/view");
    CHECK(is_numeric_segment("0042"));
    CHECK_FALSE(is_numeric_segment(""));
    CHECK_FALSE(is_numeric_segment("4a"));
}

TEST_CASE("query parameter names form the group, values and order do not") {
    auto a = group_key(parse_url("http://s.example/c?page=1&sort=asc"));
    auto b = group_key(parse_url("http://s.example/c?sort=desc&page=7"));
    auto c = group_key(parse_url("http://s.example/c?page=1"));
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.str() == "s.example/c?page&sort");
    auto abs = abstract_url(parse_url("http://s.example/u/5?id=3"));
    CHECK(abs.str() == "http://s.example/u/{n}?id=");
}

TEST_CASE("group keys agree with a text-only reference on generated URLs") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> words = {"item", "blog", "user", "view", "a", "b", "42", "7", "007", "x1"};
    const std::vector<std::string> params = {"q", "page", "sort", "id"};
    std::vector<std::string> urls;
    for (int i = 0; i < 500; ++i) {
        std::string url = "http://h" + std::to_string(rng() % 3) + ".example";
        auto depth = rng() % 4;
        if (depth == 0) url += "/";
        for (std::size_t d = 0; d < depth; ++d) url += "/" + words[rng() % words.size()];
        auto nparams = rng() % 3;
        for (std::size_t p = 0; p < nparams; ++p)
            url += std::string(p == 0 ? "?" : "&") + params[rng() % params.size()] + "=" + std::to_string(rng() % 100);
        urls.push_back(url);
    }
    std::set<UrlGroupKey> ours;
    for (const auto& u : urls) ours.insert(group_key(parse_url(u)));
    CHECK(ours.size() == oracle::count_groups(urls));
    // Same partition, not just the same count.
    std::vector<UrlGroupKey> keys;
    std::vector<std::string> refs;
    for (const auto& u : urls) {
        keys.push_back(group_key(parse_url(u)));
        refs.push_back(oracle::group_of(u));
    }
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < urls.size(); ++i)
        for (std::size_t j = i + 1; j < urls.size(); ++j)
            mismatches += (keys[i] == keys[j]) != (refs[i] == refs[j]);
    CHECK(mismatches == 0);
}

TEST_CASE("select_representatives picks one member per group deterministically") {
    std::vector<ParsedUrl> urls;
    for (int i = 1; i <= 50; ++i) urls.push_back(parse_url("http://s.example/item/" + std::to_string(i)));
    urls.push_back(parse_url("http://s.example/about"));
    for (int i = 1; i <= 20; ++i) urls.push_back(parse_url("http://s.example/s?q=" + std::to_string(i)));

    auto a = select_representatives(urls, 5);
    auto b = select_representatives(urls, 5);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].str() == b[i].str());
    CHECK(group_key(a[0]).abstract_path == "/item/{n}");
    CHECK(a[1].str() == "http://s.example/about");

    bool varies = false;
    for (std::uint64_t seed = 0; seed < 20 && !varies; ++seed)
        varies = select_representatives(urls, seed)[0].str() != a[0].str();
    CHECK(varies);
}

TEST_CASE("site with only numeric item pages has a single representative") {
    std::vector<ParsedUrl> urls;
    for (int i = 0; i < 300; ++i) urls.push_back(parse_url("http://s.example/item/" + std::to_string(i * 7)));
    CHECK(select_representatives(urls, 1).size() == 1);
}

TEST_CASE("registrable domain") {
    CHECK(registrable_domain("www.shop.example.com") == "example.com");
    CHECK(registrable_domain("example.com") == "example.com");
    CHECK(registrable_domain("a.b.example.co.uk") == "example.co.uk");
    CHECK(registrable_domain("Shop.Example.COM.") == "example.com");
    CHECK(registrable_domain("localhost") == "localhost");
    CHECK(registrable_domain("127.0.0.1") == "127.0.0.1");
    CHECK(registrable_domain("wcd001.test") == "wcd001.test");
}
