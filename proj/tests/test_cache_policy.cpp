#include "wcd/cache_policy.h"

#include <catch_amalgamated.hpp>

using namespace wcd;

namespace {

CacheControlDirectives cc(std::string_view v) { return parse_cache_control(v); }

} // namespace

TEST_CASE("Cache-Control parsing recognizes the standard directives") {
    auto d = cc("Max-Age=600, PUBLIC, must-revalidate , no-transform");
    CHECK(d.max_age == 600);
    CHECK(d.public_);
    CHECK(d.must_revalidate);
    CHECK(d.no_transform);
    CHECK_FALSE(d.no_store);
    CHECK(d.extensions.empty());
    CHECK(serialize_cache_control(d) == "max-age=600, public, must-revalidate, no-transform");
}

TEST_CASE("Cache-Control keeps unknown and malformed directives as extensions") {
    auto d = cc("max-age=abc, post-check=0, pre-check=0, community=\"UCI, x\"");
    CHECK_FALSE(d.max_age.has_value());
    REQUIRE(d.extensions.size() == 4);
    CHECK(d.extensions[0] == Directive{"max-age", "abc"});
    CHECK(d.extensions[3] == Directive{"community", "\"UCI, x\""});
    CHECK(serialize_cache_control(d) == "max-age=abc, post-check=0, pre-check=0, community=\"UCI, x\"");
}

TEST_CASE("Cache-Control edge cases") {
    CHECK(cc("").all.empty());
    CHECK(cc(" , ,").all.empty());
    CHECK(cc("max-age=\"30\"").max_age == 30);
    CHECK_FALSE(cc("max-age=-1").max_age.has_value());
    CHECK(cc("no-store,no-store").all.size() == 2);
    CHECK(cache_control_shape(cc("public, max-age=60")) == "max-age=, public");
    CHECK(cache_control_shape(cc("no-store,no-store")) == "no-store");
}

// Every combination tallied in the vulnerable-site header breakdown, in a
// concrete header and in the blanked shape used for the tally.
TEST_CASE("observed header combinations parse losslessly and round-trip") {
    const std::vector<std::pair<std::string, std::string>> fixtures = {
        {"max-age=3600, public", "max-age=, public"},
        {"max-age=0", "max-age="},
        {"private, must-revalidate", "must-revalidate, private"},
        {"no-store, no-cache, max-age=0", "max-age=, no-cache, no-store"},
        {"max-age=0, no-cache", "max-age=, no-cache"},
        {"max-age=86400, must-revalidate", "max-age=, must-revalidate"},
        {"private, max-age=0, must-revalidate, no-transform", "max-age=, must-revalidate, no-transform, private"},
        {"no-cache", "no-cache"},
        {"private, max-age=300", "max-age=, private"},
        {"no-store, no-cache, must-revalidate, post-check=0, pre-check=0",
         "must-revalidate, no-cache, no-store, post-check=, pre-check="},
    };
    for (const auto& [header, shape] : fixtures) {
        INFO(header);
        auto d = cc(header);
        CHECK(serialize_cache_control(d) == header);
        CHECK(cc(serialize_cache_control(d)) == d);
        CHECK(cache_control_shape(d) == shape);
    }
    auto legacy = cc("no-store, no-cache, must-revalidate, post-check=0, pre-check=0");
    CHECK(legacy.no_store);
    CHECK(legacy.no_cache);
    CHECK(legacy.must_revalidate);
    CHECK(legacy.extensions.size() == 2);
}

TEST_CASE("collect_cache_headers reads Expires and Pragma for reporting") {
    auto h = collect_cache_headers({{"cache-control", "private"},
                                    {"Expires", "Thu, 19 Nov 1981 08:52:00 GMT"},
                                    {"PRAGMA", "no-cache"},
                                    {"Cache-Control", "max-age=0"}});
    REQUIRE(h.cache_control);
    CHECK(h.cache_control->private_);
    CHECK(h.cache_control->max_age == 0);
    CHECK(h.expires == "Thu, 19 Nov 1981 08:52:00 GMT");
    CHECK(h.pragma_no_cache);
    CHECK_FALSE(collect_cache_headers({}).cache_control.has_value());
}

TEST_CASE("path_extension looks only at the last segment") {
    CHECK(path_extension("/a/b/style.CSS") == "css");
    CHECK(path_extension("/a.b/c") == "");
    CHECK(path_extension("/") == "");
    CHECK(path_extension("/x/archive.tar.gz") == "gz");
}

TEST_CASE("akamai default stores by extension and ignores origin headers") {
    auto p = builtin_profile("akamai_default");
    auto none = cc("");
    CHECK(decide(p, "/account.php/x.css", 200, none).store);
    CHECK(decide(p, "/account.php/x.css", 200, cc("no-store, private")).store);
    CHECK_FALSE(decide(p, "/account.php", 200, none).store);
    CHECK_FALSE(decide(p, "/account.php", 200, cc("public, max-age=600")).store);
    CHECK(decide(p, "/x.jpg", 404, none).store);
    CHECK_FALSE(decide(p, "/x.jpg", 302, none).store);
    CHECK_FALSE(decide(p, "/x.jpg", 500, none).store);
    CHECK(decide(p, "/x.css", 200, none).ttl == 3600);
}

TEST_CASE("cloudflare default honors headers and accepts opt-in") {
    auto p = builtin_profile("cloudflare_default");
    CHECK(decide(p, "/a/x.css", 200, cc("")).reason == DecisionReason::ExtensionMatch);
    CHECK_FALSE(decide(p, "/a/x.css", 200, cc("no-store")).store);
    CHECK_FALSE(decide(p, "/a/x.css", 200, cc("private")).store);
    CHECK_FALSE(decide(p, "/a/x.css", 200, cc("no-cache")).store);
    CHECK(decide(p, "/a", 200, cc("public")).reason == DecisionReason::HeaderOptIn);
    CHECK(decide(p, "/a", 200, cc("max-age=60")).store);
    CHECK_FALSE(decide(p, "/a", 200, cc("max-age=0")).store);
    CHECK_FALSE(decide(p, "/a", 200, cc("")).store);
}

TEST_CASE("cloudfront and fastly defaults cache everything unless vetoed") {
    auto cf = builtin_profile("cloudfront_default");
    auto fa = builtin_profile("fastly_default");
    CHECK(decide(cf, "/account.php", 200, cc("")).reason == DecisionReason::DefaultAll);
    CHECK_FALSE(decide(cf, "/account.php", 200, cc("no-store")).store);
    CHECK(decide(fa, "/account.php", 200, cc("no-store")).store);
    CHECK_FALSE(decide(fa, "/account.php", 200, cc("private")).store);
}

TEST_CASE("custom rules run before the profile default") {
    CdnProfile p = builtin_profile("cloudfront_default");
    CacheRule never_static;
    never_static.glob = "/static/*";
    never_static.ttl = 60;
    never_static.override_headers = true;
    p.rules.push_back(never_static);
    CacheRule jpg;
    jpg.extensions = {"jpg"};
    jpg.honor.no_store = true;
    jpg.ttl = 10;
    p.rules.push_back(jpg);

    auto d = decide(p, "/static/app.js", 200, cc("no-store"));
    CHECK(d.store);
    CHECK(d.ttl == 60);
    CHECK_FALSE(decide(p, "/img/a.jpg", 200, cc("no-store")).store);
    CHECK(decide(p, "/img/a.jpg", 200, cc("private")).ttl == 10);
}

TEST_CASE("unknown builtin profile is a config error") {
    CHECK_THROWS_AS(builtin_profile("nope"), ConfigError);
    CHECK(builtin_profiles().size() == 4);
}

TEST_CASE("profiles load from JSON and round-trip") {
    auto profiles = load_profiles(R"({"profiles": [
        "akamai_default",
        {"name": "shop", "base": "cloudflare_default", "default_ttl": 120,
         "rules": [{"glob": "/assets/*", "ttl": 30, "honor": ["private"]}]},
        {"name": "bare", "default_cached": "all_objects", "honored": ["no-store"]}
    ]})");
    REQUIRE(profiles.size() == 3);
    CHECK(profiles[0].name == "akamai_default");
    CHECK(profiles[1].default_cached == DefaultCached::ExtensionListOrHeaderOptIn);
    CHECK(profiles[1].default_ttl == 120);
    REQUIRE(profiles[1].rules.size() == 1);
    CHECK(profiles[1].rules[0].honor.private_);
    CHECK(profiles[2].static_extensions == default_static_extensions());
    for (const auto& p : profiles) {
        auto again = profile_from_json(profile_to_json(p));
        CHECK(again.name == p.name);
        CHECK(again.default_cached == p.default_cached);
        CHECK(again.honored == p.honored);
        CHECK(again.static_extensions == p.static_extensions);
        CHECK(again.rules.size() == p.rules.size());
    }
}

TEST_CASE("bad profile JSON is rejected") {
    CHECK_THROWS_AS(load_profiles(R"({"profiles": [{"name": "x", "default_cached": "sometimes"}]})"), ConfigError);
    CHECK_THROWS_AS(load_profiles(R"({"profiles": [{"name": "x", "honored": ["maybe"]}]})"), ConfigError);
    CHECK_THROWS_AS(load_profiles(R"({"profiles": [{"name": "x", "default_ttl": -5}]})"), ConfigError);
    CHECK_THROWS_AS(load_profiles("not json"), ConfigError);
}
