#include "wcd/http_engine.h"

#include <catch_amalgamated.hpp>
#include <httplib.h>

#include <atomic>
#include <deque>
#include <functional>
#include <thread>

using namespace wcd;

namespace {

// Scripted transport: a handler decides each response and every request is
// recorded.
class FakeTransport : public Transport {
public:
    using Handler = std::function<RawResponse(const RawRequest&)>;
    explicit FakeTransport(Handler h) : handler_(std::move(h)) {}

    RawResponse send(const RawRequest& request) override {
        std::lock_guard lock(mu_);
        requests.push_back(request);
        return handler_(request);
    }

    std::vector<RawRequest> requests;

private:
    std::mutex mu_;
    Handler handler_;
};

std::optional<std::string> header(const RawRequest& r, std::string_view name) { return find_header(r.headers, name); }

struct Fixed {
    long long now = 1000;
    EpochClock clock() {
        return [this] { return now; };
    }
};

} // namespace

TEST_CASE("cookie jar stores, replaces, scopes and expires cookies") {
    CookieJar jar;
    jar.store("shop.example.com", "sid=abc; Path=/; HttpOnly", 100);
    jar.store("shop.example.com", "pref=dark; Max-Age=10", 100);
    CHECK(jar.header_for("shop.example.com", 100) == "sid=abc; pref=dark");
    CHECK(jar.header_for("shop.example.com", 111) == "sid=abc");
    CHECK(jar.header_for("other.example.com", 100).empty());

    jar.store("shop.example.com", "sid=def", 100);
    CHECK(jar.find("sid")->value == "def");
    jar.store("shop.example.com", "sid=; Max-Age=0", 100);
    CHECK_FALSE(jar.find("sid").has_value());

    jar.store("www.example.com", "wide=1; Domain=.example.com", 100);
    CHECK(jar.header_for("api.example.com", 100).find("wide=1") != std::string::npos);
    jar.store("www.example.com", "evil=1; Domain=attacker.test", 100);
    CHECK(jar.header_for("attacker.test", 100).empty());

    jar.store("x.example", "old=1; Expires=Thu, 01 Jan 1970 00:00:10 GMT", 100);
    CHECK_FALSE(jar.find("old").has_value());
    jar.store("x.example", "garbage-without-equals", 100);
    CHECK_FALSE(jar.find("garbage-without-equals").has_value());
}

TEST_CASE("fetch follows redirects and collects cookies along the way") {
    FakeTransport t([](const RawRequest& r) {
        if (r.url.raw_path == "/start") return RawResponse{302, {{"Location", "/next"}, {"Set-Cookie", "a=1"}}, ""};
        if (r.url.raw_path == "/next") return RawResponse{301, {{"location", "http://s.example/final?x=1"}}, ""};
        return RawResponse{200, {}, "done"};
    });
    HttpEngine engine(std::shared_ptr<Transport>(&t, [](Transport*) {}), nullptr);
    Identity id{Role::Victim, {}, std::nullopt, ""};
    auto ex = engine.fetch(id, "http://s.example/start");
    CHECK(ex.status == 200);
    CHECK(ex.body == "done");
    CHECK(ex.hops == std::vector<std::string>{"http://s.example/start", "http://s.example/next",
                                              "http://s.example/final?x=1"});
    CHECK(header(t.requests[1], "Cookie") == "a=1");
    CHECK(header(t.requests[0], "User-Agent") == std::string(kDefaultUserAgent));
}

TEST_CASE("redirect loops stop at the configured limit") {
    FakeTransport t([](const RawRequest&) { return RawResponse{302, {{"Location", "/loop"}}, ""}; });
    HttpEngine engine(std::shared_ptr<Transport>(&t, [](Transport*) {}), nullptr, EngineOptions{3, 0, {}});
    Identity id;
    CHECK_THROWS_AS(engine.fetch(id, "http://s.example/loop"), TooManyRedirects);
    CHECK(t.requests.size() == 4);
}

TEST_CASE("unauthenticated identity never sends or keeps cookies") {
    FakeTransport t([](const RawRequest&) { return RawResponse{200, {{"Set-Cookie", "sid=zzz"}}, ""}; });
    HttpEngine engine(std::shared_ptr<Transport>(&t, [](Transport*) {}), nullptr);
    Identity anon;
    anon.cookie_jar.put({"s.example", "sid", "leaked", std::nullopt});
    engine.fetch(anon, "http://s.example/");
    engine.fetch(anon, "http://s.example/");
    for (const auto& r : t.requests) CHECK_FALSE(header(r, "Cookie").has_value());
    CHECK(anon.cookie_jar.find("sid")->value == "leaked");
}

TEST_CASE("network errors are retried, then surface") {
    int failures = 2;
    FakeTransport t([&](const RawRequest&) -> RawResponse {
        if (failures-- > 0) throw NetworkError("reset");
        return {200, {}, "ok"};
    });
    HttpEngine engine(std::shared_ptr<Transport>(&t, [](Transport*) {}), nullptr,
                      EngineOptions{5, 2, std::chrono::milliseconds(1)});
    Identity id;
    CHECK(engine.fetch(id, "http://s.example/").body == "ok");

    FakeTransport dead([](const RawRequest&) -> RawResponse { throw NetworkError("refused"); });
    HttpEngine engine2(std::shared_ptr<Transport>(&dead, [](Transport*) {}), nullptr,
                       EngineOptions{5, 1, std::chrono::milliseconds(1)});
    CHECK_THROWS_AS(engine2.fetch(id, "http://s.example/"), NetworkError);
    CHECK(dead.requests.size() == 2);
}

TEST_CASE("login posts the form and requires the session cookie") {
    FakeTransport t([](const RawRequest& r) {
        if (r.method == "POST" && r.url.raw_path == "/login") {
            if (r.body == "username=alice&password=p%40ss%20word")
                return RawResponse{302, {{"Location", "/home"}, {"Set-Cookie", "sid=s1; Max-Age=100"}}, ""};
            return RawResponse{401, {}, "bad"};
        }
        return RawResponse{200, {}, "Welcome back"};
    });
    Fixed clock;
    HttpEngine engine(std::shared_ptr<Transport>(&t, [](Transport*) {}), nullptr, {}, clock.clock());

    LoginDescriptor d{"http://s.example/login", "POST", {{"username", "alice"}, {"password", "p@ss word"}}, "sid", "Welcome"};
    Identity victim{Role::Victim, {}, d, ""};
    engine.login(victim);
    CHECK(engine.session_valid(victim));
    CHECK(header(t.requests[0], "Content-Type") == "application/x-www-form-urlencoded");
    CHECK(t.requests[1].method == "GET");

    auto before = t.requests.size();
    victim = engine.maintain_session(std::move(victim));
    CHECK(t.requests.size() == before);

    clock.now += 101;
    CHECK_FALSE(engine.session_valid(victim));
    victim = engine.maintain_session(std::move(victim));
    CHECK(t.requests.size() == before + 2);

    auto wrong = d;
    wrong.fields[1].second = "nope";
    Identity bad{Role::Attacker, {}, wrong, ""};
    CHECK_THROWS_AS(engine.login(bad), AuthFailure);

    auto picky = d;
    picky.success_contains = "Admin console";
    Identity strict{Role::Victim, {}, picky, ""};
    CHECK_THROWS_AS(engine.login(strict), AuthFailure);

    Identity none;
    CHECK_THROWS_AS(engine.login(none), AuthFailure);
}

TEST_CASE("logout detection matches on word boundaries") {
    CHECK(is_logout_link("http://s.example/logout"));
    CHECK(is_logout_link("/account/Sign-Out?next=/"));
    CHECK(is_logout_link("/index.php?action=logout"));
    CHECK(is_logout_link("/session/destroy"));
    CHECK_FALSE(is_logout_link("/blog/logouts-considered-harmful"));
    CHECK_FALSE(is_logout_link("/catalogue"));
    CHECK_FALSE(is_logout_link("http://logout.example/home"));
    CHECK(is_logout_link("/exit", {"exit"}));
}

TEST_CASE("form encoding escapes reserved characters") {
    CHECK(form_encode({{"a", "1 2"}, {"b&c", "x=y"}}) == "a=1%202&b%26c=x%3Dy");
    CHECK(form_encode({}).empty());
}

TEST_CASE("rate limiter spaces requests per host") {
    RateLimiter limiter(10.0, std::chrono::milliseconds(0));
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < 11; ++i) limiter.acquire("a.example");
    auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(elapsed >= std::chrono::milliseconds(990));

    auto other = std::chrono::steady_clock::now();
    limiter.acquire("b.example");
    CHECK(std::chrono::steady_clock::now() - other < std::chrono::milliseconds(50));
    CHECK_THROWS_AS(RateLimiter(0.0), std::invalid_argument);
}

TEST_CASE("non-integer rates never exceed the rate in any second") {
    RateLimiter limiter(2.5, std::chrono::milliseconds(0));
    std::vector<std::chrono::steady_clock::time_point> times;
    for (int i = 0; i < 5; ++i) {
        limiter.acquire("h");
        times.push_back(std::chrono::steady_clock::now());
    }
    CHECK(times[2] - times[0] >= std::chrono::milliseconds(1000));
    CHECK(times[4] - times[2] >= std::chrono::milliseconds(1000));
}

TEST_CASE("fractional rates allow one request per period") {
    RateLimiter half(0.5, std::chrono::milliseconds(0));
    half.acquire("h");
    auto start = std::chrono::steady_clock::now();
    std::atomic<bool> done{false};
    std::thread t([&] {
        half.acquire("h");
        done = true;
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    CHECK_FALSE(done.load());
    t.join();
    CHECK(std::chrono::steady_clock::now() - start >= std::chrono::milliseconds(1900));
}

TEST_CASE("HTTP transport sends the request target byte-for-byte") {
    httplib::Server server;
    server.Get(R"([\s\S]*)", [](const httplib::Request& req, httplib::Response& res) {
        res.set_content(req.target + "|" + req.get_header_value("Host"), "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    TransportOptions opts;
    opts.resolve["*.test"] = "127.0.0.1";
    auto transport = std::shared_ptr<Transport>(make_http_transport(opts));
    HttpEngine engine(transport, nullptr);
    Identity anon;
    const std::string base = "http://shop.test:" + std::to_string(port);
    for (std::string target : {"/account.php%0Aabc.css", "/account.php%3Babc.css", "/account.php%23abc.css",
                               "/account.php%3Fabc.css", "/a%2Fb/c?x=%20y&z"}) {
        auto ex = engine.fetch(anon, base + target);
        CHECK(ex.body == target + "|shop.test:" + std::to_string(port));
    }

    TransportOptions none;
    auto unresolved = std::shared_ptr<Transport>(make_http_transport(none));
    HttpEngine engine2(unresolved, nullptr, EngineOptions{5, 0, {}});
    CHECK_THROWS_AS(engine2.fetch(anon, "http://127.0.0.1:1/"), NetworkError);

    server.stop();
    th.join();
}

TEST_CASE("proxy settings come from the environment when unset") {
    TransportOptions opts;
    ::setenv("http_proxy", "http://proxy.internal:3128", 1);
    apply_proxy_environment(opts);
    ::unsetenv("http_proxy");
    CHECK(opts.proxy_host == "proxy.internal");
    CHECK(opts.proxy_port == 3128);

    TransportOptions preset;
    preset.proxy_host = "explicit";
    ::setenv("http_proxy", "http://other:1", 1);
    apply_proxy_environment(preset);
    ::unsetenv("http_proxy");
    CHECK(preset.proxy_host == "explicit");
}
