// HTTP identities, cookie jars, pacing and the fetch path used by every stage
// of a scan.

#pragma once

#include "wcd/url.h"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace wcd {

using Headers = std::vector<std::pair<std::string, std::string>>;

// Case-insensitive lookup of the first header with this name.
std::optional<std::string> find_header(const Headers& headers, std::string_view name);

enum class Role { Victim, Attacker, Unauthenticated };

std::string_view role_name(Role r);

struct Cookie {
    std::string domain;
    std::string name;
    std::string value;
    std::optional<long long> expiry; // epoch seconds; nullopt = session cookie

    bool operator==(const Cookie&) const = default;
};

class CookieJar {
public:
    // Applies one Set-Cookie header value received from host at time now.
    void store(std::string_view host, std::string_view set_cookie, long long now);
    void put(Cookie c);
    // "a=1; b=2" for cookies whose domain matches host and that are unexpired.
    std::string header_for(std::string_view host, long long now) const;
    std::optional<Cookie> find(std::string_view name) const;
    bool empty() const { return cookies_.empty(); }
    void clear() { cookies_.clear(); }
    const std::vector<Cookie>& cookies() const { return cookies_; }

private:
    std::vector<Cookie> cookies_;
};

// Declarative login: submit form fields to url, then check success.
struct LoginDescriptor {
    std::string url;
    std::string method = "POST";
    std::vector<std::pair<std::string, std::string>> fields;
    std::string session_cookie = "sid"; // must be present after login
    std::string success_contains;       // optional body predicate
};

struct Identity {
    Role role = Role::Unauthenticated;
    CookieJar cookie_jar;
    std::optional<LoginDescriptor> credentials;
    std::string user_agent;
};

struct RawRequest {
    std::string method = "GET";
    ParsedUrl url;
    Headers headers;
    std::string body;
};

struct RawResponse {
    int status = 0;
    Headers headers;
    std::string body;
};

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TooManyRedirects : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AuthFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Transport {
public:
    virtual ~Transport() = default;
    // Sends exactly one request; the request target is sent byte-for-byte.
    // Throws NetworkError.
    virtual RawResponse send(const RawRequest& request) = 0;
};

struct TransportOptions {
    // host -> address overrides, e.g. {"shop.test", "127.0.0.1"}. A "*.suffix"
    // key matches every host ending in ".suffix".
    std::map<std::string, std::string> resolve;
    std::chrono::milliseconds timeout{10000};
    std::optional<std::string> proxy_host; // defaults from http_proxy env
    int proxy_port = 0;
};

std::unique_ptr<Transport> make_http_transport(TransportOptions options = {});

// Applies http_proxy / HTTP_PROXY from the environment when no proxy is set.
void apply_proxy_environment(TransportOptions& options);

// At most `rate` requests per host within any window of one second (plus a
// small guard so arrival jitter cannot push a window over). Shared by all
// workers.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second, std::chrono::milliseconds guard = std::chrono::milliseconds(20));

    void acquire(const std::string& host);
    double rate() const { return rate_; }

private:
    double rate_;
    std::size_t capacity_;
    std::chrono::steady_clock::duration window_;
    std::mutex mu_;
    std::map<std::string, std::deque<std::chrono::steady_clock::time_point>> sent_;
};

struct HttpExchange {
    std::string url;
    std::string method;
    Headers request_headers;
    int status = 0;
    Headers response_headers;
    std::string body;
    long long timing_ms = 0;
    Role identity_role = Role::Unauthenticated;
    // Every URL requested, first to last, when redirects were followed.
    std::vector<std::string> hops;
};

struct EngineOptions {
    int max_redirects = 5;
    int max_retries = 2;
    std::chrono::milliseconds retry_backoff{50};
};

using EpochClock = std::function<long long()>;

long long system_epoch_seconds();

class HttpEngine {
public:
    HttpEngine(std::shared_ptr<Transport> transport, std::shared_ptr<RateLimiter> limiter,
               EngineOptions options = {}, EpochClock clock = system_epoch_seconds);

    HttpExchange fetch(Identity& identity, std::string_view url, std::string_view method = "GET",
                       const std::vector<std::pair<std::string, std::string>>& form = {});

    // Runs the login descriptor unconditionally. Throws AuthFailure.
    void login(Identity& identity);

    // Re-runs the login when the session cookie is missing or expired;
    // otherwise does nothing on the network.
    Identity maintain_session(Identity identity);

    bool session_valid(const Identity& identity) const;
    long long now() const { return clock_(); }

private:
    RawResponse send_with_retry(const RawRequest& request);

    std::shared_ptr<Transport> transport_;
    std::shared_ptr<RateLimiter> limiter_;
    EngineOptions options_;
    EpochClock clock_;
};

const std::vector<std::string>& default_logout_patterns();

// True when any pattern matches the URL's path or query on word boundaries,
// ignoring case. Accepts absolute URLs or bare paths.
bool is_logout_link(std::string_view url, const std::vector<std::string>& patterns = default_logout_patterns());

std::string form_encode(const std::vector<std::pair<std::string, std::string>>& fields);

inline constexpr std::string_view kDefaultUserAgent =
    "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/120.0.0.0 Safari/537.36";

} // namespace wcd
