#include "wcd/http_engine.h"

#include <httplib.h>

#include <cstdlib>

namespace wcd {

namespace {

class HttplibTransport : public Transport {
public:
    explicit HttplibTransport(TransportOptions options) : options_(std::move(options)) {}

    RawResponse send(const RawRequest& request) override {
        const auto& url = request.url;
        httplib::Client client(url.scheme + "://" + url.host + ":" + std::to_string(url.port));
        if (auto addr = resolve(url.host)) client.set_hostname_addr_map({{url.host, *addr}});
        client.set_url_encode(false);
        client.set_keep_alive(false);
        client.set_follow_location(false);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count();
        client.set_connection_timeout(static_cast<time_t>(secs), 0);
        client.set_read_timeout(static_cast<time_t>(secs), 0);
        if (options_.proxy_host) client.set_proxy(*options_.proxy_host, options_.proxy_port);

        httplib::Request req;
        req.method = request.method;
        req.path = url.target();
        for (const auto& [k, v] : request.headers) req.headers.emplace(k, v);
        req.body = request.body;

        auto result = client.send(req);
        if (!result) {
            throw NetworkError(url.str() + ": " + httplib::to_string(result.error()));
        }
        RawResponse out;
        out.status = result->status;
        for (const auto& [k, v] : result->headers) out.headers.emplace_back(k, v);
        out.body = std::move(result->body);
        return out;
    }

private:
    std::optional<std::string> resolve(const std::string& host) const {
        if (auto it = options_.resolve.find(host); it != options_.resolve.end()) return it->second;
        for (const auto& [pattern, addr] : options_.resolve) {
            if (pattern.starts_with("*.") && host.ends_with(pattern.substr(1))) return addr;
        }
        return std::nullopt;
    }

    TransportOptions options_;
};

} // namespace

void apply_proxy_environment(TransportOptions& options) {
    if (options.proxy_host) return;
    const char* env = std::getenv("http_proxy");
    if (!env) env = std::getenv("HTTP_PROXY");
    if (!env || !*env) return;
    try {
        auto url = parse_url(env);
        options.proxy_host = url.host;
        options.proxy_port = url.port;
    } catch (const MalformedUrl&) {
    }
}

std::unique_ptr<Transport> make_http_transport(TransportOptions options) {
    return std::make_unique<HttplibTransport>(std::move(options));
}

} // namespace wcd
