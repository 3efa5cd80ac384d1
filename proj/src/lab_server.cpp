#include "wcd/lab_server.h"

#include <httplib.h>

#include <stdexcept>

namespace wcd::lab {

struct LabServer::Impl {
    httplib::Server server;
};

namespace {

std::string lowercase(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string host_without_port(std::string host) {
    if (auto colon = host.rfind(':'); colon != std::string::npos && host.find(']') == std::string::npos)
        host.erase(colon);
    return lowercase(std::move(host));
}

} // namespace

LabServer::LabServer(std::vector<SimSite> sites) : impl_(std::make_unique<Impl>()) {
    for (auto& s : sites) {
        auto host = s.host;
        if (!slots_.try_emplace(host, std::make_unique<Slot>(std::move(s))).second)
            throw ConfigError("duplicate lab host " + host);
    }

    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        auto host = host_without_port(req.get_header_value("Host"));
        if (req.path == "/__lab/clock") {
            auto it = slots_.find(host);
            if (it == slots_.end() || !req.has_param("advance")) {
                res.status = 400;
                return;
            }
            long long secs = std::stoll(req.get_param_value("advance"));
            std::lock_guard lock(it->second->mu);
            it->second->runtime.advance(secs);
            res.status = 200;
            res.set_content(std::to_string(it->second->runtime.clock().now), "text/plain");
            return;
        }
        ++requests_;
        {
            std::lock_guard lock(log_mu_);
            arrivals_[host].push_back(std::chrono::steady_clock::now());
        }
        auto it = slots_.find(host);
        if (it == slots_.end()) {
            res.status = 421;
            res.set_content("unknown lab host " + host, "text/plain");
            return;
        }
        LabRequest lr;
        lr.method = req.method;
        lr.target = req.target;
        for (const auto& [k, v] : req.headers) lr.headers.emplace_back(k, v);
        lr.body = req.body;
        if (req.has_header("X-Lab-Region")) lr.region = req.get_header_value("X-Lab-Region");

        LabResponse out;
        {
            std::lock_guard lock(it->second->mu);
            out = it->second->runtime.proxy_handle(lr);
        }
        res.status = out.status;
        std::string content_type = "text/html";
        for (const auto& [k, v] : out.headers) {
            if (lowercase(k) == "content-type") content_type = v;
            else res.headers.emplace(k, v);
        }
        res.set_content(out.body, content_type);
    };
    impl_->server.Get(R"([\s\S]*)", handler);
    impl_->server.Post(R"([\s\S]*)", handler);
    impl_->server.set_keep_alive_max_count(1);
}

LabServer::~LabServer() { stop(); }

int LabServer::start(const std::string& address, int port) {
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(address);
    } else {
        if (!impl_->server.bind_to_port(address, port)) port_ = -1;
        else port_ = port;
    }
    if (port_ <= 0) throw std::runtime_error("lab server could not bind " + address + ":" + std::to_string(port));
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port_;
}

void LabServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

void LabServer::wait() {
    if (thread_.joinable()) thread_.join();
}

std::vector<std::string> LabServer::hosts() const {
    std::vector<std::string> out;
    for (const auto& [host, slot] : slots_) out.push_back(host);
    return out;
}

LabServer::Slot& LabServer::slot_for(const std::string& host) {
    auto it = slots_.find(host);
    if (it == slots_.end()) throw std::out_of_range("unknown lab host " + host);
    return *it->second;
}

void LabServer::advance_clock(const std::string& host, long long seconds) {
    with_site(host, [&](SiteRuntime& rt) {
        rt.advance(seconds);
        return 0;
    });
}

std::map<std::string, std::vector<std::chrono::steady_clock::time_point>> LabServer::arrivals() const {
    std::lock_guard lock(log_mu_);
    return arrivals_;
}

} // namespace wcd::lab
