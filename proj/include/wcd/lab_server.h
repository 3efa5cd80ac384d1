// Local HTTP listener that fronts a set of SiteRuntimes, dispatching on the
// Host header. Requests to one site are serialized; distinct sites proceed
// concurrently.
//
// Control endpoint (any host): POST /__lab/clock?advance=<seconds> moves that
// host's simulated clock forward.

#pragma once

#include "wcd/cache_lab.h"

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wcd::lab {

class LabServer {
public:
    explicit LabServer(std::vector<SimSite> sites);
    ~LabServer();

    LabServer(const LabServer&) = delete;
    LabServer& operator=(const LabServer&) = delete;

    // Binds to address:port (port 0 = ephemeral) and serves on a background
    // thread. Returns the bound port.
    int start(const std::string& address = "127.0.0.1", int port = 0);
    void stop();
    // Blocks until stop() is called from another thread or a signal handler.
    void wait();
    int port() const { return port_; }

    std::vector<std::string> hosts() const;
    // Runs fn with exclusive access to the site's runtime.
    template <typename Fn>
    auto with_site(const std::string& host, Fn&& fn) {
        auto& slot = slot_for(host);
        std::lock_guard lock(slot.mu);
        return fn(slot.runtime);
    }
    void advance_clock(const std::string& host, long long seconds);

    // Arrival times of every request, per host (control requests excluded).
    std::map<std::string, std::vector<std::chrono::steady_clock::time_point>> arrivals() const;
    std::size_t request_count() const { return requests_.load(); }

private:
    struct Slot {
        explicit Slot(SimSite site) : runtime(std::move(site)) {}
        std::mutex mu;
        SiteRuntime runtime;
    };
    Slot& slot_for(const std::string& host);

    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<std::size_t> requests_{0};
    mutable std::mutex log_mu_;
    std::map<std::string, std::vector<std::chrono::steady_clock::time_point>> arrivals_;
};

} // namespace wcd::lab
