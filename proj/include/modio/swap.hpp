#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modio/runtime.hpp"
#include "modio/time.hpp"

namespace modio {

/// Sliding-window transmit byte counts per client.
class BandwidthMonitor {
public:
    BandwidthMonitor() = default;
    BandwidthMonitor(std::size_t clients, Time window) : window_(window), per_client_(clients) {}

    void record(std::size_t client, std::uint32_t bytes, Time t);
    /// Mb/s over (now - window, now].
    double mbps(std::size_t client, Time now);
    std::vector<double> all_mbps(Time now);
    Time window() const { return window_; }
    void reset();

private:
    struct Sample {
        Time t;
        std::uint32_t bytes;
    };
    void expire(std::size_t client, Time now);

    Time window_ = Time::ms(10);
    struct Client {
        std::deque<Sample> samples;
        std::uint64_t bytes = 0;
    };
    std::vector<Client> per_client_;
};

/// Fires once when the watched client's estimate exceeds the threshold;
/// re-arm to fire again.
struct SwapTrigger {
    std::size_t client = 1;
    double threshold_mbps = 500.0;
    bool armed = true;

    /// True (and disarms) when the threshold is crossed while armed.
    bool check(double mbps) {
        if (armed && mbps > threshold_mbps) {
            armed = false;
            return true;
        }
        return false;
    }
};

struct SwapEvent {
    Time fired;
    Time applied;
    Time duration;
    std::uint64_t in_flight = 0;
    std::string from;
    std::string to;
};

/// Swaps the Tx virtualiser's policy when told to by the virtualiser's
/// trigger. Params: {"target": <tx_virt name>, "policy": {...}}.
class Swapper : public Component {
public:
    Swapper(std::string name, const nlohmann::json& params);

    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;

    const nlohmann::json& replacement() const { return policy_; }

private:
    std::string target_;
    nlohmann::json policy_;
    ChannelId virt_channel_ = 0;
};

} // namespace modio
