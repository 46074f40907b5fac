#include "modio/swap.hpp"

#include "modio/net.hpp"

namespace modio {

void BandwidthMonitor::expire(std::size_t client, Time now) {
    auto& c = per_client_[client];
    while (!c.samples.empty() && c.samples.front().t <= now - window_) {
        c.bytes -= c.samples.front().bytes;
        c.samples.pop_front();
    }
}

void BandwidthMonitor::record(std::size_t client, std::uint32_t bytes, Time t) {
    auto& c = per_client_.at(client);
    c.samples.push_back({t, bytes});
    c.bytes += bytes;
    expire(client, t);
}

double BandwidthMonitor::mbps(std::size_t client, Time now) {
    expire(client, now);
    return static_cast<double>(per_client_.at(client).bytes) * 8.0 / window_.as_seconds() / 1e6;
}

std::vector<double> BandwidthMonitor::all_mbps(Time now) {
    std::vector<double> out;
    for (std::size_t i = 0; i < per_client_.size(); ++i) {
        out.push_back(mbps(i, now));
    }
    return out;
}

void BandwidthMonitor::reset() {
    for (auto& c : per_client_) {
        c.samples.clear();
        c.bytes = 0;
    }
}

Swapper::Swapper(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "swapper") {
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (it.key() != "target" && it.key() != "policy") {
            throw ConfigError(this->name() + ": unknown param '" + it.key() + "'");
        }
    }
    target_ = params.value("target", std::string("tx_virt"));
    policy_ = params.value("policy", nlohmann::json{{"variant", "token_bucket"},
                                                    {"limits", {{"1", {{"rate_mbps", 200.0}}}}}});
}

void Swapper::attach(Binder& b) { virt_channel_ = b.channel_to(target_); }

void Swapper::notified(Context& ctx, ChannelId channel) {
    ctx.charge_invocation();
    if (channel != virt_channel_) {
        return;
    }
    auto& rt = ctx.runtime();
    const auto target = rt.component_index(target_);
    auto* virt = dynamic_cast<TxVirt*>(&rt.component(target));
    if (virt == nullptr) {
        throw WiringError(name() + ": target '" + target_ + "' is not a tx_virt");
    }
    const auto policy = policy_;
    rt.schedule_maintenance(target, [virt, policy](Context& c) {
        // "current" reloads an identical copy of the running policy
        auto next = policy.is_string() && policy.get<std::string>() == "current"
                        ? virt->policy().clone()
                        : make_policy(policy, virt->clients());
        virt->swap_policy(c, std::move(next));
    });
    bump("swaps_requested");
}

} // namespace modio
