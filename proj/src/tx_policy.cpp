#include "modio/tx_policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "modio/queue.hpp"

namespace modio {

std::optional<std::size_t> RoundRobinPolicy::pick(std::span<const std::uint32_t> head_len, Time) {
    const auto n = head_len.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = (cursor_ + k) % n;
        if (head_len[i] != 0) {
            return i;
        }
    }
    return std::nullopt;
}

StrictPriorityPolicy::StrictPriorityPolicy(std::size_t clients, std::vector<std::size_t> order) {
    std::set<std::size_t> seen;
    for (auto c : order) {
        if (c >= clients || !seen.insert(c).second) {
            throw ConfigError("strict_priority: bad client index " + std::to_string(c));
        }
        order_.push_back(c);
    }
    for (std::size_t c = 0; c < clients; ++c) {
        if (seen.count(c) == 0) {
            order_.push_back(c);
        }
    }
}

std::optional<std::size_t> StrictPriorityPolicy::pick(std::span<const std::uint32_t> head_len,
                                                      Time) {
    for (auto c : order_) {
        if (head_len[c] != 0) {
            return c;
        }
    }
    return std::nullopt;
}

nlohmann::json StrictPriorityPolicy::config() const {
    return {{"variant", "strict_priority"}, {"order", order_}};
}

TokenBucketPolicy::TokenBucketPolicy(std::size_t clients,
                                     std::vector<std::optional<BucketLimit>> limits) {
    limits.resize(clients);
    for (auto& l : limits) {
        Bucket b;
        if (l) {
            if (l->rate_mbps <= 0 || l->burst_bytes == 0) {
                throw ConfigError("token_bucket: rate and burst must be positive");
            }
            b.limit = l;
            b.tokens = static_cast<double>(l->burst_bytes);
        }
        buckets_.push_back(b);
    }
}

void TokenBucketPolicy::refill(std::size_t client, Time now) {
    auto& b = buckets_[client];
    if (!b.limit) {
        return;
    }
    if (now > b.updated) {
        const double add = b.limit->rate_mbps * 1e6 / 8.0 * (now - b.updated).as_seconds();
        b.tokens = std::min(static_cast<double>(b.limit->burst_bytes), b.tokens + add);
        b.updated = now;
    }
}

double TokenBucketPolicy::tokens(std::size_t client, Time now) const {
    auto copy = *this;
    copy.refill(client, now);
    return copy.buckets_[client].tokens;
}

std::optional<std::size_t> TokenBucketPolicy::pick(std::span<const std::uint32_t> head_len,
                                                   Time now) {
    const auto n = head_len.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = (cursor_ + k) % n;
        if (head_len[i] == 0) {
            continue;
        }
        refill(i, now);
        const auto& b = buckets_[i];
        if (!b.limit || b.tokens >= static_cast<double>(head_len[i])) {
            return i;
        }
    }
    return std::nullopt;
}

void TokenBucketPolicy::on_sent(std::size_t client, std::uint32_t bytes, Time now) {
    cursor_ = client + 1;
    auto& b = buckets_[client];
    if (b.limit) {
        refill(client, now);
        b.tokens -= static_cast<double>(bytes);
    }
}

std::optional<Time> TokenBucketPolicy::next_eligible(std::span<const std::uint32_t> head_len,
                                                     Time now) const {
    std::optional<Time> best;
    for (std::size_t i = 0; i < head_len.size(); ++i) {
        const auto& b = buckets_[i];
        if (head_len[i] == 0 || !b.limit) {
            continue;
        }
        const double have = tokens(i, now);
        const double need = static_cast<double>(head_len[i]) - have;
        if (need <= 0) {
            continue;
        }
        const double secs = need * 8.0 / (b.limit->rate_mbps * 1e6);
        // round up so the bucket really holds enough when we come back
        const Time t = now + Time::ps(static_cast<std::int64_t>(std::ceil(secs * 1e12)) + 1);
        if (!best || t < *best) {
            best = t;
        }
    }
    return best;
}

void TokenBucketPolicy::reset() {
    cursor_ = 0;
    for (auto& b : buckets_) {
        if (b.limit) {
            b.tokens = static_cast<double>(b.limit->burst_bytes);
        }
    }
}

nlohmann::json TokenBucketPolicy::config() const {
    nlohmann::json limits = nlohmann::json::object();
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
        if (buckets_[i].limit) {
            limits[std::to_string(i)] = {{"rate_mbps", buckets_[i].limit->rate_mbps},
                                         {"burst_bytes", buckets_[i].limit->burst_bytes}};
        }
    }
    return {{"variant", "token_bucket"}, {"limits", limits}};
}

std::unique_ptr<TxPolicy> make_policy(const nlohmann::json& config, std::size_t clients) {
    if (!config.is_object() || !config.contains("variant")) {
        throw ConfigError("policy: expected an object with a 'variant'");
    }
    const auto variant = config.at("variant").get<std::string>();
    auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
        for (auto it = config.begin(); it != config.end(); ++it) {
            if (std::none_of(allowed.begin(), allowed.end(),
                             [&](const char* a) { return it.key() == a; })) {
                throw ConfigError("policy " + variant + ": unknown key '" + it.key() + "'");
            }
        }
    };
    if (variant == "round_robin") {
        reject_unknown({"variant"});
        return std::make_unique<RoundRobinPolicy>(clients);
    }
    if (variant == "strict_priority") {
        reject_unknown({"variant", "order"});
        std::vector<std::size_t> order;
        if (config.contains("order")) {
            order = config.at("order").get<std::vector<std::size_t>>();
        }
        return std::make_unique<StrictPriorityPolicy>(clients, order);
    }
    if (variant == "token_bucket") {
        reject_unknown({"variant", "limits"});
        std::vector<std::optional<BucketLimit>> limits(clients);
        if (config.contains("limits")) {
            for (auto it = config.at("limits").begin(); it != config.at("limits").end(); ++it) {
                const auto idx = std::stoul(it.key());
                if (idx >= clients) {
                    throw ConfigError("token_bucket: client index " + it.key() + " out of range");
                }
                BucketLimit l;
                l.rate_mbps = it->at("rate_mbps").get<double>();
                l.burst_bytes = it->value("burst_bytes", kDefaultBurstBytes);
                limits[idx] = l;
            }
        }
        return std::make_unique<TokenBucketPolicy>(clients, std::move(limits));
    }
    throw ConfigError("policy: unknown variant '" + variant + "'");
}

} // namespace modio
