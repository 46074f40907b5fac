#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "modio/time.hpp"

namespace modio {

/// Transmit-side sharing policy consulted by the Tx virtualiser.
///
/// `head_len[i]` is the length of the frame at the head of client i's TxA,
/// or 0 when that queue is empty.
class TxPolicy {
public:
    virtual ~TxPolicy() = default;

    virtual std::string name() const = 0;
    /// Client to serve next, or nullopt if no backlogged client is eligible.
    virtual std::optional<std::size_t> pick(std::span<const std::uint32_t> head_len, Time now) = 0;
    virtual void on_sent(std::size_t client, std::uint32_t bytes, Time now) = 0;
    /// Earliest time a backlogged but currently ineligible client becomes
    /// eligible. nullopt if no client is being held back.
    virtual std::optional<Time> next_eligible(std::span<const std::uint32_t> head_len,
                                              Time now) const = 0;
    /// Forget transient state (rotation index, bucket levels).
    virtual void reset() = 0;
    virtual nlohmann::json config() const = 0;
    virtual std::unique_ptr<TxPolicy> clone() const = 0;
};

class RoundRobinPolicy : public TxPolicy {
public:
    explicit RoundRobinPolicy(std::size_t clients) : clients_(clients) {}

    std::string name() const override { return "round_robin"; }
    std::optional<std::size_t> pick(std::span<const std::uint32_t> head_len, Time now) override;
    void on_sent(std::size_t client, std::uint32_t, Time) override { cursor_ = client + 1; }
    std::optional<Time> next_eligible(std::span<const std::uint32_t>, Time) const override {
        return std::nullopt;
    }
    void reset() override { cursor_ = 0; }
    nlohmann::json config() const override { return {{"variant", "round_robin"}}; }
    std::unique_ptr<TxPolicy> clone() const override {
        return std::make_unique<RoundRobinPolicy>(*this);
    }

    std::size_t cursor() const { return cursor_; }

private:
    std::size_t clients_;
    std::size_t cursor_ = 0;
};

class StrictPriorityPolicy : public TxPolicy {
public:
    /// `order` lists client indices, highest priority first. Clients not
    /// listed rank below all listed ones, in index order.
    StrictPriorityPolicy(std::size_t clients, std::vector<std::size_t> order);

    std::string name() const override { return "strict_priority"; }
    std::optional<std::size_t> pick(std::span<const std::uint32_t> head_len, Time now) override;
    void on_sent(std::size_t, std::uint32_t, Time) override {}
    std::optional<Time> next_eligible(std::span<const std::uint32_t>, Time) const override {
        return std::nullopt;
    }
    void reset() override {}
    nlohmann::json config() const override;
    std::unique_ptr<TxPolicy> clone() const override {
        return std::make_unique<StrictPriorityPolicy>(*this);
    }

    const std::vector<std::size_t>& order() const { return order_; }

private:
    std::vector<std::size_t> order_;
};

struct BucketLimit {
    double rate_mbps = 0.0;
    std::uint64_t burst_bytes = 0;
};

/// Per-client token buckets; clients without a limit are unconstrained.
/// Eligible clients are served round-robin.
class TokenBucketPolicy : public TxPolicy {
public:
    TokenBucketPolicy(std::size_t clients, std::vector<std::optional<BucketLimit>> limits);

    std::string name() const override { return "token_bucket"; }
    std::optional<std::size_t> pick(std::span<const std::uint32_t> head_len, Time now) override;
    void on_sent(std::size_t client, std::uint32_t bytes, Time now) override;
    std::optional<Time> next_eligible(std::span<const std::uint32_t> head_len,
                                      Time now) const override;
    void reset() override;
    nlohmann::json config() const override;
    std::unique_ptr<TxPolicy> clone() const override {
        return std::make_unique<TokenBucketPolicy>(*this);
    }

    /// Token level of `client` in bytes at time `now` (no side effects).
    double tokens(std::size_t client, Time now) const;

private:
    struct Bucket {
        std::optional<BucketLimit> limit;
        double tokens = 0.0;
        Time updated;
    };
    void refill(std::size_t client, Time now);

    std::vector<Bucket> buckets_;
    std::size_t cursor_ = 0;
};

/// Build a policy from {"variant": "round_robin" | "strict_priority" |
/// "token_bucket", ...}. Throws ConfigError on unknown variants or keys.
std::unique_ptr<TxPolicy> make_policy(const nlohmann::json& config, std::size_t clients);

/// Default token-bucket burst: ten full-size frames.
inline constexpr std::uint64_t kDefaultBurstBytes = 10 * 1518;

} // namespace modio
