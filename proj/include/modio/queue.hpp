#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace modio {

/// Raised for malformed configuration: bad queue sizes, unknown scenario
/// keys, inconsistent parameters.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reference to one slot of a data region. Queues carry these, never payload.
struct BufferDescriptor {
    static constexpr std::uint32_t kBroadcast = 1u << 0;

    std::uint64_t offset = 0;
    std::uint32_t length = 0;
    std::uint32_t flags = 0;

    bool broadcast() const { return (flags & kBroadcast) != 0; }
    friend bool operator==(const BufferDescriptor&, const BufferDescriptor&) = default;
};

enum class Side { producer, consumer };

/// Bounded single-producer single-consumer ring.
///
/// `head_` and `tail_` are free-running counters; the slot for logical index
/// i is `entries_[i & mask_]`. Occupancy is `head_ - tail_` in unsigned
/// arithmetic, so full and empty are distinguishable without a spare slot.
/// The producer only writes `head_` and the consumer only writes `tail_`;
/// each side publishes with release and observes the other with acquire.
template <typename Entry>
class SpscQueue {
public:
    explicit SpscQueue(std::uint32_t capacity) {
        if (capacity == 0 || !std::has_single_bit(capacity) || capacity > (1u << 30)) {
            throw ConfigError("queue capacity must be a power of two >= 1, got " +
                              std::to_string(capacity));
        }
        entries_.resize(capacity);
        mask_ = capacity - 1;
    }

    SpscQueue(const SpscQueue& o)
        : entries_(o.entries_), mask_(o.mask_),
          head_(o.head_.load(std::memory_order_relaxed)),
          tail_(o.tail_.load(std::memory_order_relaxed)),
          consumer_wants_signal_(o.consumer_wants_signal_.load(std::memory_order_relaxed)),
          producer_wants_signal_(o.producer_wants_signal_.load(std::memory_order_relaxed)) {}

    SpscQueue& operator=(const SpscQueue& o) {
        if (this != &o) {
            entries_ = o.entries_;
            mask_ = o.mask_;
            head_.store(o.head_.load(std::memory_order_relaxed), std::memory_order_relaxed);
            tail_.store(o.tail_.load(std::memory_order_relaxed), std::memory_order_relaxed);
            consumer_wants_signal_.store(o.consumer_wants_signal_.load(std::memory_order_relaxed),
                                         std::memory_order_relaxed);
            producer_wants_signal_.store(o.producer_wants_signal_.load(std::memory_order_relaxed),
                                         std::memory_order_relaxed);
        }
        return *this;
    }

    std::uint32_t capacity() const { return mask_ + 1; }
    std::uint32_t size() const {
        return head_.load(std::memory_order_acquire) - tail_.load(std::memory_order_acquire);
    }
    bool empty() const { return size() == 0; }
    bool full() const { return size() == capacity(); }

    /// Producer side. Returns false (queue unchanged) when full.
    [[nodiscard]] bool enqueue(const Entry& e) {
        const auto head = head_.load(std::memory_order_relaxed);
        const auto tail = tail_.load(std::memory_order_acquire);
        if (head - tail == capacity()) {
            return false;
        }
        entries_[head & mask_] = e;
        head_.store(head + 1, std::memory_order_release);
        return true;
    }

    /// Consumer side. Returns nullopt (queue unchanged) when empty.
    [[nodiscard]] std::optional<Entry> dequeue() {
        const auto tail = tail_.load(std::memory_order_relaxed);
        const auto head = head_.load(std::memory_order_acquire);
        if (head == tail) {
            return std::nullopt;
        }
        Entry e = entries_[tail & mask_];
        tail_.store(tail + 1, std::memory_order_release);
        return e;
    }

    /// Consumer side: oldest entry without removing it.
    const Entry* peek() const {
        const auto tail = tail_.load(std::memory_order_relaxed);
        if (head_.load(std::memory_order_acquire) == tail) {
            return nullptr;
        }
        return &entries_[tail & mask_];
    }

    /// Entry at logical position `i` from the tail (0 = oldest). Audit use only.
    const Entry& at(std::uint32_t i) const { return entries_[(tail_.load() + i) & mask_]; }

    bool signal_requested(Side side) const {
        return side == Side::consumer ? consumer_wants_signal_.load(std::memory_order_acquire)
                                      : producer_wants_signal_.load(std::memory_order_acquire);
    }

    void set_signal_request(Side side, bool value) {
        auto& flag = side == Side::consumer ? consumer_wants_signal_ : producer_wants_signal_;
        flag.store(value, std::memory_order_seq_cst);
    }

    std::uint32_t head() const { return head_.load(std::memory_order_relaxed); }
    std::uint32_t tail() const { return tail_.load(std::memory_order_relaxed); }

    /// Shift both counters so that `tail` lies in [0, capacity). Slot
    /// addressing is unchanged, so behaviour is identical; the state checker
    /// uses this to keep its state space finite.
    void normalise_counters() {
        const auto tail = tail_.load(std::memory_order_relaxed);
        const auto shift = tail & ~mask_;
        tail_.store(tail - shift, std::memory_order_relaxed);
        head_.store(head_.load(std::memory_order_relaxed) - shift, std::memory_order_relaxed);
    }

private:
    std::vector<Entry> entries_;
    std::uint32_t mask_ = 0;
    std::atomic<std::uint32_t> head_{0};
    std::atomic<std::uint32_t> tail_{0};
    // Both flags start set so the first transition on each side notifies.
    std::atomic<bool> consumer_wants_signal_{true};
    std::atomic<bool> producer_wants_signal_{true};
};

/// Producer-side decision after a successful enqueue: notify only on the
/// empty -> non-empty transition, and only if the consumer asked for it.
template <typename Entry>
bool producer_should_signal(const SpscQueue<Entry>& q, bool was_empty_before_enqueue) {
    return was_empty_before_enqueue && q.signal_requested(Side::consumer);
}

/// Consumer-side decision after a successful dequeue: notify only on the
/// full -> non-full transition, and only if the producer asked for it.
template <typename Entry>
bool consumer_should_signal(const SpscQueue<Entry>& q, bool was_full_before_dequeue) {
    return was_full_before_dequeue && q.signal_requested(Side::producer);
}

} // namespace modio
