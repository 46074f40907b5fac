#include <gtest/gtest.h>

#include <deque>
#include <random>
#include <thread>

#include "modio/queue.hpp"

using namespace modio;

namespace {

BufferDescriptor desc(std::uint64_t i) { return {i * 2048, 64, 0}; }

} // namespace

TEST(Queue, RejectsBadCapacity) {
    EXPECT_THROW(SpscQueue<int>(0), ConfigError);
    EXPECT_THROW(SpscQueue<int>(3), ConfigError);
    EXPECT_THROW(SpscQueue<int>(1000), ConfigError);
    EXPECT_NO_THROW(SpscQueue<int>(1));
    EXPECT_NO_THROW(SpscQueue<int>(1024));
}

TEST(Queue, FillAndDrain) {
    SpscQueue<BufferDescriptor> q(4);
    for (std::uint64_t i = 0; i < 4; ++i) {
        ASSERT_TRUE(q.enqueue(desc(i)));
    }
    EXPECT_TRUE(q.full());
    EXPECT_FALSE(q.enqueue(desc(9)));
    EXPECT_EQ(q.size(), 4u);
    for (std::uint64_t i = 0; i < 4; ++i) {
        auto d = q.dequeue();
        ASSERT_TRUE(d);
        EXPECT_EQ(*d, desc(i));
    }
    EXPECT_TRUE(q.empty());
    EXPECT_FALSE(q.dequeue());
}

TEST(Queue, WrapsAcrossCounterOverflow) {
    SpscQueue<int> q(2);
    // drive the free-running counters far enough that the mask does the work
    for (int i = 0; i < 100'000; ++i) {
        ASSERT_TRUE(q.enqueue(i));
        ASSERT_EQ(*q.dequeue(), i);
    }
    EXPECT_EQ(q.head(), 100'000u);
    EXPECT_EQ(q.tail(), 100'000u);
}

TEST(Queue, FifoOracleRandomOps) {
    std::mt19937_64 rng(7);
    for (std::uint32_t cap : {1u, 2u, 4u, 16u, 64u}) {
        SpscQueue<std::uint64_t> q(cap);
        std::deque<std::uint64_t> ref;
        std::uint64_t next = 0;
        for (int op = 0; op < 10'000; ++op) {
            if (rng() % 2 == 0) {
                const bool ok = q.enqueue(next);
                ASSERT_EQ(ok, ref.size() < cap);
                if (ok) ref.push_back(next);
                ++next;
            } else {
                auto got = q.dequeue();
                ASSERT_EQ(got.has_value(), !ref.empty());
                if (got) {
                    ASSERT_EQ(*got, ref.front());
                    ref.pop_front();
                }
            }
            const auto occ = q.head() - q.tail();
            ASSERT_LE(occ, cap);
            ASSERT_EQ(occ, ref.size());
            for (std::uint32_t i = 0; i < ref.size(); ++i) {
                ASSERT_EQ(q.at(i), ref[i]);
            }
        }
    }
}

TEST(Queue, NormaliseKeepsBehaviour) {
    SpscQueue<int> a(4), b(4);
    for (int i = 0; i < 11; ++i) {
        ASSERT_TRUE(a.enqueue(i));
        ASSERT_TRUE(b.enqueue(i));
        if (i % 3 != 0 || a.full()) {
            (void)a.dequeue();
            (void)b.dequeue();
        }
        b.normalise_counters();
        ASSERT_LT(b.tail(), 4u);
        ASSERT_EQ(a.size(), b.size());
        ASSERT_EQ(a.tail() & 3u, b.tail() & 3u);
    }
    while (!a.empty()) {
        ASSERT_EQ(*a.dequeue(), *b.dequeue());
    }
}

TEST(Queue, FlagsStartSetAndAreIdempotent) {
    SpscQueue<int> q(2);
    EXPECT_TRUE(q.signal_requested(Side::consumer));
    EXPECT_TRUE(q.signal_requested(Side::producer));
    q.set_signal_request(Side::consumer, false);
    q.set_signal_request(Side::consumer, true);
    auto once = q;
    q.set_signal_request(Side::consumer, true);
    EXPECT_EQ(q.signal_requested(Side::consumer), once.signal_requested(Side::consumer));
    EXPECT_EQ(q.signal_requested(Side::producer), once.signal_requested(Side::producer));
}

TEST(Queue, ProducerSignalsOnlyOnEmptyToNonEmpty) {
    SpscQueue<int> q(4);
    ASSERT_TRUE(q.enqueue(1));
    EXPECT_TRUE(producer_should_signal(q, q.size() == 1));
    ASSERT_TRUE(q.enqueue(2));
    EXPECT_FALSE(producer_should_signal(q, q.size() == 1));
    // flag cleared: no signal even on the transition
    SpscQueue<int> r(4);
    r.set_signal_request(Side::consumer, false);
    ASSERT_TRUE(r.enqueue(1));
    EXPECT_FALSE(producer_should_signal(r, r.size() == 1));
}

TEST(Queue, ConsumerSignalsOnlyOnFullToNonFull) {
    SpscQueue<int> q(2);
    ASSERT_TRUE(q.enqueue(1));
    ASSERT_TRUE(q.enqueue(2));
    (void)q.dequeue();
    EXPECT_TRUE(consumer_should_signal(q, q.size() == q.capacity() - 1));
    (void)q.dequeue();
    EXPECT_FALSE(consumer_should_signal(q, q.size() == q.capacity() - 1));
    SpscQueue<int> r(2);
    r.set_signal_request(Side::producer, false);
    ASSERT_TRUE(r.enqueue(1));
    ASSERT_TRUE(r.enqueue(2));
    (void)r.dequeue();
    EXPECT_FALSE(consumer_should_signal(r, r.size() == r.capacity() - 1));
}

TEST(Queue, SignalsExactlyOnTransitionsOverRandomOps) {
    std::mt19937 rng(3);
    SpscQueue<int> q(4);
    for (int i = 0; i < 5000; ++i) {
        const auto before = q.size();
        if (rng() % 2) {
            if (q.enqueue(i)) {
                const bool sig = producer_should_signal(q, q.size() == 1);
                EXPECT_EQ(sig, before == 0);
            }
        } else if (q.dequeue()) {
            const bool sig = consumer_should_signal(q, q.size() == q.capacity() - 1);
            EXPECT_EQ(sig, before == q.capacity());
        }
    }
}

TEST(Queue, TwoThreadStressKeepsOrder) {
    constexpr std::uint64_t kItems = 200'000;
    SpscQueue<std::uint64_t> q(256);
    std::thread producer([&] {
        for (std::uint64_t i = 0; i < kItems;) {
            if (q.enqueue(i)) {
                ++i;
            } else {
                std::this_thread::yield();
            }
        }
    });
    std::uint64_t expect = 0;
    bool in_order = true;
    while (expect < kItems) {
        if (auto v = q.dequeue()) {
            in_order = in_order && *v == expect;
            ++expect;
        } else {
            std::this_thread::yield();
        }
    }
    producer.join();
    EXPECT_TRUE(in_order);
    EXPECT_TRUE(q.empty());
}
