#include <gtest/gtest.h>

#include <vector>

#include "modio/bench.hpp"
#include "modio/builders.hpp"
#include "modio/queue.hpp"
#include "modio/swap.hpp"
#include "modio/tx_policy.hpp"

using namespace modio;

TEST(RoundRobin, RotatesOverBackloggedClients) {
    RoundRobinPolicy p(4);
    std::vector<std::uint32_t> head{100, 0, 100, 100};
    std::vector<std::size_t> got;
    for (int i = 0; i < 6; ++i) {
        auto c = p.pick(head, Time{});
        ASSERT_TRUE(c);
        got.push_back(*c);
        p.on_sent(*c, 100, Time{});
    }
    EXPECT_EQ(got, (std::vector<std::size_t>{0, 2, 3, 0, 2, 3}));
    std::vector<std::uint32_t> idle(4, 0);
    EXPECT_FALSE(p.pick(idle, Time{}));
}

TEST(StrictPriority, HighestBackloggedWins) {
    StrictPriorityPolicy p(3, {2, 0});
    EXPECT_EQ(p.order(), (std::vector<std::size_t>{2, 0, 1}));
    std::vector<std::uint32_t> head{64, 64, 64};
    EXPECT_EQ(*p.pick(head, Time{}), 2u);
    head[2] = 0;
    EXPECT_EQ(*p.pick(head, Time{}), 0u);
    head[0] = 0;
    EXPECT_EQ(*p.pick(head, Time{}), 1u);
    EXPECT_THROW(StrictPriorityPolicy(3, {0, 0}), ConfigError);
    EXPECT_THROW(StrictPriorityPolicy(3, {3}), ConfigError);
}

TEST(TokenBucket, SentBytesNeverExceedRateTimesWindowPlusBurst) {
    const BucketLimit lim{200.0, kDefaultBurstBytes};
    TokenBucketPolicy p(2, {std::nullopt, lim});
    // client 1 always has a full-size frame waiting; time only moves when
    // the policy holds it back
    std::vector<std::uint32_t> head{0, 1518};
    std::vector<Time> sends;
    Time now;
    while (now < Time::ms(50)) {
        if (auto c = p.pick(head, now)) {
            ASSERT_EQ(*c, 1u);
            p.on_sent(1, 1518, now);
            sends.push_back(now);
            now = now + Time::ns(100);
        } else {
            auto t = p.next_eligible(head, now);
            ASSERT_TRUE(t);
            ASSERT_GT(*t, now);
            now = *t;
        }
    }
    const double bytes_per_s = lim.rate_mbps * 1e6 / 8.0;
    for (std::size_t i = 0; i < sends.size(); ++i) {
        for (std::size_t j = i; j < sends.size(); ++j) {
            const double sent = 1518.0 * static_cast<double>(j - i + 1);
            const double bound = bytes_per_s * (sends[j] - sends[i]).as_seconds() +
                                 static_cast<double>(lim.burst_bytes);
            ASSERT_LE(sent, bound + 1e-6) << i << ".." << j;
        }
    }
    // long-run rate converges on the limit
    const double rate = 1518.0 * 8.0 * static_cast<double>(sends.size() - 10) /
                        (sends.back() - sends[10]).as_seconds() / 1e6;
    EXPECT_NEAR(rate, 200.0, 2.0);
}

TEST(TokenBucket, UnlimitedClientsAreNeverHeld) {
    TokenBucketPolicy p(2, {std::nullopt, BucketLimit{1.0, 1518}});
    std::vector<std::uint32_t> head{1518, 1518};
    for (int i = 0; i < 100; ++i) {
        auto c = p.pick(head, Time{});
        ASSERT_TRUE(c);
        p.on_sent(*c, 1518, Time{});
    }
    // client 1 had one frame of burst, client 0 took the rest
    head[0] = 0;
    EXPECT_FALSE(p.pick(head, Time{}));
    EXPECT_TRUE(p.next_eligible(head, Time{}));
}

TEST(MakePolicy, ParsesVariantsAndRejectsJunk) {
    EXPECT_EQ(make_policy({{"variant", "round_robin"}}, 2)->name(), "round_robin");
    auto sp = make_policy({{"variant", "strict_priority"}, {"order", {1}}}, 2);
    EXPECT_EQ(sp->config()["order"], nlohmann::json({1, 0}));
    auto tb = make_policy({{"variant", "token_bucket"}, {"limits", {{"1", {{"rate_mbps", 200}}}}}}, 2);
    EXPECT_EQ(tb->config()["limits"]["1"]["burst_bytes"], kDefaultBurstBytes);
    EXPECT_THROW(make_policy({{"variant", "fifo"}}, 2), ConfigError);
    EXPECT_THROW(make_policy({{"variant", "round_robin"}, {"x", 1}}, 2), ConfigError);
    EXPECT_THROW(make_policy({{"variant", "token_bucket"}, {"limits", {{"5", {{"rate_mbps", 1}}}}}}, 2),
                 ConfigError);
}

TEST(Monitor, ReportsSteadyTenMegabits) {
    BandwidthMonitor m(2, Time::ms(100));
    const Time gap = Time::seconds(1518 * 8.0 / 10e6);
    Time t;
    for (int i = 0; i < 1000; ++i) {
        m.record(0, 1518, t);
        t = t + gap;
    }
    EXPECT_NEAR(m.mbps(0, t), 10.0, 0.2);
    EXPECT_EQ(m.mbps(1, t), 0.0);
    // nothing inside the window once traffic stops
    EXPECT_EQ(m.mbps(0, t + Time::ms(200)), 0.0);
}

TEST(Trigger, FiresOnceUntilRearmed) {
    SwapTrigger trig{1, 500.0, true};
    EXPECT_FALSE(trig.check(499.0));
    EXPECT_TRUE(trig.check(501.0));
    EXPECT_FALSE(trig.check(800.0));
    trig.armed = true;
    EXPECT_TRUE(trig.check(600.0));
}

TEST(Swap, ThrottlesRampingClientWithoutHurtingTheOther) {
    SwapOptions o;
    o.audit = true;
    auto r = run_scenario(swap_scenario(o));
    ASSERT_EQ(r.swaps.size(), 1u);
    const auto& e = r.swaps[0];
    EXPECT_EQ(e.duration, Time::us(17));
    EXPECT_EQ(e.from, "round_robin");
    EXPECT_EQ(e.to, "token_bucket");
    EXPECT_TRUE(r.audit_ok());
    EXPECT_EQ(r.report.counter("client0.tx_drops"), 0u);
    EXPECT_EQ(r.ledger.unaccounted(), 0);

    const auto rows = swap_rows(r);
    std::size_t after = 0;
    for (const auto& row : rows) {
        if (row.time_s > e.applied.as_seconds() + 0.1) {
            EXPECT_NEAR(row.client1_mbps, 200.0, 10.0) << row.time_s;
            EXPECT_NEAR(row.client0_mbps, 10.0, 0.5) << row.time_s;
            ++after;
        }
    }
    EXPECT_GT(after, 10u);
}

TEST(Swap, IdentityReplacementChangesNothingVisible) {
    SwapOptions o;
    o.threshold_mbps = 300;
    auto s = swap_scenario(o);
    s.find_component("swapper")->params["policy"] = "current";
    auto r = run_scenario(s);
    ASSERT_EQ(r.swaps.size(), 1u);
    EXPECT_EQ(r.swaps[0].from, "round_robin");
    EXPECT_EQ(r.swaps[0].to, "round_robin");

    // same run without the swap
    auto base = swap_scenario(o);
    base.find_component("tx_virt")->params.erase("trigger");
    auto b = run_scenario(base);
    EXPECT_TRUE(b.swaps.empty());
    EXPECT_EQ(r.ledger.echoed, b.ledger.echoed);
    EXPECT_EQ(r.summary.drops, b.summary.drops);
    EXPECT_NEAR(r.summary.achieved_mbps, b.summary.achieved_mbps, 0.001 * b.summary.achieved_mbps);
}
