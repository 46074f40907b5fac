#include <gtest/gtest.h>

#include <array>
#include <deque>
#include <random>
#include <set>
#include <tuple>

#include "modio/checker.hpp"

using namespace modio;
using namespace modio::check;

namespace {

// What the protocol can observe: pcs, pending bits, and per queue the
// occupancy and both flags.
struct Abstract {
    std::array<int, 2> pc{};
    std::array<bool, 2> pending{};
    std::vector<std::tuple<std::uint32_t, bool, bool>> q;  // size, consumer flag, producer flag
    auto operator<=>(const Abstract&) const = default;
};

Abstract project(const State& s) {
    Abstract a;
    for (int c = 0; c < 2; ++c) {
        a.pc[c] = s.pc[c];
        a.pending[c] = s.pending[c];
    }
    for (const auto& q : s.q) {
        a.q.emplace_back(q.size(), q.signal_requested(Side::consumer),
                         q.signal_requested(Side::producer));
    }
    return a;
}

// Reference semantics over counts and booleans only, written from the
// instruction set's documentation.
bool abstract_enabled(const ProtocolModel& m, const Abstract& a, int c) {
    return m.program[c][a.pc[c]].op != Op::sleep || a.pending[c];
}

Abstract abstract_step(const ProtocolModel& m, Abstract a, int c) {
    const auto& in = m.program[c][a.pc[c]];
    auto& [size, cflag, pflag] = a.q[in.queue];
    bool& flag = in.side == Side::consumer ? cflag : pflag;
    int to = in.next;
    switch (in.op) {
    case Op::enqueue:
        if (size == m.capacity) to = in.alt; else ++size;
        break;
    case Op::dequeue:
        if (size == 0) to = in.alt; else --size;
        break;
    case Op::saw_empty: if (size != 1) to = in.alt; break;
    case Op::saw_full: if (size != m.capacity - 1) to = in.alt; break;
    case Op::test_empty: if (size != 0) to = in.alt; break;
    case Op::test_full: if (size != m.capacity) to = in.alt; break;
    case Op::test_flag: if (!flag) to = in.alt; break;
    case Op::set_flag: flag = true; break;
    case Op::clear_flag: flag = false; break;
    case Op::notify: a.pending[1 - c] = true; break;
    case Op::sleep: a.pending[c] = false; break;
    }
    a.pc[c] = to;
    return a;
}

struct Reach {
    std::set<Abstract> states;
    bool deadlock = false;
};

Reach reach_abstract(const ProtocolModel& m) {
    Reach r;
    std::deque<Abstract> todo{project(initial_state(m))};
    r.states.insert(todo.front());
    while (!todo.empty()) {
        auto a = todo.front();
        todo.pop_front();
        bool any = false;
        for (int c = 0; c < 2; ++c) {
            if (!abstract_enabled(m, a, c)) continue;
            any = true;
            auto b = abstract_step(m, a, c);
            if (r.states.insert(b).second) todo.push_back(b);
        }
        r.deadlock = r.deadlock || !any;
    }
    return r;
}

Reach reach_concrete(const ProtocolModel& m) {
    Reach r;
    std::set<std::uint64_t> seen;
    std::deque<State> todo{initial_state(m)};
    seen.insert(todo.front().key());
    while (!todo.empty()) {
        auto s = todo.front();
        todo.pop_front();
        r.states.insert(project(s));
        r.deadlock = r.deadlock || stuck(m, s);
        for (int c = 0; c < 2; ++c) {
            if (!enabled(m, s, c)) continue;
            auto t = s;
            step(m, t, c);
            if (seen.insert(t.key()).second) todo.push_back(t);
        }
    }
    return r;
}

} // namespace

TEST(Checker, OptimisedIsDeadlockFreeEverywhere) {
    for (auto t : {Topology::single, Topology::pair}) {
        for (std::uint32_t cap : {1u, 2u, 4u}) {
            auto r = explore(ProtocolModel::make(Variant::optimised, t, cap));
            EXPECT_EQ(r.verdict, Verdict::deadlock_free) << topology_name(t) << " " << cap;
            EXPECT_GT(r.states, 0u);
        }
    }
}

TEST(Checker, PessimisticIsDeadlockFree) {
    for (auto t : {Topology::single, Topology::pair}) {
        for (std::uint32_t cap : {1u, 2u, 4u}) {
            EXPECT_EQ(explore(ProtocolModel::make(Variant::pessimistic, t, cap)).verdict,
                      Verdict::deadlock_free);
        }
    }
}

TEST(Checker, EveryBugVariantHasAReplayableCounterexample) {
    for (auto v : {Variant::bug1, Variant::bug2, Variant::bug3, Variant::bug4}) {
        for (std::uint32_t cap : {1u, 2u, 4u}) {
            const auto m = ProtocolModel::make(v, Topology::single, cap);
            auto r = explore(m);
            ASSERT_EQ(r.verdict, Verdict::deadlock) << variant_name(v) << " " << cap;
            ASSERT_FALSE(r.trace.empty());
            const auto end = replay(r.trace, m);
            EXPECT_TRUE(stuck(m, end)) << variant_name(v);
            EXPECT_FALSE(enabled(m, end, 0));
            EXPECT_FALSE(enabled(m, end, 1));
            EXPECT_EQ(describe(m, end), r.stuck);
        }
    }
}

TEST(Checker, TraceStopsAtFirstStuckState) {
    const auto m = ProtocolModel::make(Variant::bug3, Topology::single, 1);
    auto r = explore(m);
    ASSERT_EQ(r.verdict, Verdict::deadlock);
    for (std::size_t n = 0; n < r.trace.size(); ++n) {
        std::vector<Step> prefix(r.trace.begin(), r.trace.begin() + static_cast<long>(n));
        EXPECT_FALSE(stuck(m, replay(prefix, m))) << n;
    }
}

TEST(Checker, ReplayEmptyTraceIsInitialState) {
    const auto m = ProtocolModel::make(Variant::optimised, Topology::pair, 2);
    EXPECT_EQ(replay({}, m).key(), initial_state(m).key());
}

TEST(Checker, ReplayRejectsBadTraces) {
    const auto m = ProtocolModel::make(Variant::optimised, Topology::single, 2);
    // consumer starts asleep with nothing pending
    EXPECT_THROW(replay({{1, "wake"}}, m), std::invalid_argument);
    EXPECT_THROW(replay({{0, "dequeue q0"}}, m), std::invalid_argument);
    EXPECT_NO_THROW(replay({{0, "enqueue q0"}}, m));
}

TEST(Checker, StateCapGivesInconclusive) {
    auto r = explore(ProtocolModel::make(Variant::optimised, Topology::pair, 4), 100);
    EXPECT_EQ(r.verdict, Verdict::inconclusive);
}

TEST(Checker, RejectsUnsupportedCapacity) {
    EXPECT_THROW(ProtocolModel::make(Variant::optimised, Topology::single, 3), ConfigError);
    EXPECT_THROW(ProtocolModel::make(Variant::optimised, Topology::single, 8), ConfigError);
}

TEST(Checker, NamesRoundTrip) {
    for (auto v : all_variants()) EXPECT_EQ(parse_variant(variant_name(v)), v);
    EXPECT_EQ(parse_variant("optimized"), Variant::optimised);
    EXPECT_FALSE(parse_variant("bug-9"));
    EXPECT_EQ(parse_topology("pair"), Topology::pair);
    EXPECT_FALSE(parse_topology("ring"));
}

TEST(Checker, MatchesAbstractQueueModelAtSmallCapacity) {
    for (auto v : all_variants()) {
        for (auto t : {Topology::single, Topology::pair}) {
            for (std::uint32_t cap : {1u, 2u}) {
                const auto m = ProtocolModel::make(v, t, cap);
                const auto want = reach_abstract(m);
                const auto got = reach_concrete(m);
                const auto what = variant_name(v) + " " + topology_name(t) + " " + std::to_string(cap);
                EXPECT_EQ(got.states, want.states) << what;
                EXPECT_EQ(got.deadlock, want.deadlock) << what;
                const auto r = explore(m);
                EXPECT_EQ(r.verdict == Verdict::deadlock, want.deadlock) << variant_name(v);
            }
        }
    }
}

TEST(Checker, RandomWalkKeepsQueueCountsInStep) {
    std::mt19937 rng(11);
    const auto m = ProtocolModel::make(Variant::optimised, Topology::pair, 2);
    auto s = initial_state(m);
    auto a = project(s);
    for (int i = 0; i < 20'000; ++i) {
        std::vector<int> ready;
        for (int c = 0; c < 2; ++c) {
            if (enabled(m, s, c)) ready.push_back(c);
        }
        ASSERT_FALSE(ready.empty());
        const int c = ready[rng() % ready.size()];
        step(m, s, c);
        a = abstract_step(m, a, c);
        ASSERT_EQ(project(s), a) << "step " << i;
    }
}
