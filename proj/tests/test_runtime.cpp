#include <gtest/gtest.h>

#include <numeric>

#include "modio/bench.hpp"
#include "modio/builders.hpp"
#include "modio/net.hpp"
#include "modio/runtime.hpp"

using namespace modio;

namespace {

// Wakes at `at_us`, does `work` cycles, then signals each peer `signals` times.
class Pinger : public Component {
public:
    Pinger(std::string name, const nlohmann::json& p)
        : Component(std::move(name), "test_pinger"), params_(p) {}
    void attach(Binder& b) override {
        for (const auto& peer : params_.at("peers")) {
            peers_.push_back(b.channel_to(peer.get<std::string>()));
        }
    }
    void init(Context& ctx) override {
        ctx.set_timeout(Time::us(params_.value("at_us", 1)));
    }
    void notified(Context& ctx, ChannelId) override {
        ctx.charge(params_.value("work", 0));
        for (auto ch : peers_) {
            for (int i = 0; i < params_.value("signals", 1); ++i) {
                ctx.notify(ch);
            }
        }
        end = ctx.now();
    }
    Time end;

private:
    nlohmann::json params_;
    std::vector<ChannelId> peers_;
};

std::vector<std::string> g_log;

class Recorder : public Component {
public:
    Recorder(std::string name, const nlohmann::json& p)
        : Component(std::move(name), "test_recorder"), work_(p.value("work", 0)),
          bounce_(p.value("bounce", std::string())) {}
    void attach(Binder& b) override {
        if (!bounce_.empty()) ch_ = b.channel_to(bounce_);
    }
    void init(Context& ctx) override {
        if (ch_) ctx.notify(*ch_);
    }
    void notified(Context& ctx, ChannelId) override {
        entries.push_back(ctx.now());
        g_log.push_back(name());
        ctx.charge(work_);
        if (ch_) ctx.notify(*ch_);
    }
    std::vector<Time> entries;

private:
    std::int64_t work_;
    std::string bounce_;
    std::optional<ChannelId> ch_;
};

void register_test_classes() {
    register_component_class("test_pinger", [](const ComponentSpec& s) {
        return std::make_unique<Pinger>(s.name, s.params);
    });
    register_component_class("test_recorder", [](const ComponentSpec& s) {
        return std::make_unique<Recorder>(s.name, s.params);
    });
}

ComponentSpec spec(const std::string& name, const std::string& cls, int core, int prio,
                   nlohmann::json params = nlohmann::json::object()) {
    ComponentSpec c;
    c.name = name;
    c.cls = cls;
    c.core = core;
    c.priority = prio;
    c.params = std::move(params);
    return c;
}

Scenario base(int cores) {
    Scenario s;
    s.name = "unit";
    s.cores = cores;
    s.costs = CostModel::defaults();
    s.workload.duration_s = 0.001;
    s.workload.warmup_s = 0.0;
    return s;
}

class RuntimeTest : public ::testing::Test {
protected:
    void SetUp() override {
        register_test_classes();
        g_log.clear();
    }
};

} // namespace

TEST_F(RuntimeTest, SignalsCoalesceIntoOneInvocation) {
    auto s = base(1);
    s.components.push_back(spec("p", "test_pinger", 0, 10, {{"peers", {"r"}}, {"signals", 3}}));
    s.components.push_back(spec("r", "test_recorder", 0, 5));
    s.channels.push_back({"p", "r"});
    auto rt = Runtime::build(s);
    auto rep = rt->run_until(Time::ms(1));
    auto& r = dynamic_cast<Recorder&>(rt->component("r"));
    EXPECT_EQ(r.entries.size(), 1u);
    EXPECT_EQ(rep.components.at("r").notified_calls, 1u);
    EXPECT_EQ(rep.components.at("r").notifications_coalesced, 2u);
    EXPECT_EQ(rep.components.at("p").signals_sent, 3u);
}

TEST_F(RuntimeTest, SameCoreDeliveryCostsOneSwitch) {
    auto s = base(1);
    s.components.push_back(spec("p", "test_pinger", 0, 10, {{"peers", {"r"}}, {"work", 1000}}));
    s.components.push_back(spec("r", "test_recorder", 0, 5));
    s.channels.push_back({"p", "r"});
    auto rt = Runtime::build(s);
    rt->run_until(Time::ms(1));
    auto& p = dynamic_cast<Pinger&>(rt->component("p"));
    auto& r = dynamic_cast<Recorder&>(rt->component("r"));
    // timer at 1 us; pinger: switch 493 + work 1000 + notify 493
    EXPECT_EQ(p.end, Time::us(1) + Time::ns(493 + 1000 + 493));
    // receiver starts when the core frees and pays its own switch
    ASSERT_EQ(r.entries.size(), 1u);
    EXPECT_EQ(r.entries[0], p.end + Time::ns(493));
}

TEST_F(RuntimeTest, CrossCoreDeliveryAddsSignalLatency) {
    auto s = base(2);
    s.components.push_back(spec("p", "test_pinger", 0, 10, {{"peers", {"r"}}, {"work", 1000}}));
    s.components.push_back(spec("r", "test_recorder", 1, 5));
    s.channels.push_back({"p", "r"});
    auto rt = Runtime::build(s);
    rt->run_until(Time::ms(1));
    auto& r = dynamic_cast<Recorder&>(rt->component("r"));
    ASSERT_EQ(r.entries.size(), 1u);
    // signal leaves at 1 us + 1986 ns, 1500 cycles in flight, then the switch
    EXPECT_EQ(r.entries[0], Time::us(1) + Time::ns(1986 + 1500 + 493));
}

TEST_F(RuntimeTest, HigherPriorityRunsFirst) {
    auto s = base(1);
    s.components.push_back(spec("p", "test_pinger", 0, 10, {{"peers", {"low", "high"}}}));
    s.components.push_back(spec("low", "test_recorder", 0, 5));
    s.components.push_back(spec("high", "test_recorder", 0, 20));
    s.channels.push_back({"p", "low"});
    s.channels.push_back({"p", "high"});
    auto rt = Runtime::build(s);
    rt->run_until(Time::ms(1));
    EXPECT_EQ(g_log, (std::vector<std::string>{"high", "low"}));
}

TEST_F(RuntimeTest, EqualPriorityRunsInReadyOrder) {
    auto s = base(1);
    s.components.push_back(spec("p", "test_pinger", 0, 10, {{"peers", {"b", "a"}}}));
    s.components.push_back(spec("a", "test_recorder", 0, 5));
    s.components.push_back(spec("b", "test_recorder", 0, 5));
    s.channels.push_back({"p", "a"});
    s.channels.push_back({"p", "b"});
    auto rt = Runtime::build(s);
    rt->run_until(Time::ms(1));
    EXPECT_EQ(g_log, (std::vector<std::string>{"b", "a"}));
}

TEST_F(RuntimeTest, EmptyWorkloadLeavesCoresIdle) {
    auto s = base(2);
    s.components.push_back(spec("a", "test_recorder", 0, 5));
    s.components.push_back(spec("b", "test_recorder", 1, 5));
    s.channels.push_back({"a", "b"});
    auto rt = Runtime::build(s);
    auto rep = rt->run_until(Time::seconds(1));
    ASSERT_EQ(rep.cores.size(), 2u);
    for (const auto& c : rep.cores) {
        EXPECT_EQ(c.utilisation(), 0.0);
        EXPECT_EQ(c.total, Time::seconds(1));
    }
}

TEST_F(RuntimeTest, LivelockGuardFires) {
    auto s = base(1);
    s.costs.context_switch_cycles = 0;
    s.costs.notify_syscall_cycles = 0;
    s.components.push_back(spec("a", "test_recorder", 0, 5, {{"bounce", "b"}}));
    s.components.push_back(spec("b", "test_recorder", 0, 5, {{"bounce", "a"}}));
    s.channels.push_back({"a", "b"});
    auto rt = Runtime::build(s);
    EXPECT_THROW(rt->run_until(Time::ms(1)), SimulationError);
}

TEST_F(RuntimeTest, UnknownClassIsRejected) {
    auto s = base(1);
    s.components.push_back(spec("x", "no_such_class", 0, 5));
    EXPECT_THROW(Runtime::build(s), ConfigError);
}

TEST(Wiring, TwoProducersNamesTheQueue) {
    auto s = echo_scenario({});
    for (auto& q : s.queues) {
        if (q.name == "drv_rx_avail") q.producers.push_back({"tx_virt", "extra"});
    }
    try {
        validate(s);
        FAIL() << "expected a wiring error";
    } catch (const WiringError& e) {
        EXPECT_NE(std::string(e.what()).find("drv_rx_avail"), std::string::npos) << e.what();
    }
}

TEST(Wiring, DanglingChannelNamesTheComponent) {
    auto s = echo_scenario({});
    s.channels.push_back({"eth", "ghost"});
    try {
        validate(s);
        FAIL() << "expected a wiring error";
    } catch (const WiringError& e) {
        EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos) << e.what();
    }
}

TEST(Wiring, OverlappingSubRegionsRejected) {
    EchoOptions o;
    o.clients = 2;
    auto s = echo_scenario(o);
    for (auto& r : s.regions) {
        if (r.name == "tx") r.subregions[1].first_slot = r.subregions[0].first_slot + 1;
    }
    try {
        validate(s);
        FAIL() << "expected a wiring error";
    } catch (const WiringError& e) {
        EXPECT_NE(std::string(e.what()).find("overlap"), std::string::npos) << e.what();
    }
}

TEST(Wiring, QueueWithoutChannelRejected) {
    auto s = echo_scenario({});
    s.channels.erase(s.channels.begin());
    EXPECT_THROW(validate(s), WiringError);
}

TEST(Build, EchoScenarioInstance) {
    auto rt = Runtime::build(echo_scenario({}));
    // driver, two virtualisers, copier and client, plus the NIC model
    EXPECT_EQ(rt->component_count(), 5u);
    EXPECT_NE(rt->nic(), nullptr);
    EXPECT_EQ(rt->component("eth").cls(), "eth_driver");
    EXPECT_EQ(rt->component("copier_client0").cls(), "copier");
}

TEST(Build, GraphDumpIsStable) {
    const auto s = echo_scenario({});
    const auto a = Runtime::build(s)->describe();
    const auto b = Runtime::build(scenario_from_json(scenario_to_json(s)))->describe();
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a.empty());
}

TEST(ScenarioJson, RoundTrip) {
    for (const auto& s : {echo_scenario({}), swap_scenario({}), storage_scenario({})}) {
        const auto j = scenario_to_json(s);
        EXPECT_EQ(scenario_to_json(scenario_from_json(j)), j) << s.name;
    }
}

TEST(ScenarioJson, UnknownKeysRejected) {
    auto j = scenario_to_json(echo_scenario({}));
    j["colour"] = "blue";
    EXPECT_THROW(scenario_from_json(j), ConfigError);
    auto k = scenario_to_json(echo_scenario({}));
    k["costs"]["warp_factor"] = 9;
    EXPECT_THROW(scenario_from_json(k), ConfigError);
}

TEST(Accounting, BusyBreakdownClosesAndUtilisationBounded) {
    EchoOptions o;
    o.rate_mbps = 600;
    o.duration_s = 0.2;
    auto rt = Runtime::build(echo_scenario(o));
    auto rep = rt->run_until(Time::seconds(0.2));
    for (const auto& c : rep.cores) {
        Time sum;
        for (const auto& [name, t] : c.component_busy) sum += t;
        EXPECT_EQ(sum, c.busy);
        EXPECT_LE(c.busy, c.total);
        EXPECT_GE(c.utilisation(), 0.0);
        EXPECT_LE(c.utilisation(), 1.0);
    }
}

TEST(Determinism, SameSeedSameReport) {
    EchoOptions o;
    o.rate_mbps = 400;
    o.duration_s = 0.2;
    const auto s = echo_scenario(o);
    auto a = Runtime::build(s)->run_until(Time::seconds(0.2));
    auto b = Runtime::build(s)->run_until(Time::seconds(0.2));
    EXPECT_EQ(a.events, b.events);
    EXPECT_EQ(a.counters, b.counters);
    for (std::size_t c = 0; c < a.cores.size(); ++c) {
        EXPECT_EQ(a.cores[c].busy, b.cores[c].busy);
    }
}

TEST(Migrate, InvalidCoreRejected) {
    auto rt = Runtime::build(echo_scenario({}));
    EXPECT_THROW(rt->migrate("rx_virt", 1), ConfigError);
    EXPECT_THROW(rt->migrate("rx_virt", -1), ConfigError);
}

TEST(Migrate, ToCurrentCoreChangesNothing) {
    EchoOptions o;
    o.rate_mbps = 300;
    o.duration_s = 0.3;
    const auto s = echo_scenario(o);
    auto plain = run_scenario(s);
    auto moved = run_scenario(s, [](Runtime& rt) {
        rt.at(Time::ms(150), [&rt] { rt.migrate("rx_virt", 0); });
    });
    std::ostringstream a, b;
    write_csv(a, plain.samples, 1, true);
    write_csv(b, moved.samples, 1, true);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Migrate, MidRunMoveLosesNothing) {
    EchoOptions o;
    o.multicore = true;
    o.rate_mbps = 500;
    o.duration_s = 0.4;
    o.audit = true;
    auto r = run_scenario(echo_scenario(o), [](Runtime& rt) {
        rt.at(Time::ms(200), [&rt] { rt.migrate("rx_virt", 2); });
        rt.at(Time::ms(300), [&rt] { rt.migrate("rx_virt", 0); });
    });
    EXPECT_EQ(r.ledger.unaccounted(), 0);
    EXPECT_EQ(r.summary.drops, 0u);
    EXPECT_TRUE(r.audit_ok());
    EXPECT_NEAR(r.summary.achieved_mbps, r.summary.applied_mbps, r.summary.applied_mbps * 0.01);
}

TEST(Migrate, AllToCoreZeroMatchesUnicore) {
    EchoOptions uni;
    uni.rate_mbps = 400;
    uni.duration_s = 0.3;
    EchoOptions multi = uni;
    multi.multicore = true;
    auto a = run_scenario(echo_scenario(uni));
    auto b = run_scenario(echo_scenario(multi), [](Runtime& rt) {
        for (std::size_t i = 0; i < rt.component_count(); ++i) {
            rt.migrate(rt.scenario().components[i].name, 0);
        }
    });
    // packet-level outcomes are identical; only the per-core columns differ
    EXPECT_EQ(a.summary.injected, b.summary.injected);
    EXPECT_EQ(a.summary.echoed, b.summary.echoed);
    EXPECT_EQ(a.summary.drops, b.summary.drops);
    EXPECT_EQ(a.summary.rtt_p50_us, b.summary.rtt_p50_us);
    EXPECT_EQ(a.summary.rtt_p99_us, b.summary.rtt_p99_us);
    EXPECT_DOUBLE_EQ(a.summary.util[0], b.summary.util[0]);
    EXPECT_EQ(b.summary.util[1], 0.0);
    EXPECT_EQ(b.summary.util[2], 0.0);
}

TEST(Restart, CopierUnderLoadConservesBuffers) {
    EchoOptions o;
    o.rate_mbps = 600;
    o.duration_s = 0.4;
    o.audit = true;
    auto r = run_scenario(echo_scenario(o), [](Runtime& rt) {
        rt.at(Time::ms(150), [&rt] { rt.restart("copier_client0"); });
        rt.at(Time::ms(250), [&rt] { rt.restart("client0"); });
        rt.at(Time::ms(300), [&rt] { rt.restart("rx_virt"); });
    });
    EXPECT_TRUE(r.audit_ok()) << (r.audit_problems.empty() ? "" : r.audit_problems[0]);
    EXPECT_GT(r.audits, 3u);
    EXPECT_EQ(r.ledger.unaccounted(), 0);
    EXPECT_EQ(r.summary.drops, 0u);
    EXPECT_EQ(r.report.counter("gen.duplicates"), 0u);
}

TEST(Restart, IdleComponentHasNoWorkloadEffect) {
    EchoOptions o;
    o.clients = 2;
    o.rate_mbps = 300;
    o.duration_s = 0.3;
    const auto s = echo_scenario(o);
    auto plain = run_scenario(s);
    auto restarted = run_scenario(s, [](Runtime& rt) {
        rt.at(Time::ms(150), [&rt] { rt.restart("client1"); });
    });
    EXPECT_EQ(plain.summary.echoed, restarted.summary.echoed);
    EXPECT_EQ(plain.summary.drops, restarted.summary.drops);
    EXPECT_EQ(plain.ledger.unaccounted(), restarted.ledger.unaccounted());
}
