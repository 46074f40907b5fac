#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "modio/bench.hpp"
#include "modio/builders.hpp"
#include "modio/net.hpp"
#include "modio/runtime.hpp"

using namespace modio;

namespace {

// One 1518-byte frame to client0 at t = 1 ms, nothing else.
Scenario single_frame(bool copier) {
    EchoOptions o;
    o.copier = copier;
    o.rate_mbps = 100;
    auto s = echo_scenario(o);
    s.workload.flows[0].start_s = 0.001;
    s.workload.flows[0].stop_s = 0.00105;
    return s;
}

// Three clients that only transmit, as fast as TxVirt lets them.
Scenario saturating_sources(std::size_t n) {
    EchoOptions o;
    o.clients = n;
    o.copier = false;
    o.rate_mbps = 0;
    o.duration_s = 0.3;
    auto s = echo_scenario(o);
    s.find_component("rx_virt")->params["clients"] = nlohmann::json::array();
    s.find_component("tx_virt")->params["log_service"] = true;
    std::erase_if(s.queues, [](const QueueSpec& q) { return q.name.rfind("rx_", 0) == 0; });
    std::erase_if(s.channels, [](const ChannelSpec& c) {
        return c.a == "rx_virt" && c.b.rfind("client", 0) == 0;
    });
    for (std::size_t i = 0; i < n; ++i) {
        auto* c = s.find_component(client_name(i));
        c->cls = "tx_source";
        std::erase_if(c->maps, [](const MappingSpec& m) { return m.as == "rx"; });
    }
    return s;
}

// Run `s` and call `probe` on the live runtime just before it is torn down.
RunResult run_probed(const Scenario& s, const std::function<void(Runtime&)>& probe) {
    const auto end = Time::seconds(s.workload.duration_s + s.workload.drain_s) - Time::ns(1);
    return run_scenario(s, [&](Runtime& rt) { rt.at(end, [&rt, &probe] { probe(rt); }); });
}

} // namespace

TEST(Echo, SinglePacketRttMatchesHandSum) {
    // wire in 12304 + eth 1891 + rx_virt 1996 + client 9108 + tx_virt 2006
    // + rx_virt (returns) 1108 + eth to tx post 1093 + wire out 12304 = 41810 ns
    auto rt = Runtime::build(single_frame(false));
    rt->run_until(Time::ms(10));
    const auto& rtt = rt->generator()->rtt_samples();
    ASSERT_EQ(rt->generator()->injected(), 1u);
    ASSERT_EQ(rtt.size(), 1u);
    EXPECT_EQ(rtt[0].rtt.as_ps(), 41'810'000);
}

TEST(Echo, WireTimeOfFullFrame) {
    // 1538 bytes on the wire at 1 Gb/s
    EXPECT_EQ(frame::wire_time(1518, 20, 1000.0).as_ps(), 12'304'000);
}

TEST(RxVirt, DemuxesByDestinationMac) {
    EchoOptions o;
    o.clients = 3;
    o.copier = false;
    o.spread = true;
    o.rate_mbps = 90;
    o.duration_s = 0.2;
    auto r = run_scenario(echo_scenario(o));
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_GT(r.report.counter(client_name(i) + ".rx_frames"), 0u) << i;
        EXPECT_NEAR(r.summary.client_mbps[i], 30.0, 0.3) << i;
    }
    EXPECT_EQ(r.report.counter("rx_virt.unknown_mac_drops"), 0u);
}

TEST(RxVirt, UnknownMacGoesToDropCounter) {
    auto s = echo_scenario({});
    // a real component, but not one of rx_virt's clients
    s.mac_table.push_back({"tx_virt", 0x02'00'00'00'09'99ull, 0x0a'00'09'99u});
    FlowSpec f;
    f.dst = "tx_virt";
    f.rate_mbps = 10;
    s.workload.flows.push_back(f);
    s.workload.duration_s = 0.2;
    auto r = run_scenario(s);
    EXPECT_GT(r.report.counter("rx_virt.unknown_mac_drops"), 0u);
    EXPECT_EQ(r.ledger.rx_virt, r.report.counter("rx_virt.unknown_mac_drops"));
    EXPECT_EQ(r.ledger.unaccounted(), 0);
}

TEST(RxVirt, BroadcastReachesEveryClientOnce) {
    EchoOptions o;
    o.clients = 3;
    o.rate_mbps = 0;
    o.broadcast_mbps = 5;
    o.audit = true;
    o.duration_s = 0.2;
    std::vector<std::uint8_t> counts, bcast;
    bool refs_clear = false;
    auto r = run_probed(echo_scenario(o), [&](Runtime& rt) {
        counts = rt.generator()->echo_counts();
        bcast = rt.generator()->broadcast_flags();
        refs_clear = dynamic_cast<RxVirt&>(rt.component("rx_virt")).broadcast_entries().empty();
    });
    ASSERT_TRUE(r.audit_ok()) << r.audit_problems.front();
    EXPECT_GT(r.audits, 0u);
    EXPECT_EQ(r.report.counter("rx_virt.broadcast_skipped"), 0u);
    ASSERT_GT(counts.size(), 50u);
    for (std::size_t id = 1; id < counts.size(); ++id) {
        ASSERT_TRUE(bcast[id]);
        EXPECT_EQ(counts[id], 3u) << "frame " << id;
    }
    // every reference came home
    EXPECT_TRUE(refs_clear);
}

TEST(RxVirt, ArpSchemeAnswersForOwnerAndDropsOtherBroadcasts) {
    EchoOptions o;
    o.clients = 2;
    o.rate_mbps = 0;
    o.broadcast = "arp";
    o.arp_client = true;
    o.broadcast_mbps = 2;
    o.audit = true;
    o.duration_s = 0.2;
    auto s = echo_scenario(o);
    FlowSpec plain;
    plain.dst = "broadcast";
    plain.rate_mbps = 2;
    s.workload.flows.push_back(plain);
    s.workload.flows[0].dst = "arp:client1";
    std::vector<std::pair<std::uint32_t, std::uint64_t>> replies;
    auto r = run_probed(s, [&](Runtime& rt) { replies = rt.generator()->arp_replies(); });
    ASSERT_TRUE(r.audit_ok());
    ASSERT_FALSE(replies.empty());
    const auto* c1 = s.find_mac("client1");
    for (const auto& [ip, mac] : replies) {
        EXPECT_EQ(ip, c1->ip);
        EXPECT_EQ(mac, c1->mac);
    }
    EXPECT_EQ(r.report.counter("arp.arp_replies"), replies.size());
    // plain IPv4 broadcasts never reach the ARP client
    EXPECT_GT(r.report.counter("rx_virt.broadcast_dropped"), 0u);
    EXPECT_EQ(r.report.counter("arp.broadcast_dropped"), 0u);
    EXPECT_EQ(r.report.counter("client0.rx_frames"), 0u);
}

TEST(Copier, PayloadSurvivesByteForByte) {
    EchoOptions o;
    o.rate_mbps = 200;
    o.duration_s = 0.2;
    std::uint64_t echoed = 0, corrupt = 1, dups = 1, copied = 0, injected_bytes = 0;
    run_probed(echo_scenario(o), [&](Runtime& rt) {
        echoed = rt.generator()->echoed();
        corrupt = rt.generator()->corrupt();
        dups = rt.generator()->duplicates();
        copied = dynamic_cast<Copier&>(rt.component("copier_client0")).src_view().payload_bytes_read();
        injected_bytes = rt.generator()->flow_stats()[0].injected_bytes;
    });
    EXPECT_GT(echoed, 1000u);
    EXPECT_EQ(corrupt, 0u);
    EXPECT_EQ(dups, 0u);
    EXPECT_EQ(copied, injected_bytes);
}

TEST(Blindness, DriverAndVirtualisersNeverReadPayload) {
    EchoOptions o;
    o.rate_mbps = 200;
    o.duration_s = 0.2;
    auto s = echo_scenario(o);
    EXPECT_TRUE(s.find_component("eth")->maps.empty());
    EXPECT_TRUE(s.find_component("tx_virt")->maps.empty());
    ASSERT_EQ(s.find_component("rx_virt")->maps.size(), 1u);
    EXPECT_EQ(s.find_component("rx_virt")->maps[0].access, Access::header);
    std::uint64_t headers = 0, payload = 1;
    run_probed(s, [&](Runtime& rt) {
        const auto& view = dynamic_cast<RxVirt&>(rt.component("rx_virt")).view();
        headers = view.header_reads();
        payload = view.payload_bytes_read();
    });
    EXPECT_GT(headers, 1000u);
    EXPECT_EQ(payload, 0u);
}

TEST(Echo, LosslessAt500Mbps) {
    EchoOptions o;
    o.rate_mbps = 500;
    o.duration_s = 0.5;
    auto r = run_scenario(echo_scenario(o));
    EXPECT_NEAR(r.summary.achieved_mbps, r.summary.applied_mbps, 0.01 * r.summary.applied_mbps);
    EXPECT_EQ(r.summary.drops, 0u);
    EXPECT_EQ(r.ledger.unaccounted(), 0);
}

TEST(TxVirt, RoundRobinSharesLineRateEvenly) {
    auto s = saturating_sources(3);
    std::vector<std::uint32_t> log;
    auto r = run_probed(
        s, [&](Runtime& rt) { log = dynamic_cast<TxVirt&>(rt.component("tx_virt")).service_log(); });
    // 1538 wire bytes per frame: 81274 frames/s on the line, a third each
    const double per_client = 1e9 / (1538 * 8.0) / 3.0;
    const double window = s.workload.duration_s - s.workload.warmup_s;
    for (std::size_t i = 0; i < 3; ++i) {
        const double pps = r.summary.client_mbps[i] * 1e6 / (1518 * 8.0);
        EXPECT_NEAR(pps, per_client, 0.01 * per_client) << "client " << i << " over " << window;
    }
    // strict rotation once all three are backlogged
    ASSERT_GT(log.size(), 3000u);
    for (std::size_t k = 1000; k + 1 < log.size(); ++k) {
        ASSERT_EQ(log[k + 1], (log[k] + 1) % 3) << "at " << k;
    }
}

TEST(Ledger, InjectedEqualsEchoedPlusAttributedDrops) {
    for (double rate : {100.0, 1000.0}) {
        EchoOptions o;
        o.rate_mbps = rate;
        o.duration_s = 0.3;
        auto r = run_scenario(echo_scenario(o));
        const auto& l = r.ledger;
        EXPECT_EQ(l.injected, l.echoed + l.nic + l.rx_virt + l.tx_virt + l.client) << rate;
        EXPECT_EQ(l.unaccounted(), 0) << rate;
    }
}

TEST(RxVirt, OverflowBranchUnreachableOverFullSweep) {
    for (bool copier : {true, false}) {
        EchoOptions o;
        o.copier = copier;
        o.clients = 2;
        const auto s = echo_scenario(o);
        // every queue RxVirt feeds is at least as deep as the Rx pool
        for (const auto& q : s.queues) {
            if (!q.producers.empty() && q.producers[0].component == "rx_virt" && q.region == "rx" &&
                q.producers[0].endpoint.rfind("cli_rx_avail", 0) == 0) {
                EXPECT_GE(q.capacity, s.find_region("rx")->slot_count) << q.name;
            }
        }
        LoadSpec l;
        l.rates_mbps = parse_rates("200:1000:200");
        l.duration_s = 0.2;
        l.warmup_s = 0.05;
        std::vector<RunResult> runs;
        run_sweep(s, l, &runs);
        for (const auto& r : runs) {
            EXPECT_EQ(r.report.counter("rx_virt.overflow_drops"), 0u) << copier;
        }
    }
}
