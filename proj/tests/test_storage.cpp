#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "modio/bench.hpp"
#include "modio/builders.hpp"
#include "modio/storage.hpp"

using namespace modio;

namespace {

StorageOptions small() {
    StorageOptions o;
    o.requests = 500;
    o.duration_s = 1.0;
    return o;
}

} // namespace

TEST(BlkVirt, TranslatesClientLbaByPartitionStart) {
    StorageOptions o = small();
    o.blocks_per_client = 2048;
    o.requests = 11;
    o.read_fraction = 0.0;
    o.pattern = "sequential";
    o.barrier_every = 0;
    auto s = storage_scenario(o);
    s.find_component("blk0")->params["requests"] = 0;
    auto rt = Runtime::build(s);
    rt->run_until(Time::ms(50));
    auto& client = dynamic_cast<BlkClient&>(rt->component("blk1"));
    ASSERT_EQ(client.completed(), 11u);
    std::set<std::uint64_t> lbas;
    for (const auto& e : rt->disk()->trace()) lbas.insert(e.lba);
    std::set<std::uint64_t> want;
    for (std::uint64_t l = 2048; l <= 2058; ++l) want.insert(l);
    EXPECT_EQ(lbas, want);
    // client lba 10 is device lba 2058
    EXPECT_EQ(*client.expected_block(10), rt->disk()->block(2058));
    EXPECT_NE(rt->disk()->block(2058), std::vector<std::uint8_t>(512, 0));
}

TEST(BlkVirt, OutOfRangeRequestsNeverReachTheDevice) {
    StorageOptions o = small();
    o.out_of_range_every = 5;
    auto s = storage_scenario(o);
    auto rt = Runtime::build(s);
    rt->run_until(Time::seconds(1.0));
    EXPECT_GT(rt->component("blk_virt").counter("out_of_range"), 50u);
    const auto& virt = dynamic_cast<BlkVirt&>(rt->component("blk_virt"));
    for (const auto& e : rt->disk()->trace()) {
        const auto& parts = virt.partitions();
        const bool inside = std::any_of(parts.begin(), parts.end(), [&](const Partition& p) {
            return e.lba >= p.start_lba && e.lba + e.count <= p.start_lba + p.length;
        });
        ASSERT_TRUE(inside) << "lba " << e.lba;
    }
    for (const char* c : {"blk0", "blk1"}) {
        EXPECT_EQ(rt->component(c).counter("unexpected_status"), 0u) << c;
        EXPECT_EQ(rt->component(c).counter("verify_failures"), 0u) << c;
    }
}

TEST(BlkVirt, InfoPageShowsThePartitionOnly) {
    auto s = storage_scenario(small());
    auto rt = Runtime::build(s);
    const auto& virt = dynamic_cast<BlkVirt&>(rt->component("blk_virt"));
    const auto page = virt.info_page("blk1");
    EXPECT_EQ(page.block_size, 512u);
    EXPECT_EQ(page.capacity_blocks, 1024u);
    EXPECT_EQ(rt->disk()->info().capacity_blocks, 2048u);
    EXPECT_EQ(dynamic_cast<BlkClient&>(rt->component("blk0")).info().capacity_blocks, 1024u);
    EXPECT_THROW(virt.info_page("nobody"), ConfigError);
}

TEST(Barrier, EveryRequestFencedCompletesInSubmissionOrder) {
    // W(a) BARRIER W(b) BARRIER ... : the device may never swap neighbours
    StorageOptions o = small();
    o.clients = 1;
    o.read_fraction = 0.0;
    o.barrier_every = 1;
    o.reorder_window = 8;
    auto rt = Runtime::build(storage_scenario(o));
    rt->run_until(Time::seconds(1.0));
    const auto& trace = rt->disk()->trace();
    ASSERT_EQ(trace.size(), 500u);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        ASSERT_LT(trace[i - 1].submit_seq, trace[i].submit_seq) << i;
    }
    EXPECT_TRUE(check_barriers(*rt->disk()).empty());
    // one fence between each neighbouring pair
    EXPECT_EQ(rt->disk()->barrier_marks().size(), 499u);
}

TEST(Barrier, RandomWorkloadHonoursBarriers) {
    StorageOptions o;
    o.requests = 5000;
    o.barrier_every = 8;
    auto r = run_storage(storage_scenario(o));
    ASSERT_TRUE(r.finished);
    EXPECT_EQ(r.completed, 10000u);
    EXPECT_TRUE(r.barrier_violations.empty()) << r.barrier_violations.front();
}

TEST(Barrier, OracleCatchesADeviceThatIgnoresThem) {
    StorageOptions o = small();
    o.barrier_every = 4;
    o.enforce_barriers = false;
    auto r = run_storage(storage_scenario(o));
    EXPECT_FALSE(r.barrier_violations.empty());
}

TEST(Storage, ReadYourWritesAndIsolationHold) {
    StorageOptions o = small();
    o.requests = 2000;
    o.blocks_per_client = 128;  // small partitions, lots of overwrites
    auto r = run_storage(storage_scenario(o));
    ASSERT_TRUE(r.finished);
    EXPECT_EQ(r.verify_failures, 0u);
    EXPECT_GT(r.verified_blocks, 500u);
    EXPECT_TRUE(r.isolation_problems.empty()) << r.isolation_problems.front();
}

TEST(Storage, IsolationAuditCatchesForeignWrites) {
    auto s = storage_scenario(small());
    s.disk->capacity_blocks += 16;  // an unpartitioned tail
    auto r = run_storage(s, [](Runtime& rt) {
        rt.at(Time::ms(5), [&rt] {
            // a write nobody's oracle knows about, from a buffer blk0 has filled
            BlockRequest stray;
            stray.id = 1ull << 62;
            stray.op = BlockOp::write;
            stray.lba = 2048 + 3;
            stray.count = 1;
            stray.data = {0, 512, 0};
            rt.disk()->submit(stray, rt.now());
            stray.id += 1;
            stray.lba = 7;
            rt.disk()->submit(stray, rt.now());
        });
    });
    ASSERT_FALSE(r.isolation_problems.empty());
    bool tail = false;
    for (const auto& p : r.isolation_problems) {
        tail = tail || p.find("unpartitioned block 2051") != std::string::npos;
    }
    EXPECT_TRUE(tail);
}

TEST(Storage, DeterministicCsv) {
    auto once = [] {
        std::ostringstream os;
        write_storage_csv(os, run_storage(storage_scenario(small())), 1);
        return os.str();
    };
    EXPECT_EQ(once(), once());
}
