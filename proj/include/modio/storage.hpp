#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "modio/block.hpp"
#include "modio/runtime.hpp"

namespace modio {

/// Read-only device properties as seen by one client.
struct InfoPage {
    std::uint32_t block_size = 0;
    std::uint64_t capacity_blocks = 0;
};

struct Partition {
    std::string client;
    std::uint64_t start_lba = 0;
    std::uint64_t length = 0;
};

/// Single-server block device. Requests wait in arrival order; the next one
/// served is drawn at random from the oldest `reorder_window` waiting.
/// Data moves between the backing store and the data region at completion.
class DiskModel : public Device {
public:
    DiskModel(Runtime& rt, const DiskSpec& spec, DataRegion& data, std::size_t driver,
              std::uint64_t seed);

    std::optional<Time> next_event() const override;
    void advance(Time t, bool raise_irq) override;
    void add_counters(std::map<std::string, std::uint64_t>& out) const override;

    /// `r.data.offset` is region-global. Barriers are the driver's business
    /// and are never submitted.
    void submit(const BlockRequest& r, Time now);
    std::optional<BlockResponse> take_completion();
    std::size_t in_flight() const { return waiting_.size() + (serving_ ? 1 : 0); }
    bool completions_empty() const { return done_.empty(); }

    InfoPage info() const { return {spec_.block_size, spec_.capacity_blocks}; }
    const DiskSpec& spec() const { return spec_; }

    /// Current contents of one block (zeros if never written).
    std::vector<std::uint8_t> block(std::uint64_t lba) const;

    struct TraceEntry {
        std::uint64_t id = 0;
        BlockOp op = BlockOp::read;
        std::uint64_t lba = 0;
        std::uint32_t count = 0;
        std::uint64_t submit_seq = 0;
        std::uint64_t complete_seq = 0;
    };
    /// One entry per completed request, in completion order.
    const std::vector<TraceEntry>& trace() const { return trace_; }
    /// Called by the driver when it retires a barrier: the number of requests
    /// submitted so far.
    void mark_barrier() { barrier_marks_.push_back(submitted_); }
    const std::vector<std::uint64_t>& barrier_marks() const { return barrier_marks_; }

private:
    struct Waiting {
        BlockRequest r;
        std::uint64_t seq = 0;
    };
    void start_next(Time t);
    void complete(const Waiting& w, Time t);

    Runtime& rt_;
    DiskSpec spec_;
    DataRegion& data_;
    std::size_t driver_;
    std::mt19937_64 rng_;
    std::deque<Waiting> waiting_;
    std::optional<std::pair<Waiting, Time>> serving_;
    std::deque<BlockResponse> done_;
    std::unordered_map<std::uint64_t, std::vector<std::uint8_t>> store_;
    std::vector<TraceEntry> trace_;
    std::vector<std::uint64_t> barrier_marks_;
    std::uint64_t submitted_ = 0;
    std::uint64_t completed_ = 0;
    std::uint64_t errors_ = 0;
};

/// Block driver. Endpoints: rq (consumer), rs (producer). Holds back
/// requests behind a barrier until everything before it has completed.
class BlkDriver : public Component {
public:
    BlkDriver(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;

private:
    DiskModel* disk_ = nullptr;
    bool enforce_ = true;
    ConsumerEnd<BlockRequest> rq_;
    ProducerEnd<BlockResponse> rs_;
};

/// Storage virtualiser: static partitions, lba and buffer translation,
/// request tagging. Params: {"clients": [{"name", "start_lba", "length"}],
/// "region": data region}. Endpoints: drv_rq, drv_rs, cli_rq[i], cli_rs[i].
class BlkVirt : public Component {
public:
    BlkVirt(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;

    InfoPage info_page(const std::string& client) const;
    const std::vector<Partition>& partitions() const { return parts_; }

private:
    std::vector<Partition> parts_;
    std::vector<RegionWindow> windows_;
    std::uint32_t block_size_ = 512;
    ProducerEnd<BlockRequest> drv_rq_;
    ConsumerEnd<BlockResponse> drv_rs_;
    std::vector<ConsumerEnd<BlockRequest>> cli_rq_;
    std::vector<ProducerEnd<BlockResponse>> cli_rs_;
    std::map<std::uint64_t, std::pair<std::size_t, std::uint64_t>> tags_;
    std::uint64_t next_tag_ = 1;
};

struct LatencySample {
    Time t;
    Time latency;
    std::uint32_t bytes = 0;
};

/// Closed-loop storage workload with a per-client block-array oracle.
/// Params: {"virt", "queue_depth", "requests", "read_fraction",
/// "barrier_every", "pattern": "random"|"sequential", "blocks", "seed",
/// "out_of_range_every"}. Endpoints: rq, rs. Mapping: "data".
class BlkClient : public Component {
public:
    BlkClient(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void init(Context& ctx) override;
    void notified(Context& ctx, ChannelId channel) override;

    const InfoPage& info() const { return info_; }
    /// Reads and writes (including out-of-range probes); barriers not counted.
    std::uint64_t issued() const { return issued_; }
    std::uint64_t completed() const { return completed_; }
    std::uint64_t outstanding() const { return outstanding_.size(); }
    const std::vector<LatencySample>& latencies() const { return latencies_; }
    /// Expected contents of a client-relative block per the oracle (zeros if
    /// never written), or nullopt if a failed write left it unknown.
    std::optional<std::vector<std::uint8_t>> expected_block(std::uint64_t lba) const;
    /// Deterministic contents written for (client, lba, version).
    static void pattern(std::span<std::uint8_t> out, std::uint64_t client_tag, std::uint64_t lba,
                        std::uint64_t version);

private:
    struct Outstanding {
        BlockOp op = BlockOp::read;
        std::uint64_t lba = 0;
        std::uint32_t count = 0;
        std::uint32_t slot = 0;
        bool probe = false;
        std::uint64_t epoch = 0;  // barriers issued before this request
        Time submitted;
        std::vector<std::uint64_t> versions;  // reads: expected version per block, 0 = unwritten
    };
    void issue(Context& ctx);
    bool conflicts(BlockOp op, std::uint64_t lba, std::uint32_t count) const;
    void on_response(Context& ctx, const BlockResponse& r);

    std::string virt_;
    std::uint32_t queue_depth_ = 8;
    std::uint64_t requests_ = 1000;
    double read_fraction_ = 0.5;
    std::uint64_t barrier_every_ = 0;
    bool sequential_ = false;
    std::uint32_t blocks_ = 1;
    std::uint64_t out_of_range_every_ = 0;
    std::mt19937_64 rng_;
    std::uint64_t tag_ = 0;

    InfoPage info_;
    RegionView data_;
    ProducerEnd<BlockRequest> rq_;
    ConsumerEnd<BlockResponse> rs_;
    std::vector<std::uint32_t> free_slots_;
    std::map<std::uint64_t, Outstanding> outstanding_;
    std::unordered_map<std::uint64_t, std::uint64_t> versions_;  // lba -> last written version
    std::set<std::uint64_t> unknown_;
    std::uint64_t next_version_ = 1;
    std::uint64_t next_id_ = 1;
    std::uint64_t issued_ = 0;
    std::uint64_t completed_ = 0;
    std::uint64_t since_barrier_ = 0;
    std::uint64_t epoch_ = 0;
    std::uint64_t seq_lba_ = 0;
    std::vector<LatencySample> latencies_;
};

} // namespace modio
