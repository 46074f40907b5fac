#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "modio/runtime.hpp"
#include "modio/swap.hpp"
#include "modio/tx_policy.hpp"

namespace modio {

// Frame layout: dst(6) src(6) ethertype(2) id(8) send-stamp(8) body.
// ARP frames put op(2) sender-mac(6) sender-ip(4) target-ip(4) in the body.
namespace frame {

inline constexpr std::size_t kDst = 0;
inline constexpr std::size_t kSrc = 6;
inline constexpr std::size_t kType = 12;
inline constexpr std::size_t kId = 14;
inline constexpr std::size_t kStamp = 22;
inline constexpr std::size_t kBody = 30;
inline constexpr std::size_t kArpOp = kBody;
inline constexpr std::size_t kArpSenderMac = kBody + 2;
inline constexpr std::size_t kArpSenderIp = kBody + 8;
inline constexpr std::size_t kArpTargetIp = kBody + 12;

inline constexpr std::uint16_t kIpv4 = 0x0800;
inline constexpr std::uint16_t kArp = 0x0806;
inline constexpr std::uint64_t kBroadcastMac = 0xffff'ffff'ffffull;
inline constexpr std::uint32_t kMinBytes = 64;
inline constexpr std::uint32_t kMaxBytes = 1518;
/// Frames originated by components (not the load generator) carry this bit in their id.
inline constexpr std::uint64_t kLocalIdBit = 1ull << 63;

std::uint64_t get_mac(std::span<const std::uint8_t> f, std::size_t at);
void put_mac(std::span<std::uint8_t> f, std::size_t at, std::uint64_t mac);
std::uint64_t get_u64(std::span<const std::uint8_t> f, std::size_t at);
void put_u64(std::span<std::uint8_t> f, std::size_t at, std::uint64_t v);
std::uint32_t get_u32(std::span<const std::uint8_t> f, std::size_t at);
void put_u32(std::span<std::uint8_t> f, std::size_t at, std::uint32_t v);
std::uint16_t get_u16(std::span<const std::uint8_t> f, std::size_t at);
void put_u16(std::span<std::uint8_t> f, std::size_t at, std::uint16_t v);

inline std::uint64_t dst(std::span<const std::uint8_t> f) { return get_mac(f, kDst); }
inline std::uint64_t src(std::span<const std::uint8_t> f) { return get_mac(f, kSrc); }
inline std::uint16_t ethertype(std::span<const std::uint8_t> f) { return get_u16(f, kType); }

/// Header, id, stamp and a deterministic body pattern derived from the id.
void build(std::span<std::uint8_t> f, std::uint64_t dst, std::uint64_t src, std::uint16_t type,
           std::uint64_t id, Time stamp);
/// True when the body bytes match the pattern for the frame's id.
bool body_intact(std::span<const std::uint8_t> f);
void build_arp(std::span<std::uint8_t> f, std::uint64_t dst, std::uint64_t src, std::uint16_t op,
               std::uint64_t sender_mac, std::uint32_t sender_ip, std::uint32_t target_ip,
               std::uint64_t id, Time stamp);

/// Wire occupancy of a frame: (length + overhead) bytes at the line rate.
Time wire_time(std::uint32_t length, std::uint32_t overhead, double line_rate_mbps);

} // namespace frame

/// Client index -> MAC and IPv4 address. Read-only after build.
class MacTable {
public:
    MacTable() = default;
    explicit MacTable(const std::vector<MacEntry>& entries);

    std::optional<std::size_t> find_mac(std::uint64_t mac) const;
    std::optional<std::size_t> find_ip(std::uint32_t ip) const;
    std::optional<std::size_t> find_owner(const std::string& owner) const;
    const MacEntry& at(std::size_t i) const { return entries_.at(i); }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<MacEntry> entries_;
};

struct EgressRecord {
    Time t;
    std::uint32_t bytes = 0;
    /// MAC table index of the frame's source, -1 if unknown.
    std::int32_t src = -1;
};

struct RttSample {
    Time t;     // egress time
    Time rtt;
    std::int32_t src = -1;
};

/// External traffic source and sink: emits frames onto the input link and
/// observes everything the NIC transmits.
class LoadGenerator {
public:
    LoadGenerator(const Scenario& s, std::uint64_t seed);

    /// Time the next frame's last bit reaches the NIC.
    std::optional<Time> next_arrival() const;
    /// Write the next frame into `dst` and return its length.
    std::uint32_t emit(std::span<std::uint8_t> dst);
    /// The next frame found no buffer at the NIC.
    void drop_next();
    void on_egress(std::span<const std::uint8_t> frame, Time t);

    /// Stop generating new frames at `t`.
    void stop_at(Time t) {
        stop_ = t;
        schedule();
    }

    struct FlowStats {
        std::uint64_t injected = 0;
        std::uint64_t injected_bytes = 0;
        std::uint64_t nic_drops = 0;
        std::uint64_t overflow = 0;  // offered above line rate, never sent
    };

    const std::vector<FlowStats>& flow_stats() const { return flows_stats_; }
    std::uint64_t injected() const;
    std::uint64_t nic_drops() const;
    std::uint64_t echoed() const { return echoed_; }
    std::uint64_t duplicates() const { return duplicates_; }
    std::uint64_t corrupt() const { return corrupt_; }
    std::uint64_t local_frames() const { return local_frames_; }
    std::uint64_t unknown_egress() const { return unknown_egress_; }
    const std::vector<EgressRecord>& egress() const { return egress_; }
    const std::vector<RttSample>& rtt_samples() const { return rtt_; }
    /// (ip, mac) pairs carried by ARP replies seen on the wire.
    const std::vector<std::pair<std::uint32_t, std::uint64_t>>& arp_replies() const {
        return arp_replies_;
    }
    const MacTable& macs() const { return macs_; }
    Time wire(std::uint32_t len) const;

    /// Indexed by frame id (index 0 unused): times each frame was echoed,
    /// whether it was broadcast, and when its last bit reached the NIC.
    const std::vector<std::uint8_t>& echo_counts() const { return echo_count_; }
    const std::vector<std::uint8_t>& broadcast_flags() const { return is_broadcast_; }
    const std::vector<Time>& injected_at() const { return injected_at_; }

private:
    struct Flow {
        FlowSpec spec;
        std::uint64_t dst_mac = 0;
        std::uint16_t type = frame::kIpv4;
        std::uint32_t target_ip = 0;
        bool broadcast = false;
        Time next_nominal;
        bool done = false;
    };
    struct Pending {
        std::size_t flow = 0;
        Time start;
        Time arrival;
    };

    double rate_at(const Flow& f, Time t) const;
    void schedule();

    MacTable macs_;
    std::uint32_t frame_bytes_;
    std::uint32_t overhead_;
    double line_rate_;
    std::uint64_t gen_mac_;
    std::uint32_t gen_ip_;
    bool jitter_;
    double jitter_fraction_;
    std::mt19937_64 rng_;
    std::vector<Flow> flows_;
    std::vector<FlowStats> flows_stats_;
    std::optional<Pending> next_;
    Time link_free_;
    Time stop_ = Time::max();
    std::uint64_t next_id_ = 1;

    std::vector<std::uint8_t> echo_count_;   // by injected id
    std::vector<std::uint8_t> is_broadcast_; // by injected id
    std::vector<Time> injected_at_;          // by injected id
    std::uint64_t echoed_ = 0;
    std::uint64_t duplicates_ = 0;
    std::uint64_t corrupt_ = 0;
    std::uint64_t local_frames_ = 0;
    std::uint64_t unknown_egress_ = 0;
    std::vector<EgressRecord> egress_;
    std::vector<RttSample> rtt_;
    std::vector<std::pair<std::uint32_t, std::uint64_t>> arp_replies_;
};

/// Ethernet controller: hardware Rx/Tx descriptor rings plus a serialising
/// wire in each direction. Offsets handed to it are region-global.
class NicModel : public Device {
public:
    NicModel(Runtime& rt, const NicSpec& spec, DataRegion& rx, DataRegion& tx,
             LoadGenerator* gen, std::size_t driver);

    std::optional<Time> next_event() const override;
    void advance(Time t, bool raise_irq) override;
    void census(Census& c) const override;
    void add_counters(std::map<std::string, std::uint64_t>& out) const override;

    std::size_t rx_space() const { return spec_.hw_rx_ring - rx_ring_.size() - rx_done_.size(); }
    bool rx_post(const BufferDescriptor& d);
    std::optional<BufferDescriptor> rx_take();
    bool rx_done_empty() const { return rx_done_.empty(); }

    std::size_t tx_space() const { return spec_.hw_tx_ring - tx_ring_.size() - tx_done_.size(); }
    bool tx_post(const BufferDescriptor& d, Time now);
    std::optional<BufferDescriptor> tx_take();
    bool tx_done_empty() const { return tx_done_.empty(); }

    Time wire_time(std::uint32_t length) const;
    const NicSpec& spec() const { return spec_; }

    std::uint64_t rx_frames() const { return rx_frames_; }
    std::uint64_t rx_dropped() const { return rx_dropped_; }
    std::uint64_t tx_frames() const { return tx_frames_; }
    std::uint64_t tx_bytes() const { return tx_bytes_; }

private:
    struct TxSlot {
        BufferDescriptor d;
        Time done;
    };

    Runtime& rt_;
    NicSpec spec_;
    DataRegion& rx_;
    DataRegion& tx_;
    LoadGenerator* gen_;
    std::size_t driver_;
    std::deque<BufferDescriptor> rx_ring_;  // free buffers owned by hardware
    std::deque<BufferDescriptor> rx_done_;  // filled, awaiting the driver
    std::deque<TxSlot> tx_ring_;            // posted, serialising in order
    std::deque<BufferDescriptor> tx_done_;  // sent, awaiting the driver
    Time tx_wire_free_;
    std::uint64_t rx_frames_ = 0;
    std::uint64_t rx_dropped_ = 0;
    std::uint64_t tx_frames_ = 0;
    std::uint64_t tx_bytes_ = 0;
};

// ------------------------------------------------------------- components

/// NIC driver. Endpoints: rx_avail, rx_free, tx_avail, tx_free. Never maps
/// the data regions.
class EthDriver : public Component {
public:
    EthDriver(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void init(Context& ctx) override;
    void notified(Context& ctx, ChannelId channel) override;

private:
    void run(Context& ctx);

    NicModel* nic_ = nullptr;
    ProducerEnd<BufferDescriptor> rx_avail_;
    ConsumerEnd<BufferDescriptor> rx_free_;
    ConsumerEnd<BufferDescriptor> tx_avail_;
    ProducerEnd<BufferDescriptor> tx_free_;
};

enum class BroadcastScheme { refcount, arp, drop };

/// Receive virtualiser: demultiplexes by destination MAC, reading only the
/// Ethernet header. Params: {"clients": [mac owners], "broadcast":
/// "refcount"|"arp"|"drop", "arp_client": owner}.
class RxVirt : public Component {
public:
    RxVirt(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;
    void census(Census& c) const override;

    std::size_t clients() const { return client_names_.size(); }
    /// Live broadcast entries: driver offset -> outstanding references.
    const std::map<std::uint64_t, std::uint32_t>& broadcast_entries() const { return bcast_; }
    const RegionView& view() const { return view_; }

private:
    void give_back(Context& ctx, const BufferDescriptor& d);

    std::vector<std::string> client_names_;
    std::vector<std::uint64_t> client_macs_;
    BroadcastScheme scheme_ = BroadcastScheme::refcount;
    std::optional<std::size_t> arp_index_;
    std::string region_name_;
    RegionView view_;
    ConsumerEnd<BufferDescriptor> drv_avail_;
    ProducerEnd<BufferDescriptor> drv_free_;
    std::vector<ProducerEnd<BufferDescriptor>> cli_avail_;
    std::vector<ConsumerEnd<BufferDescriptor>> cli_free_;
    std::map<std::uint64_t, std::uint32_t> bcast_;
};

/// Transmit virtualiser: applies the sharing policy, sanitises and
/// translates client descriptors, and routes completed buffers home.
/// Params: {"clients": [tx sub-region owners], "policy": {...},
/// "monitor_ms": 10, "trigger": {"client": i, "threshold_mbps": x},
/// "swapper": name}.
class TxVirt : public Component {
public:
    TxVirt(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;
    void reset_private() override;

    /// Replace the policy in place. Queues, flags and counters are untouched.
    /// Charges the configured swap cost to the calling context.
    SwapEvent swap_policy(Context& ctx, std::unique_ptr<TxPolicy> next);

    const TxPolicy& policy() const { return *policy_; }
    std::size_t clients() const { return windows_.size(); }
    const std::vector<SwapEvent>& swaps() const { return swaps_; }
    std::uint64_t polls() const { return polls_; }
    std::uint64_t sent(std::size_t client) const { return sent_[client]; }
    /// Mb/s estimate for `client` at `now`.
    double monitored_mbps(std::size_t client, Time now) { return monitor_.mbps(client, now); }
    const std::optional<SwapTrigger>& trigger() const { return trigger_; }
    void arm_trigger() {
        if (trigger_) trigger_->armed = true;
    }
    /// Service order log (client index per forwarded frame), if enabled.
    const std::vector<std::uint32_t>& service_log() const { return log_; }

private:
    void run(Context& ctx);
    std::optional<std::size_t> owner_of(std::uint64_t global) const;

    std::vector<std::string> client_names_;
    std::vector<RegionWindow> windows_;
    nlohmann::json policy_config_;
    std::unique_ptr<TxPolicy> policy_;
    BandwidthMonitor monitor_;
    Time monitor_window_ = Time::ms(10);
    std::optional<SwapTrigger> trigger_;
    std::string swapper_;
    std::optional<ChannelId> swapper_channel_;
    bool log_service_ = false;
    std::vector<std::uint32_t> log_;
    ProducerEnd<BufferDescriptor> drv_avail_;
    ConsumerEnd<BufferDescriptor> drv_free_;
    std::vector<ConsumerEnd<BufferDescriptor>> cli_avail_;
    std::vector<ProducerEnd<BufferDescriptor>> cli_free_;
    std::vector<std::uint64_t> sent_;
    std::vector<SwapEvent> swaps_;
    std::optional<Time> triggered_at_;
    std::vector<std::uint32_t> head_;
    std::vector<std::pair<std::uint64_t, std::size_t>> by_base_;
    std::uint64_t polls_ = 0;
};

/// Copies received frames from the shared Rx region into one client's own
/// region. Endpoints: up_avail, up_free, cli_avail, cli_free. Mappings:
/// "src" (shared Rx region), "dst" (client region).
class Copier : public Component {
public:
    Copier(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;

    const RegionView& src_view() const { return src_; }
    const RegionView& dst_view() const { return dst_; }

private:
    RegionView src_;
    RegionView dst_;
    ConsumerEnd<BufferDescriptor> up_avail_;
    ProducerEnd<BufferDescriptor> up_free_;
    ProducerEnd<BufferDescriptor> cli_avail_;
    ConsumerEnd<BufferDescriptor> cli_free_;
};

/// Pass-through hop: forwards descriptors downstream and returns upstream.
/// Endpoints: in_avail, in_free, out_avail, out_free.
class NullForwarder : public Component {
public:
    NullForwarder(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;

private:
    ConsumerEnd<BufferDescriptor> in_avail_;
    ProducerEnd<BufferDescriptor> in_free_;
    ProducerEnd<BufferDescriptor> out_avail_;
    ConsumerEnd<BufferDescriptor> out_free_;
};

/// Sends every received frame back with source and destination swapped.
/// Endpoints: rx_avail, rx_free, tx_avail, tx_free. Mappings: "rx", "tx".
class EchoClient : public Component {
public:
    EchoClient(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void notified(Context& ctx, ChannelId channel) override;

protected:
    /// Handle one received frame. Returns the reply length written into
    /// `out`, or 0 to send nothing.
    virtual std::uint32_t respond(std::span<const std::uint8_t> in, std::span<std::uint8_t> out);
    std::uint64_t mac() const { return mac_; }
    std::uint32_t ip() const { return ip_; }

private:
    std::uint64_t mac_ = 0;
    std::uint32_t ip_ = 0;
    std::vector<std::uint8_t> scratch_;
    RegionView rx_;
    RegionView tx_;
    ConsumerEnd<BufferDescriptor> rx_avail_;
    ProducerEnd<BufferDescriptor> rx_free_;
    ProducerEnd<BufferDescriptor> tx_avail_;
    ConsumerEnd<BufferDescriptor> tx_free_;
};

/// Answers ARP requests on behalf of every client in the MAC table; other
/// broadcasts are dropped.
class ArpClient : public EchoClient {
public:
    ArpClient(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;

protected:
    std::uint32_t respond(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) override;

private:
    MacTable table_;
};

/// Originates traffic: saturating (no rate) or paced at rate_mbps.
/// Params: {"rate_mbps": r, "frame_bytes": n, "dst": mac string}.
/// Endpoints: tx_avail, tx_free. Mapping: "tx".
class TxSource : public Component {
public:
    TxSource(std::string name, const nlohmann::json& params);
    void attach(Binder& b) override;
    void init(Context& ctx) override;
    void notified(Context& ctx, ChannelId channel) override;
    void reset_private() override;

private:
    void fill(Context& ctx);

    std::optional<double> rate_mbps_;
    std::uint32_t frame_bytes_ = 1518;
    std::uint64_t dst_ = 0x02'00'00'00'ff'01ull;
    std::uint64_t mac_ = 0;
    std::uint64_t index_ = 0;
    std::uint64_t seq_ = 0;
    Time next_send_;
    RegionView tx_;
    ProducerEnd<BufferDescriptor> tx_avail_;
    ConsumerEnd<BufferDescriptor> tx_free_;
};

} // namespace modio
