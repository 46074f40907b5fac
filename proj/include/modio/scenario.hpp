#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "modio/region.hpp"
#include "modio/time.hpp"

namespace modio {

/// A scenario that cannot be wired up. The message names the offending
/// queue, channel, component or region.
class WiringError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HandlerCost {
    std::int64_t invocation_cycles = 0;
    std::int64_t per_item_cycles = 0;
};

/// Cycle costs charged by the runtime and by component handlers.
///
/// `syscall_surcharge_cycles` is added to every system call (each notify and
/// the receive that ends each activation) and may be negative; each call's
/// cost is floored at zero.
struct CostModel {
    double clock_hz = 1e9;
    std::int64_t notify_syscall_cycles = 493;
    std::int64_t context_switch_cycles = 493;
    std::int64_t cross_core_signal_cycles = 1500;
    double per_byte_copy_cycles = 2.0;
    std::int64_t queue_poll_cycles = 5;
    std::int64_t syscall_surcharge_cycles = 0;
    Time swap_cost = Time::us(17);
    std::map<std::string, HandlerCost> handlers;

    std::int64_t notify_cost() const;
    std::int64_t switch_cost() const;
    HandlerCost handler(const std::string& component_class) const;
    Time to_time(std::int64_t cycles) const;
    Time copy_time(std::uint64_t bytes) const;
    std::int64_t to_cycles(Time t) const;

    /// Defaults used by the shipped scenarios.
    static CostModel defaults();
};

struct SubRegionSpec {
    std::string owner;
    std::uint64_t first_slot = 0;
    std::uint64_t slot_count = 0;
};

struct RegionSpec {
    std::string name;
    std::uint32_t slot_size = 2048;
    std::uint64_t slot_count = 0;
    std::vector<SubRegionSpec> subregions;
};

enum class EntryKind { descriptor, block_request, block_response };

struct EndpointRef {
    std::string component;
    std::string endpoint;
    std::string str() const { return component + "." + endpoint; }
};

struct QueueSpec {
    std::string name;
    std::uint32_t capacity = 0;
    EntryKind entry = EntryKind::descriptor;
    std::vector<EndpointRef> producers;
    std::vector<EndpointRef> consumers;
    /// Region (and optional sub-region owner) the queued offsets refer to.
    std::string region;
    std::string subregion;
    /// Fill the queue with every slot of its window at build time.
    bool prefill = false;
};

struct MappingSpec {
    std::string as;
    std::string region;
    std::string subregion;
    Access access = Access::read;
};

struct ComponentSpec {
    std::string name;
    std::string cls;
    int core = 0;
    int priority = 100;
    std::vector<MappingSpec> maps;
    nlohmann::json params = nlohmann::json::object();
};

struct ChannelSpec {
    std::string a;
    std::string b;
};

struct MacEntry {
    std::string owner;
    std::uint64_t mac = 0;
    std::uint32_t ip = 0;
};

struct NicSpec {
    std::string driver;
    std::string rx_region;
    std::string tx_region;
    double line_rate_mbps = 1000.0;
    std::uint32_t frame_overhead_bytes = 20;
    std::uint32_t hw_rx_ring = 256;
    std::uint32_t hw_tx_ring = 256;
};

struct DiskSpec {
    std::string driver;
    std::string data_region;
    std::uint64_t capacity_blocks = 65536;
    std::uint32_t block_size = 512;
    std::uint32_t reorder_window = 8;
    Time fixed_service = Time::us(20);
    Time per_block_service = Time::ns(500);
    double error_rate = 0.0;
    /// Test hook: when false the driver issues past unretired barriers.
    bool enforce_barriers = true;
};

struct FlowSpec {
    /// "client-name", "broadcast", or "arp:client-name".
    std::string dst;
    double rate_mbps = 0.0;
    std::optional<double> ramp_to_mbps;
    double ramp_start_s = 0.0;
    double ramp_end_s = 0.0;
    double start_s = 0.0;
    std::optional<double> stop_s;
};

enum class ArrivalMode { constant, jitter };

struct WorkloadSpec {
    double duration_s = 1.0;
    double warmup_s = 0.1;
    double drain_s = 0.05;
    double sample_ms = 100.0;
    bool audit = false;
    // network load generator
    std::uint32_t frame_bytes = 1518;
    std::uint64_t generator_mac = 0x02'00'00'00'ff'01ull;
    std::uint32_t generator_ip = 0x0a'00'00'fe;
    ArrivalMode arrival = ArrivalMode::constant;
    double jitter_fraction = 0.2;
    std::vector<FlowSpec> flows;
};

/// Declarative system description: everything needed to build a runtime.
struct Scenario {
    std::string name = "scenario";
    int cores = 1;
    std::uint64_t seed = 1;
    CostModel costs = CostModel::defaults();
    std::vector<RegionSpec> regions;
    std::vector<ComponentSpec> components;
    std::vector<QueueSpec> queues;
    std::vector<ChannelSpec> channels;
    std::vector<MacEntry> mac_table;
    std::optional<NicSpec> nic;
    std::optional<DiskSpec> disk;
    WorkloadSpec workload;

    const ComponentSpec* find_component(const std::string& name) const;
    ComponentSpec* find_component(const std::string& name);
    const RegionSpec* find_region(const std::string& name) const;
    const MacEntry* find_mac(const std::string& owner) const;
};

/// Reject scenarios whose wiring is inconsistent. Throws WiringError.
void validate(const Scenario& s);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& s, const std::string& path);

std::string format_mac(std::uint64_t mac);
std::uint64_t parse_mac(const std::string& text);
std::string format_ip(std::uint32_t ip);
std::uint32_t parse_ip(const std::string& text);

} // namespace modio
