#include "modio/builders.hpp"

#include <algorithm>

namespace modio {

namespace {

constexpr std::uint32_t kSlot = 2048;
constexpr std::uint32_t kRxSlots = 512;
constexpr std::uint32_t kDriverQueue = 512;
constexpr std::uint32_t kCopierSlots = 256;

EndpointRef ep(const std::string& component, const std::string& endpoint) {
    return {component, endpoint};
}

QueueSpec queue(const std::string& name, std::uint32_t capacity, EndpointRef producer,
                EndpointRef consumer, const std::string& region, const std::string& sub = "",
                bool prefill = false) {
    QueueSpec q;
    q.name = name;
    q.capacity = capacity;
    q.producers = {std::move(producer)};
    q.consumers = {std::move(consumer)};
    q.region = region;
    q.subregion = sub;
    q.prefill = prefill;
    return q;
}

ComponentSpec component(const std::string& name, const std::string& cls, int core, int priority,
                        nlohmann::json params = nlohmann::json::object()) {
    ComponentSpec c;
    c.name = name;
    c.cls = cls;
    c.core = core;
    c.priority = priority;
    c.params = std::move(params);
    return c;
}

std::uint32_t pow2_at_least(std::uint64_t n) {
    std::uint32_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::string idx(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

} // namespace

std::string client_name(std::size_t i) { return "client" + std::to_string(i); }

Scenario echo_scenario(const EchoOptions& o) {
    Scenario s;
    s.name = o.name;
    s.seed = o.seed;
    s.cores = o.multicore ? 3 : 1;
    s.costs.syscall_surcharge_cycles = o.surcharge_cycles;
    const int virt_core = o.multicore ? 1 : 0;
    const int client_core = o.multicore ? 2 : 0;

    std::vector<std::string> names;
    for (std::size_t i = 0; i < o.clients; ++i) names.push_back(client_name(i));
    if (o.arp_client) names.push_back("arp");
    const auto tx_slots = pow2_at_least(o.tx_slots_per_client);

    RegionSpec rx{"rx", kSlot, kRxSlots, {}};
    RegionSpec tx{"tx", kSlot, tx_slots * names.size(), {}};
    for (std::size_t i = 0; i < names.size(); ++i) {
        tx.subregions.push_back({names[i], i * tx_slots, tx_slots});
    }
    s.regions = {rx, tx};

    nlohmann::json rx_params = {{"clients", names}, {"broadcast", o.broadcast}};
    if (o.arp_client) rx_params["arp_client"] = "arp";
    s.components.push_back(component("eth", "eth_driver", 0, 50));
    s.components.push_back(component("rx_virt", "rx_virt", virt_core, 100, rx_params));
    s.components.back().maps.push_back({"rx", "rx", "", Access::header});
    s.components.push_back(component("tx_virt", "tx_virt", virt_core, 110, {{"clients", names}}));

    s.queues.push_back(
        queue("drv_rx_avail", kDriverQueue, ep("eth", "rx_avail"), ep("rx_virt", "drv_rx_avail"), "rx"));
    s.queues.push_back(queue("drv_rx_free", kDriverQueue, ep("rx_virt", "drv_rx_free"),
                             ep("eth", "rx_free"), "rx", "", true));
    s.queues.push_back(
        queue("drv_tx_avail", kDriverQueue, ep("tx_virt", "drv_tx_avail"), ep("eth", "tx_avail"), "tx"));
    s.queues.push_back(
        queue("drv_tx_free", kDriverQueue, ep("eth", "tx_free"), ep("tx_virt", "drv_tx_free"), "tx"));
    s.channels.push_back({"eth", "rx_virt"});
    s.channels.push_back({"eth", "tx_virt"});

    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& c = names[i];
        // Upstream end of this client's receive path, as seen from RxVirt.
        std::string up = "rx_virt";
        EndpointRef up_avail = ep("rx_virt", idx("cli_rx_avail", i));
        EndpointRef up_free = ep("rx_virt", idx("cli_rx_free", i));

        if (o.null_fwd && i == 0) {
            s.components.push_back(component("null_fwd", "null_fwd", virt_core, 125));
            s.queues.push_back(queue("nf_in_avail", kRxSlots, up_avail, ep("null_fwd", "in_avail"), "rx"));
            s.queues.push_back(queue("nf_in_free", kRxSlots, ep("null_fwd", "in_free"), up_free, "rx"));
            s.channels.push_back({up, "null_fwd"});
            up = "null_fwd";
            up_avail = ep("null_fwd", "out_avail");
            up_free = ep("null_fwd", "out_free");
        }

        std::string rx_region = "rx";
        if (o.copier) {
            const auto cp = "copier_" + c;
            rx_region = "rx_" + c;
            s.regions.push_back(RegionSpec{rx_region, kSlot, kCopierSlots, {}});
            s.components.push_back(component(cp, "copier", client_core, 150));
            s.components.back().maps.push_back({"src", "rx", "", Access::read});
            s.components.back().maps.push_back({"dst", rx_region, "", Access::read_write});
            s.queues.push_back(queue("cp_up_avail_" + c, kRxSlots, up_avail, ep(cp, "up_avail"), "rx"));
            s.queues.push_back(queue("cp_up_free_" + c, kRxSlots, ep(cp, "up_free"), up_free, "rx"));
            s.channels.push_back({up, cp});
            up = cp;
            up_avail = ep(cp, "cli_avail");
            up_free = ep(cp, "cli_free");
        }

        s.components.push_back(component(c, c == "arp" ? "arp_client" : "echo_client", client_core, 200));
        s.components.back().maps.push_back({"rx", rx_region, "", Access::read});
        s.components.back().maps.push_back({"tx", "tx", c, Access::read_write});
        // at least as deep as the buffer pool behind them, so RxVirt never overflows
        const std::uint32_t cli_q = o.copier ? kCopierSlots : kRxSlots;
        s.queues.push_back(queue("rx_avail_" + c, cli_q, up_avail, ep(c, "rx_avail"), rx_region));
        s.queues.push_back(
            queue("rx_free_" + c, cli_q, ep(c, "rx_free"), up_free, rx_region, "", o.copier));
        s.queues.push_back(queue("tx_avail_" + c, tx_slots, ep(c, "tx_avail"),
                                 ep("tx_virt", idx("cli_tx_avail", i)), "tx", c));
        s.queues.push_back(queue("tx_free_" + c, tx_slots, ep("tx_virt", idx("cli_tx_free", i)),
                                 ep(c, "tx_free"), "tx", c, true));
        s.channels.push_back({up, c});
        s.channels.push_back({"tx_virt", c});

        s.mac_table.push_back({c, 0x02'00'00'00'01'00ull + i, 0x0a'00'01'00u + static_cast<std::uint32_t>(i) + 1});
    }

    NicSpec nic;
    nic.driver = "eth";
    nic.rx_region = "rx";
    nic.tx_region = "tx";
    s.nic = nic;

    auto& w = s.workload;
    w.duration_s = o.duration_s;
    w.warmup_s = o.warmup_s;
    w.frame_bytes = o.frame_bytes;
    w.audit = o.audit;
    if (o.rate_mbps > 0) {
        if (o.spread) {
            for (std::size_t i = 0; i < o.clients; ++i) {
                FlowSpec f;
                f.dst = names[i];
                f.rate_mbps = o.rate_mbps / static_cast<double>(o.clients);
                w.flows.push_back(f);
            }
        } else {
            FlowSpec f;
            f.dst = names[0];
            f.rate_mbps = o.rate_mbps;
            w.flows.push_back(f);
        }
    }
    if (o.broadcast_mbps > 0) {
        FlowSpec f;
        f.dst = o.arp_client ? "arp:" + names[0] : "broadcast";
        f.rate_mbps = o.broadcast_mbps;
        w.flows.push_back(f);
    }
    return s;
}

Scenario swap_scenario(const SwapOptions& o) {
    EchoOptions e;
    e.name = o.name;
    e.clients = 2;
    e.copier = true;
    e.rate_mbps = 0;
    e.seed = o.seed;
    e.audit = o.audit;
    e.duration_s = o.duration_s;
    e.warmup_s = o.warmup_s;
    auto s = echo_scenario(e);
    s.workload.sample_ms = o.sample_ms;

    FlowSpec steady;
    steady.dst = client_name(0);
    steady.rate_mbps = o.client0_mbps;
    FlowSpec ramp;
    ramp.dst = client_name(1);
    ramp.rate_mbps = o.client1_start_mbps;
    ramp.ramp_to_mbps = o.client1_end_mbps;
    ramp.ramp_start_s = o.ramp_start_s;
    ramp.ramp_end_s = o.ramp_end_s;
    s.workload.flows = {steady, ramp};

    auto* tx = s.find_component("tx_virt");
    tx->params["trigger"] = {{"client", 1}, {"threshold_mbps", o.threshold_mbps}};
    tx->params["swapper"] = "swapper";
    s.components.push_back(component(
        "swapper", "swapper", 0, 250,
        {{"target", "tx_virt"},
         {"policy",
          {{"variant", "token_bucket"}, {"limits", {{"1", {{"rate_mbps", o.limit_mbps}}}}}}}}));
    s.channels.push_back({"tx_virt", "swapper"});
    return s;
}

Scenario storage_scenario(const StorageOptions& o) {
    Scenario s;
    s.name = o.name;
    s.seed = o.seed;
    s.cores = 1;

    constexpr std::uint32_t kBlock = 512;
    const auto slot = pow2_at_least(std::uint64_t{o.blocks_per_request} * kBlock);
    const auto per_client = pow2_at_least(o.queue_depth);
    RegionSpec data{"blk_data", slot, per_client * o.clients, {}};

    nlohmann::json parts = nlohmann::json::array();
    for (std::size_t i = 0; i < o.clients; ++i) {
        const auto c = "blk" + std::to_string(i);
        data.subregions.push_back({c, i * per_client, per_client});
        parts.push_back({{"name", c},
                         {"start_lba", i * o.blocks_per_client},
                         {"length", o.blocks_per_client}});
    }
    s.regions = {data};

    const auto q = pow2_at_least(std::max<std::uint64_t>(o.queue_depth * o.clients, 2));
    s.components.push_back(component("blk_drv", "blk_driver", 0, 254));
    s.components.push_back(component("blk_virt", "blk_virt", 0, 200, {{"clients", parts}}));
    auto rq = queue("drv_rq", q, ep("blk_virt", "drv_rq"), ep("blk_drv", "rq"), "blk_data");
    rq.entry = EntryKind::block_request;
    auto rs = queue("drv_rs", q, ep("blk_drv", "rs"), ep("blk_virt", "drv_rs"), "");
    rs.entry = EntryKind::block_response;
    s.queues = {rq, rs};
    s.channels.push_back({"blk_drv", "blk_virt"});

    for (std::size_t i = 0; i < o.clients; ++i) {
        const auto c = "blk" + std::to_string(i);
        nlohmann::json params = {{"virt", "blk_virt"},
                                 {"queue_depth", o.queue_depth},
                                 {"requests", o.requests},
                                 {"read_fraction", o.read_fraction},
                                 {"barrier_every", o.barrier_every},
                                 {"pattern", o.pattern},
                                 {"blocks", o.blocks_per_request},
                                 {"seed", o.seed + i},
                                 {"out_of_range_every", o.out_of_range_every}};
        s.components.push_back(component(c, "blk_client", 0, 100, params));
        s.components.back().maps.push_back({"data", "blk_data", c, Access::read_write});
        auto crq = queue("rq_" + c, per_client, ep(c, "rq"), ep("blk_virt", idx("cli_rq", i)),
                         "blk_data", c);
        crq.entry = EntryKind::block_request;
        auto crs = queue("rs_" + c, per_client, ep("blk_virt", idx("cli_rs", i)), ep(c, "rs"), "");
        crs.entry = EntryKind::block_response;
        s.queues.push_back(crq);
        s.queues.push_back(crs);
        s.channels.push_back({"blk_virt", c});
    }

    DiskSpec d;
    d.driver = "blk_drv";
    d.data_region = "blk_data";
    d.capacity_blocks = o.blocks_per_client * o.clients;
    d.block_size = kBlock;
    d.reorder_window = o.reorder_window;
    d.error_rate = o.error_rate;
    d.enforce_barriers = o.enforce_barriers;
    s.disk = d;

    s.workload.duration_s = o.duration_s;
    s.workload.warmup_s = 0.0;
    s.workload.drain_s = 0.0;
    return s;
}

} // namespace modio
