#include "modio/scenario.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace modio {

using nlohmann::json;

// ---------------------------------------------------------------- CostModel

std::int64_t CostModel::notify_cost() const {
    return std::max<std::int64_t>(0, notify_syscall_cycles + syscall_surcharge_cycles);
}

std::int64_t CostModel::switch_cost() const {
    return std::max<std::int64_t>(0, context_switch_cycles + syscall_surcharge_cycles);
}

HandlerCost CostModel::handler(const std::string& component_class) const {
    auto it = handlers.find(component_class);
    return it == handlers.end() ? HandlerCost{} : it->second;
}

Time CostModel::to_time(std::int64_t cycles) const {
    return Time::ps(static_cast<std::int64_t>(std::llround(static_cast<double>(cycles) * 1e12 / clock_hz)));
}

Time CostModel::copy_time(std::uint64_t bytes) const {
    const double cycles = per_byte_copy_cycles * static_cast<double>(bytes);
    return Time::ps(static_cast<std::int64_t>(std::llround(cycles * 1e12 / clock_hz)));
}

std::int64_t CostModel::to_cycles(Time t) const {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(t.as_ps()) * clock_hz / 1e12));
}

CostModel CostModel::defaults() {
    CostModel c;
    c.handlers = {
        {"eth_driver", {600, 300}},  {"rx_virt", {600, 400}},   {"tx_virt", {600, 400}},
        {"copier", {600, 300}},      {"echo_client", {600, 3500}}, {"null_fwd", {300, 100}},
        {"arp_client", {600, 400}},  {"tx_source", {600, 300}}, {"swapper", {300, 0}},
        {"blk_driver", {600, 400}},  {"blk_virt", {600, 400}},  {"blk_client", {600, 300}},
    };
    return c;
}

// ----------------------------------------------------------------- Scenario

const ComponentSpec* Scenario::find_component(const std::string& n) const {
    for (const auto& c : components) {
        if (c.name == n) {
            return &c;
        }
    }
    return nullptr;
}

ComponentSpec* Scenario::find_component(const std::string& n) {
    for (auto& c : components) {
        if (c.name == n) {
            return &c;
        }
    }
    return nullptr;
}

const RegionSpec* Scenario::find_region(const std::string& n) const {
    for (const auto& r : regions) {
        if (r.name == n) {
            return &r;
        }
    }
    return nullptr;
}

const MacEntry* Scenario::find_mac(const std::string& owner) const {
    for (const auto& m : mac_table) {
        if (m.owner == owner) {
            return &m;
        }
    }
    return nullptr;
}

// --------------------------------------------------------------- validation

namespace {

void fail(const std::string& what) { throw WiringError(what); }

void check_region_ref(const Scenario& s, const std::string& who, const std::string& region,
                      const std::string& sub) {
    const auto* r = s.find_region(region);
    if (r == nullptr) {
        fail(who + ": unknown region '" + region + "'");
    }
    if (!sub.empty()) {
        const bool found = std::any_of(r->subregions.begin(), r->subregions.end(),
                                       [&](const SubRegionSpec& x) { return x.owner == sub; });
        if (!found) {
            fail(who + ": region '" + region + "' has no sub-region owned by '" + sub + "'");
        }
    }
}

} // namespace

void validate(const Scenario& s) {
    if (s.cores < 1 || s.cores > 256) {
        fail("scenario '" + s.name + "': core count must be in [1, 256]");
    }
    if (s.costs.clock_hz <= 0) {
        fail("costs: clock_hz must be positive");
    }
    if (s.costs.notify_syscall_cycles < 0 || s.costs.context_switch_cycles < 0 ||
        s.costs.cross_core_signal_cycles < 0 || s.costs.per_byte_copy_cycles < 0 ||
        s.costs.queue_poll_cycles < 0 || s.costs.swap_cost < Time{}) {
        fail("costs: cycle costs must be non-negative");
    }

    std::set<std::string> names;
    for (const auto& c : s.components) {
        if (c.name.empty()) {
            fail("component with empty name");
        }
        if (!names.insert(c.name).second) {
            fail("component '" + c.name + "' declared twice");
        }
        if (c.core < 0 || c.core >= s.cores) {
            fail("component '" + c.name + "': core " + std::to_string(c.core) + " out of range");
        }
    }

    std::set<std::string> region_names;
    for (const auto& r : s.regions) {
        if (!region_names.insert(r.name).second) {
            fail("region '" + r.name + "' declared twice");
        }
        if (r.slot_size == 0 || !std::has_single_bit(r.slot_size)) {
            fail("region '" + r.name + "': slot size must be a power of two");
        }
        if (r.slot_count == 0) {
            fail("region '" + r.name + "': slot count must be positive");
        }
        auto subs = r.subregions;
        std::set<std::string> owners;
        for (const auto& sub : subs) {
            if (!owners.insert(sub.owner).second) {
                fail("region '" + r.name + "': sub-region owner '" + sub.owner + "' appears twice");
            }
            if (sub.slot_count == 0 || sub.first_slot + sub.slot_count > r.slot_count) {
                fail("region '" + r.name + "': sub-region '" + sub.owner + "' out of bounds");
            }
        }
        std::sort(subs.begin(), subs.end(),
                  [](const auto& a, const auto& b) { return a.first_slot < b.first_slot; });
        for (std::size_t i = 1; i < subs.size(); ++i) {
            if (subs[i].first_slot < subs[i - 1].first_slot + subs[i - 1].slot_count) {
                fail("region '" + r.name + "': sub-regions '" + subs[i - 1].owner + "' and '" +
                     subs[i].owner + "' overlap");
            }
        }
    }

    std::set<std::pair<std::string, std::string>> channel_pairs;
    for (const auto& ch : s.channels) {
        const std::string label = "channel " + ch.a + "<->" + ch.b;
        if (s.find_component(ch.a) == nullptr || s.find_component(ch.b) == nullptr) {
            fail(label + " is dangling: unknown component '" +
                 (s.find_component(ch.a) == nullptr ? ch.a : ch.b) + "'");
        }
        if (ch.a == ch.b) {
            fail(label + " connects a component to itself");
        }
        auto key = std::minmax(ch.a, ch.b);
        if (!channel_pairs.insert({key.first, key.second}).second) {
            fail(label + " declared twice");
        }
    }

    std::set<std::string> queue_names;
    std::set<std::string> producer_eps;
    std::set<std::string> consumer_eps;
    for (const auto& q : s.queues) {
        const std::string label = "queue '" + q.name + "'";
        if (!queue_names.insert(q.name).second) {
            fail(label + " declared twice");
        }
        if (q.capacity == 0 || !std::has_single_bit(q.capacity)) {
            fail(label + ": capacity must be a power of two");
        }
        if (q.producers.size() != 1) {
            fail(label + " has " + std::to_string(q.producers.size()) +
                 " producers (exactly one required)");
        }
        if (q.consumers.size() != 1) {
            fail(label + " has " + std::to_string(q.consumers.size()) +
                 " consumers (exactly one required)");
        }
        const auto& p = q.producers.front();
        const auto& c = q.consumers.front();
        for (const auto* ep : {&p, &c}) {
            if (s.find_component(ep->component) == nullptr) {
                fail(label + ": unknown component '" + ep->component + "'");
            }
        }
        if (p.component == c.component) {
            fail(label + ": producer and consumer are the same component");
        }
        if (!producer_eps.insert(p.str()).second) {
            fail(label + ": endpoint " + p.str() + " already produces another queue");
        }
        if (!consumer_eps.insert(c.str()).second) {
            fail(label + ": endpoint " + c.str() + " already consumes another queue");
        }
        auto key = std::minmax(p.component, c.component);
        if (channel_pairs.count({key.first, key.second}) == 0) {
            fail(label + ": no channel between '" + p.component + "' and '" + c.component + "'");
        }
        if (!q.region.empty()) {
            check_region_ref(s, label, q.region, q.subregion);
        } else if (q.prefill) {
            fail(label + ": prefill requires a region");
        }
        if (q.prefill && q.entry != EntryKind::descriptor) {
            fail(label + ": only descriptor queues can be prefilled");
        }
    }

    for (const auto& c : s.components) {
        std::set<std::string> as;
        for (const auto& m : c.maps) {
            const std::string label = "component '" + c.name + "' mapping '" + m.as + "'";
            if (!as.insert(m.as).second) {
                fail(label + " declared twice");
            }
            check_region_ref(s, label, m.region, m.subregion);
        }
    }

    std::set<std::uint64_t> macs;
    for (const auto& m : s.mac_table) {
        if (s.find_component(m.owner) == nullptr) {
            fail("mac table: unknown owner '" + m.owner + "'");
        }
        if (!macs.insert(m.mac).second) {
            fail("mac table: address " + format_mac(m.mac) + " assigned twice");
        }
    }

    if (s.nic) {
        if (s.find_component(s.nic->driver) == nullptr) {
            fail("nic: unknown driver '" + s.nic->driver + "'");
        }
        check_region_ref(s, "nic", s.nic->rx_region, "");
        check_region_ref(s, "nic", s.nic->tx_region, "");
        if (s.nic->line_rate_mbps <= 0) {
            fail("nic: line rate must be positive");
        }
    }
    if (s.disk) {
        if (s.find_component(s.disk->driver) == nullptr) {
            fail("disk: unknown driver '" + s.disk->driver + "'");
        }
        check_region_ref(s, "disk", s.disk->data_region, "");
        if (s.disk->reorder_window == 0) {
            fail("disk: reorder window must be >= 1");
        }
    }

    const auto& w = s.workload;
    if (w.duration_s <= 0 || w.warmup_s < 0 || w.warmup_s >= w.duration_s) {
        fail("workload: duration must exceed warm-up");
    }
    if (w.frame_bytes < 64 || w.frame_bytes > 1518) {
        fail("workload: frame size must be in [64, 1518]");
    }
    for (const auto& f : w.flows) {
        std::string target = f.dst;
        if (target.rfind("arp:", 0) == 0) {
            target = target.substr(4);
        }
        if (target != "broadcast" && target != "unknown" && s.find_mac(target) == nullptr) {
            fail("workload flow: destination '" + f.dst + "' has no MAC table entry");
        }
    }
}

// -------------------------------------------------------------- MAC and IP

std::string format_mac(std::uint64_t mac) {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                  static_cast<unsigned>((mac >> 40) & 0xff), static_cast<unsigned>((mac >> 32) & 0xff),
                  static_cast<unsigned>((mac >> 24) & 0xff), static_cast<unsigned>((mac >> 16) & 0xff),
                  static_cast<unsigned>((mac >> 8) & 0xff), static_cast<unsigned>(mac & 0xff));
    return buf;
}

std::uint64_t parse_mac(const std::string& text) {
    unsigned b[6];
    char tail = 0;
    if (std::sscanf(text.c_str(), "%2x:%2x:%2x:%2x:%2x:%2x%c", &b[0], &b[1], &b[2], &b[3], &b[4],
                    &b[5], &tail) != 6) {
        throw ConfigError("malformed MAC address '" + text + "'");
    }
    std::uint64_t mac = 0;
    for (unsigned x : b) {
        mac = (mac << 8) | x;
    }
    return mac;
}

std::string format_ip(std::uint32_t ip) {
    return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) + "." +
           std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
}

std::uint32_t parse_ip(const std::string& text) {
    unsigned b[4];
    char tail = 0;
    if (std::sscanf(text.c_str(), "%u.%u.%u.%u%c", &b[0], &b[1], &b[2], &b[3], &tail) != 4 ||
        b[0] > 255 || b[1] > 255 || b[2] > 255 || b[3] > 255) {
        throw ConfigError("malformed IPv4 address '" + text + "'");
    }
    return (b[0] << 24) | (b[1] << 16) | (b[2] << 8) | b[3];
}

// --------------------------------------------------------------------- JSON

namespace {

// Reads fields out of one JSON object and rejects any key nobody asked for.
class Obj {
public:
    Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) {
            throw ConfigError(where_ + ": expected an object");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    void require(const char* key, T& out) {
        if (!j_.contains(key)) {
            throw ConfigError(where_ + ": missing '" + key + "'");
        }
        get(key, out);
    }

    const json* sub(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (seen_.count(it.key()) == 0) {
                throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
            }
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

Access parse_access(const std::string& s) {
    if (s == "none") return Access::none;
    if (s == "header") return Access::header;
    if (s == "read") return Access::read;
    if (s == "read_write") return Access::read_write;
    throw ConfigError("unknown access '" + s + "'");
}

const char* access_name(Access a) {
    switch (a) {
    case Access::none: return "none";
    case Access::header: return "header";
    case Access::read: return "read";
    case Access::read_write: return "read_write";
    }
    return "none";
}

EntryKind parse_entry(const std::string& s) {
    if (s == "descriptor") return EntryKind::descriptor;
    if (s == "block_request") return EntryKind::block_request;
    if (s == "block_response") return EntryKind::block_response;
    throw ConfigError("unknown queue entry kind '" + s + "'");
}

const char* entry_name(EntryKind e) {
    switch (e) {
    case EntryKind::descriptor: return "descriptor";
    case EntryKind::block_request: return "block_request";
    case EntryKind::block_response: return "block_response";
    }
    return "descriptor";
}

EndpointRef parse_endpoint(const std::string& s, const std::string& where) {
    const auto dot = s.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == s.size()) {
        throw ConfigError(where + ": endpoint '" + s + "' must be component.endpoint");
    }
    return {s.substr(0, dot), s.substr(dot + 1)};
}

std::vector<EndpointRef> parse_endpoints(const json& j, const std::string& where) {
    std::vector<EndpointRef> out;
    if (j.is_string()) {
        out.push_back(parse_endpoint(j.get<std::string>(), where));
    } else if (j.is_array()) {
        for (const auto& x : j) {
            out.push_back(parse_endpoint(x.get<std::string>(), where));
        }
    } else {
        throw ConfigError(where + ": endpoint must be a string or list");
    }
    return out;
}

json endpoints_json(const std::vector<EndpointRef>& eps) {
    if (eps.size() == 1) {
        return eps.front().str();
    }
    json a = json::array();
    for (const auto& e : eps) {
        a.push_back(e.str());
    }
    return a;
}

CostModel parse_costs(const json& j) {
    CostModel c = CostModel::defaults();
    Obj o(j, "costs");
    o.get("clock_hz", c.clock_hz);
    o.get("notify_syscall_cycles", c.notify_syscall_cycles);
    o.get("context_switch_cycles", c.context_switch_cycles);
    o.get("cross_core_signal_cycles", c.cross_core_signal_cycles);
    o.get("per_byte_copy_cycles", c.per_byte_copy_cycles);
    o.get("queue_poll_cycles", c.queue_poll_cycles);
    o.get("syscall_surcharge_cycles", c.syscall_surcharge_cycles);
    double swap_us = c.swap_cost.as_us();
    o.get("swap_cost_us", swap_us);
    c.swap_cost = Time::seconds(swap_us * 1e-6);
    if (const auto* h = o.sub("handlers")) {
        if (!h->is_object()) {
            throw ConfigError("costs.handlers: expected an object");
        }
        for (auto it = h->begin(); it != h->end(); ++it) {
            HandlerCost hc = c.handler(it.key());
            Obj ho(*it, "costs.handlers." + it.key());
            ho.get("invocation_cycles", hc.invocation_cycles);
            ho.get("per_item_cycles", hc.per_item_cycles);
            ho.done();
            c.handlers[it.key()] = hc;
        }
    }
    o.done();
    return c;
}

json costs_json(const CostModel& c) {
    json j;
    j["clock_hz"] = c.clock_hz;
    j["notify_syscall_cycles"] = c.notify_syscall_cycles;
    j["context_switch_cycles"] = c.context_switch_cycles;
    j["cross_core_signal_cycles"] = c.cross_core_signal_cycles;
    j["per_byte_copy_cycles"] = c.per_byte_copy_cycles;
    j["queue_poll_cycles"] = c.queue_poll_cycles;
    j["syscall_surcharge_cycles"] = c.syscall_surcharge_cycles;
    j["swap_cost_us"] = c.swap_cost.as_us();
    json h = json::object();
    for (const auto& [k, v] : c.handlers) {
        h[k] = {{"invocation_cycles", v.invocation_cycles}, {"per_item_cycles", v.per_item_cycles}};
    }
    j["handlers"] = h;
    return j;
}

} // namespace

Scenario scenario_from_json(const json& j) {
    Scenario s;
    Obj top(j, "scenario");
    top.get("name", s.name);
    top.get("cores", s.cores);
    top.get("seed", s.seed);
    if (const auto* c = top.sub("costs")) {
        s.costs = parse_costs(*c);
    }

    if (const auto* rs = top.sub("regions")) {
        for (const auto& rj : *rs) {
            RegionSpec r;
            Obj o(rj, "region");
            o.require("name", r.name);
            o.get("slot_size", r.slot_size);
            o.require("slot_count", r.slot_count);
            if (const auto* subs = o.sub("subregions")) {
                for (const auto& sj : *subs) {
                    SubRegionSpec sub;
                    Obj so(sj, "region '" + r.name + "' sub-region");
                    so.require("owner", sub.owner);
                    so.require("first_slot", sub.first_slot);
                    so.require("slot_count", sub.slot_count);
                    so.done();
                    r.subregions.push_back(sub);
                }
            }
            o.done();
            s.regions.push_back(std::move(r));
        }
    }

    if (const auto* cs = top.sub("components")) {
        for (const auto& cj : *cs) {
            ComponentSpec c;
            Obj o(cj, "component");
            o.require("name", c.name);
            o.require("class", c.cls);
            o.get("core", c.core);
            o.get("priority", c.priority);
            if (const auto* p = o.sub("params")) {
                if (!p->is_object()) {
                    throw ConfigError("component '" + c.name + "': params must be an object");
                }
                c.params = *p;
            }
            if (const auto* maps = o.sub("maps")) {
                for (const auto& mj : *maps) {
                    MappingSpec m;
                    std::string access = "read";
                    Obj mo(mj, "component '" + c.name + "' mapping");
                    mo.require("as", m.as);
                    mo.require("region", m.region);
                    mo.get("subregion", m.subregion);
                    mo.get("access", access);
                    mo.done();
                    m.access = parse_access(access);
                    c.maps.push_back(std::move(m));
                }
            }
            o.done();
            s.components.push_back(std::move(c));
        }
    }

    if (const auto* qs = top.sub("queues")) {
        for (const auto& qj : *qs) {
            QueueSpec q;
            std::string entry = "descriptor";
            Obj o(qj, "queue");
            o.require("name", q.name);
            const std::string where = "queue '" + q.name + "'";
            o.require("capacity", q.capacity);
            o.get("entry", entry);
            q.entry = parse_entry(entry);
            if (const auto* p = o.sub("producer")) {
                q.producers = parse_endpoints(*p, where);
            }
            if (const auto* c = o.sub("consumer")) {
                q.consumers = parse_endpoints(*c, where);
            }
            o.get("region", q.region);
            o.get("subregion", q.subregion);
            o.get("prefill", q.prefill);
            o.done();
            s.queues.push_back(std::move(q));
        }
    }

    if (const auto* chs = top.sub("channels")) {
        for (const auto& cj : *chs) {
            if (!cj.is_array() || cj.size() != 2) {
                throw ConfigError("channel must be a pair [a, b]");
            }
            s.channels.push_back({cj[0].get<std::string>(), cj[1].get<std::string>()});
        }
    }

    if (const auto* ms = top.sub("mac_table")) {
        for (const auto& mj : *ms) {
            MacEntry m;
            std::string mac;
            std::string ip = "0.0.0.0";
            Obj o(mj, "mac_table entry");
            o.require("owner", m.owner);
            o.require("mac", mac);
            o.get("ip", ip);
            o.done();
            m.mac = parse_mac(mac);
            m.ip = parse_ip(ip);
            s.mac_table.push_back(std::move(m));
        }
    }

    if (const auto* nj = top.sub("nic")) {
        NicSpec n;
        Obj o(*nj, "nic");
        o.require("driver", n.driver);
        o.require("rx_region", n.rx_region);
        o.require("tx_region", n.tx_region);
        o.get("line_rate_mbps", n.line_rate_mbps);
        o.get("frame_overhead_bytes", n.frame_overhead_bytes);
        o.get("hw_rx_ring", n.hw_rx_ring);
        o.get("hw_tx_ring", n.hw_tx_ring);
        o.done();
        s.nic = n;
    }

    if (const auto* dj = top.sub("disk")) {
        DiskSpec d;
        double fixed_us = d.fixed_service.as_us();
        double per_block_ns = d.per_block_service.as_ns();
        Obj o(*dj, "disk");
        o.require("driver", d.driver);
        o.require("data_region", d.data_region);
        o.get("capacity_blocks", d.capacity_blocks);
        o.get("block_size", d.block_size);
        o.get("reorder_window", d.reorder_window);
        o.get("fixed_service_us", fixed_us);
        o.get("per_block_service_ns", per_block_ns);
        o.get("error_rate", d.error_rate);
        o.get("enforce_barriers", d.enforce_barriers);
        o.done();
        d.fixed_service = Time::seconds(fixed_us * 1e-6);
        d.per_block_service = Time::seconds(per_block_ns * 1e-9);
        s.disk = d;
    }

    if (const auto* wj = top.sub("workload")) {
        auto& w = s.workload;
        std::string gen_mac = format_mac(w.generator_mac);
        std::string gen_ip = format_ip(w.generator_ip);
        std::string arrival = "constant";
        Obj o(*wj, "workload");
        o.get("duration_s", w.duration_s);
        o.get("warmup_s", w.warmup_s);
        o.get("drain_s", w.drain_s);
        o.get("sample_ms", w.sample_ms);
        o.get("audit", w.audit);
        o.get("frame_bytes", w.frame_bytes);
        o.get("generator_mac", gen_mac);
        o.get("generator_ip", gen_ip);
        o.get("arrival", arrival);
        o.get("jitter_fraction", w.jitter_fraction);
        if (const auto* fs = o.sub("flows")) {
            for (const auto& fj : *fs) {
                FlowSpec f;
                Obj fo(fj, "workload flow");
                fo.require("dst", f.dst);
                fo.require("rate_mbps", f.rate_mbps);
                double ramp_to = -1;
                fo.get("ramp_to_mbps", ramp_to);
                if (ramp_to >= 0) {
                    f.ramp_to_mbps = ramp_to;
                }
                fo.get("ramp_start_s", f.ramp_start_s);
                fo.get("ramp_end_s", f.ramp_end_s);
                fo.get("start_s", f.start_s);
                double stop = -1;
                fo.get("stop_s", stop);
                if (stop >= 0) {
                    f.stop_s = stop;
                }
                fo.done();
                w.flows.push_back(std::move(f));
            }
        }
        o.done();
        w.generator_mac = parse_mac(gen_mac);
        w.generator_ip = parse_ip(gen_ip);
        if (arrival == "constant") {
            w.arrival = ArrivalMode::constant;
        } else if (arrival == "jitter") {
            w.arrival = ArrivalMode::jitter;
        } else {
            throw ConfigError("workload.arrival: unknown mode '" + arrival + "'");
        }
    }
    top.done();
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["cores"] = s.cores;
    j["seed"] = s.seed;
    j["costs"] = costs_json(s.costs);

    json regions = json::array();
    for (const auto& r : s.regions) {
        json rj = {{"name", r.name}, {"slot_size", r.slot_size}, {"slot_count", r.slot_count}};
        if (!r.subregions.empty()) {
            json subs = json::array();
            for (const auto& sub : r.subregions) {
                subs.push_back({{"owner", sub.owner},
                                {"first_slot", sub.first_slot},
                                {"slot_count", sub.slot_count}});
            }
            rj["subregions"] = subs;
        }
        regions.push_back(rj);
    }
    j["regions"] = regions;

    json comps = json::array();
    for (const auto& c : s.components) {
        json cj = {{"name", c.name}, {"class", c.cls}, {"core", c.core}, {"priority", c.priority}};
        if (!c.maps.empty()) {
            json maps = json::array();
            for (const auto& m : c.maps) {
                json mj = {{"as", m.as}, {"region", m.region}, {"access", access_name(m.access)}};
                if (!m.subregion.empty()) {
                    mj["subregion"] = m.subregion;
                }
                maps.push_back(mj);
            }
            cj["maps"] = maps;
        }
        if (!c.params.empty()) {
            cj["params"] = c.params;
        }
        comps.push_back(cj);
    }
    j["components"] = comps;

    json queues = json::array();
    for (const auto& q : s.queues) {
        json qj = {{"name", q.name},
                   {"capacity", q.capacity},
                   {"entry", entry_name(q.entry)},
                   {"producer", endpoints_json(q.producers)},
                   {"consumer", endpoints_json(q.consumers)}};
        if (!q.region.empty()) {
            qj["region"] = q.region;
        }
        if (!q.subregion.empty()) {
            qj["subregion"] = q.subregion;
        }
        if (q.prefill) {
            qj["prefill"] = true;
        }
        queues.push_back(qj);
    }
    j["queues"] = queues;

    json channels = json::array();
    for (const auto& ch : s.channels) {
        channels.push_back({ch.a, ch.b});
    }
    j["channels"] = channels;

    if (!s.mac_table.empty()) {
        json macs = json::array();
        for (const auto& m : s.mac_table) {
            macs.push_back({{"owner", m.owner}, {"mac", format_mac(m.mac)}, {"ip", format_ip(m.ip)}});
        }
        j["mac_table"] = macs;
    }

    if (s.nic) {
        const auto& n = *s.nic;
        j["nic"] = {{"driver", n.driver},
                    {"rx_region", n.rx_region},
                    {"tx_region", n.tx_region},
                    {"line_rate_mbps", n.line_rate_mbps},
                    {"frame_overhead_bytes", n.frame_overhead_bytes},
                    {"hw_rx_ring", n.hw_rx_ring},
                    {"hw_tx_ring", n.hw_tx_ring}};
    }
    if (s.disk) {
        const auto& d = *s.disk;
        j["disk"] = {{"driver", d.driver},
                     {"data_region", d.data_region},
                     {"capacity_blocks", d.capacity_blocks},
                     {"block_size", d.block_size},
                     {"reorder_window", d.reorder_window},
                     {"fixed_service_us", d.fixed_service.as_us()},
                     {"per_block_service_ns", d.per_block_service.as_ns()},
                     {"error_rate", d.error_rate},
                     {"enforce_barriers", d.enforce_barriers}};
    }

    const auto& w = s.workload;
    json wj = {{"duration_s", w.duration_s},
               {"warmup_s", w.warmup_s},
               {"drain_s", w.drain_s},
               {"sample_ms", w.sample_ms},
               {"audit", w.audit},
               {"frame_bytes", w.frame_bytes},
               {"generator_mac", format_mac(w.generator_mac)},
               {"generator_ip", format_ip(w.generator_ip)},
               {"arrival", w.arrival == ArrivalMode::constant ? "constant" : "jitter"},
               {"jitter_fraction", w.jitter_fraction}};
    json flows = json::array();
    for (const auto& f : w.flows) {
        json fj = {{"dst", f.dst}, {"rate_mbps", f.rate_mbps}};
        if (f.ramp_to_mbps) {
            fj["ramp_to_mbps"] = *f.ramp_to_mbps;
            fj["ramp_start_s"] = f.ramp_start_s;
            fj["ramp_end_s"] = f.ramp_end_s;
        }
        if (f.start_s != 0.0) {
            fj["start_s"] = f.start_s;
        }
        if (f.stop_s) {
            fj["stop_s"] = *f.stop_s;
        }
        flows.push_back(fj);
    }
    wj["flows"] = flows;
    j["workload"] = wj;
    return j;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario file '" + path + "'");
    }
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return scenario_from_json(j);
}

void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write scenario file '" + path + "'");
    }
    out << scenario_to_json(s).dump(2) << "\n";
}

} // namespace modio
