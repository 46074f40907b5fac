#include "modio/runtime.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "factory.hpp"

namespace modio {

namespace {

constexpr std::uint64_t kLivelockEvents = 10'000'000;

} // namespace

// ---------------------------------------------------------------- Component

std::uint64_t Component::counter(const std::string& key) const {
    auto it = counters_.find(key);
    return it == counters_.end() ? 0 : it->second;
}

// ------------------------------------------------------------------ Context

const CostModel& Context::costs() const { return rt_.costs(); }

void Context::charge(std::int64_t cycles) {
    if (cycles > 0) {
        local_ += rt_.costs().to_time(cycles);
    }
}

void Context::charge_time(Time t) {
    if (t > Time{}) {
        local_ += t;
    }
}

void Context::charge_invocation() {
    charge(rt_.costs().handler(rt_.components_[component_].spec.cls).invocation_cycles);
}

void Context::charge_items(std::uint64_t items) {
    const auto per = rt_.costs().handler(rt_.components_[component_].spec.cls).per_item_cycles;
    charge(per * static_cast<std::int64_t>(items));
}

void Context::charge_copy(std::uint64_t bytes) { charge_time(rt_.costs().copy_time(bytes)); }

void Context::charge_polls(std::uint64_t polls) {
    charge(rt_.costs().queue_poll_cycles * static_cast<std::int64_t>(polls));
}

void Context::notify(ChannelId channel) {
    charge(rt_.costs().notify_cost());
    rt_.signal(component_, channel, local_);
}

void Context::set_timeout(Time delay) {
    auto& rec = rt_.components_[component_];
    const Time deadline = local_ + delay;
    if (rec.timer_deadline && *rec.timer_deadline <= deadline) {
        return;
    }
    rec.timer_deadline = deadline;
    rt_.push_event(deadline, Runtime::EventKind::timer, component_, kTimerChannel);
}

void Context::record_batch(std::uint64_t items) {
    auto& stats = rt_.components_[component_].stats;
    ++stats.batch_invocations;
    stats.batch_items += items;
    ++stats.batch_histogram[items];
}

// ------------------------------------------------------------------- Census

void Census::hold(const std::string& region, std::uint64_t global_offset,
                  const std::string& holder) {
    holders_[region][global_offset].push_back(holder);
}

void Census::reference(const std::string& region, std::uint64_t global_offset) {
    ++references_[region][global_offset];
}

// ------------------------------------------------------------------- Binder

bool Binder::has_endpoint(const std::string& endpoint) const {
    const auto& rec = rt_.components_[component_];
    return rec.producer_endpoints.count(endpoint) != 0 ||
           rec.consumer_endpoints.count(endpoint) != 0;
}

std::size_t Binder::indexed_count(const std::string& base) const {
    std::size_t n = 0;
    while (has_endpoint(base + "[" + std::to_string(n) + "]")) {
        ++n;
    }
    return n;
}

RegionView Binder::view(const std::string& as) {
    auto& rec = rt_.components_[component_];
    auto it = rec.views.find(as);
    if (it == rec.views.end()) {
        throw WiringError("component '" + rec.spec.name + "' has no mapping '" + as + "'");
    }
    return it->second;
}

bool Binder::has_view(const std::string& as) const {
    return rt_.components_[component_].views.count(as) != 0;
}

RegionWindow Binder::subregion(const std::string& region, const std::string& owner) const {
    return rt_.subregion(region, owner);
}

const DataRegion& Binder::region(const std::string& name) const { return rt_.region(name); }

NicModel& Binder::nic() {
    if (rt_.nic_ == nullptr) {
        throw WiringError("component '" + spec().name + "' needs a NIC but the scenario has none");
    }
    return *rt_.nic_;
}

DiskModel& Binder::disk() {
    if (rt_.disk_ == nullptr) {
        throw WiringError("component '" + spec().name + "' needs a disk but the scenario has none");
    }
    return *rt_.disk_;
}

const Scenario& Binder::scenario() const { return rt_.scenario_; }

const ComponentSpec& Binder::spec() const { return rt_.components_[component_].spec; }

ChannelId Binder::channel_to(const std::string& peer) const {
    const auto& rec = rt_.components_[component_];
    const auto peer_index = rt_.component_index(peer);
    for (ChannelId id = 0; id < rec.channels.size(); ++id) {
        if (rec.channels[id].peer == peer_index) {
            return id;
        }
    }
    throw WiringError("no channel between '" + rec.spec.name + "' and '" + peer + "'");
}

// ------------------------------------------------------------------ Runtime

Runtime::Runtime(Scenario scenario) : scenario_(std::move(scenario)) {}

Runtime::~Runtime() = default;

std::unique_ptr<Runtime> Runtime::build(const Scenario& scenario) {
    validate(scenario);
    std::unique_ptr<Runtime> rt(new Runtime(scenario));
    rt->construct();
    return rt;
}

void Runtime::construct() {
    const auto& s = scenario_;
    cores_.resize(static_cast<std::size_t>(s.cores));

    for (const auto& r : s.regions) {
        regions_.emplace(r.name, std::make_unique<DataRegion>(r.name, r.slot_size, r.slot_count));
    }

    for (const auto& cs : s.components) {
        ComponentRecord rec;
        rec.spec = cs;
        rec.core = cs.core;
        rec.priority = cs.priority;
        rec.stats.cls = cs.cls;
        rec.stats.core = cs.core;
        component_index_.emplace(cs.name, components_.size());
        components_.push_back(std::move(rec));
    }

    for (const auto& ch : s.channels) {
        auto a = component_index(ch.a);
        auto b = component_index(ch.b);
        auto& ra = components_[a];
        auto& rb = components_[b];
        const auto ida = static_cast<ChannelId>(ra.channels.size());
        const auto idb = static_cast<ChannelId>(rb.channels.size());
        if (ida >= kIrqChannel || idb >= kIrqChannel) {
            throw WiringError("too many channels on '" + (ida >= kIrqChannel ? ch.a : ch.b) + "'");
        }
        ra.channels.push_back({b, idb});
        rb.channels.push_back({a, ida});
    }

    for (const auto& qs : s.queues) {
        QueueRecord rec{qs, SpscQueue<BufferDescriptor>(qs.capacity), 0, 0, 0};
        switch (qs.entry) {
        case EntryKind::descriptor: break;
        case EntryKind::block_request: rec.q = SpscQueue<BlockRequest>(qs.capacity); break;
        case EntryKind::block_response: rec.q = SpscQueue<BlockResponse>(qs.capacity); break;
        }
        rec.producer = component_index(qs.producers.front().component);
        rec.consumer = component_index(qs.consumers.front().component);
        const auto qi = queues_.size();
        components_[rec.producer].producer_endpoints[qs.producers.front().endpoint] = qi;
        components_[rec.consumer].consumer_endpoints[qs.consumers.front().endpoint] = qi;

        RegionWindow window;
        if (!qs.region.empty()) {
            window = qs.subregion.empty() ? region(qs.region).window()
                                          : subregion(qs.region, qs.subregion);
            rec.window_base = window.base;
        }
        if (qs.prefill) {
            auto& q = std::get<SpscQueue<BufferDescriptor>>(rec.q);
            for (std::uint64_t i = 0; i < window.slot_count(); ++i) {
                if (!q.enqueue(BufferDescriptor{i * window.slot_size, 0, 0})) {
                    throw WiringError("queue '" + qs.name + "' is too small to hold its " +
                                      std::to_string(window.slot_count()) + " free buffers");
                }
            }
        }
        queues_.push_back(std::move(rec));
    }

    for (auto& rec : components_) {
        for (const auto& m : rec.spec.maps) {
            auto& r = region(m.region);
            const auto window = m.subregion.empty() ? r.window() : subregion(m.region, m.subregion);
            rec.views[m.as] = RegionView(&r, window, m.access);
        }
    }

    install_devices(*this, scenario_);

    for (std::size_t i = 0; i < components_.size(); ++i) {
        components_[i].impl = make_component(components_[i].spec);
        Binder binder(*this, i);
        components_[i].impl->attach(binder);
    }

    // Boot: init handlers run in declaration order at time zero and are not
    // charged to any core.
    for (std::size_t i = 0; i < components_.size(); ++i) {
        Context ctx(*this, i, now_);
        components_[i].impl->init(ctx);
    }
}

Component& Runtime::component(const std::string& name) {
    return *components_[component_index(name)].impl;
}

std::size_t Runtime::component_index(const std::string& name) const {
    auto it = component_index_.find(name);
    if (it == component_index_.end()) {
        throw WiringError("unknown component '" + name + "'");
    }
    return it->second;
}

int Runtime::core_of(const std::string& name) const {
    return components_[component_index(name)].core;
}

DataRegion& Runtime::region(const std::string& name) {
    auto it = regions_.find(name);
    if (it == regions_.end()) {
        throw WiringError("unknown region '" + name + "'");
    }
    return *it->second;
}

const DataRegion& Runtime::region(const std::string& name) const {
    auto it = regions_.find(name);
    if (it == regions_.end()) {
        throw WiringError("unknown region '" + name + "'");
    }
    return *it->second;
}

bool Runtime::has_region(const std::string& name) const { return regions_.count(name) != 0; }

RegionWindow Runtime::subregion(const std::string& region_name, const std::string& owner) const {
    const auto* spec = scenario_.find_region(region_name);
    if (spec == nullptr) {
        throw WiringError("unknown region '" + region_name + "'");
    }
    for (const auto& sub : spec->subregions) {
        if (sub.owner == owner) {
            return region(region_name).sub_window(sub.first_slot, sub.slot_count);
        }
    }
    throw WiringError("region '" + region_name + "' has no sub-region owned by '" + owner + "'");
}

void Runtime::add_device(std::unique_ptr<Device> d) { devices_.push_back(std::move(d)); }

void Runtime::push_event(Time t, EventKind kind, std::size_t target, ChannelId channel) {
    heap_.push(Event{t, seq_++, kind, target, channel});
}

void Runtime::at(Time t, std::function<void()> fn) {
    callbacks_.push_back(std::move(fn));
    push_event(t, EventKind::callback, callbacks_.size() - 1);
}

void Runtime::every(Time first, Time period, std::function<void(Time)> fn) {
    auto shared = std::make_shared<std::function<void(Time)>>(std::move(fn));
    auto tick = std::make_shared<std::function<void(Time)>>();
    *tick = [this, shared, period, tick](Time t) {
        (*shared)(t);
        const Time next = t + period;
        at(next, [tick, next] { (*tick)(next); });
    };
    at(first, [tick, first] { (*tick)(first); });
}

void Runtime::raise_irq(std::size_t component, Time t) {
    auto& rec = components_[component];
    const std::uint64_t bit = 1ull << kIrqChannel;
    if (((rec.pending | rec.scheduled) & bit) != 0) {
        ++rec.stats.notifications_coalesced;
        return;
    }
    rec.scheduled |= bit;
    push_event(t, EventKind::deliver, component, kIrqChannel);
}

void Runtime::signal(std::size_t from, ChannelId channel, Time at) {
    auto& src = components_[from];
    if (channel >= src.channels.size()) {
        throw WiringError("component '" + src.spec.name + "' signalled unknown channel " +
                          std::to_string(channel));
    }
    ++src.stats.signals_sent;
    const auto end = src.channels[channel];
    auto& dst = components_[end.peer];
    const std::uint64_t bit = 1ull << end.peer_channel;
    if (((dst.pending | dst.scheduled) & bit) != 0) {
        ++dst.stats.notifications_coalesced;
        return;
    }
    dst.scheduled |= bit;
    const Time latency =
        src.core != dst.core ? costs().to_time(costs().cross_core_signal_cycles) : Time{};
    push_event(at + latency, EventKind::deliver, end.peer, end.peer_channel);
}

void Runtime::make_ready(std::size_t component) {
    auto& rec = components_[component];
    if (rec.ready) {
        return;
    }
    rec.ready = true;
    rec.ready_seq = ready_seq_++;
    cores_[static_cast<std::size_t>(rec.core)].ready.push_back(component);
}

void Runtime::schedule_maintenance(std::size_t component, std::function<void(Context&)> fn) {
    components_[component].maintenance.push_back(std::move(fn));
    make_ready(component);
}

void Runtime::process(const Event& e) {
    switch (e.kind) {
    case EventKind::deliver: {
        auto& rec = components_[e.target];
        const std::uint64_t bit = 1ull << e.channel;
        rec.scheduled &= ~bit;
        rec.pending |= bit;
        make_ready(e.target);
        break;
    }
    case EventKind::timer: {
        auto& rec = components_[e.target];
        if (rec.timer_deadline && *rec.timer_deadline == e.t) {
            rec.timer_deadline.reset();
            rec.pending |= 1ull << kTimerChannel;
            make_ready(e.target);
        }
        break;
    }
    case EventKind::core_free:
        break;
    case EventKind::callback: {
        // Callbacks may schedule further callbacks, which can reallocate
        // the vector; move the function out first.
        auto fn = std::move(callbacks_[e.target]);
        callbacks_[e.target] = nullptr;
        if (fn) {
            fn();
        }
        break;
    }
    }
}

void Runtime::dispatch() {
    for (std::size_t core = 0; core < cores_.size(); ++core) {
        auto& cs = cores_[core];
        if (cs.busy_until > now_ || cs.ready.empty()) {
            continue;
        }
        auto best = cs.ready.begin();
        for (auto it = cs.ready.begin(); it != cs.ready.end(); ++it) {
            const auto& a = components_[*it];
            const auto& b = components_[*best];
            if (a.priority > b.priority || (a.priority == b.priority && a.ready_seq < b.ready_seq)) {
                best = it;
            }
        }
        const auto c = *best;
        cs.ready.erase(best);
        components_[c].ready = false;
        activate(static_cast<int>(core), c);
    }
}

void Runtime::activate(int core, std::size_t component) {
    auto& rec = components_[component];
    Context ctx(*this, component, now_);
    if (!rec.maintenance.empty()) {
        auto fn = std::move(rec.maintenance.front());
        rec.maintenance.erase(rec.maintenance.begin());
        fn(ctx);
    } else {
        const std::uint64_t mask = rec.pending;
        rec.pending = 0;
        ctx.charge(costs().switch_cost());
        ++rec.stats.activations;
        for (std::uint64_t bits = mask; bits != 0; bits &= bits - 1) {
            const auto ch = static_cast<ChannelId>(std::countr_zero(bits));
            ++rec.stats.notified_calls;
            rec.impl->notified(ctx, ch);
        }
    }
    account(core, component, now_, ctx.local_);
    auto& cs = cores_[static_cast<std::size_t>(core)];
    cs.busy_until = ctx.local_;
    push_event(ctx.local_, EventKind::core_free, static_cast<std::size_t>(core));
    if (rec.pending != 0 || !rec.maintenance.empty()) {
        make_ready(component);
    }
}

void Runtime::account(int core, std::size_t component, Time start, Time end) {
    auto& cs = cores_[static_cast<std::size_t>(core)];
    auto& rec = components_[component];
    const Time d = end - start;
    cs.busy_total += d;
    cs.cur_start = start;
    cs.cur_end = end;
    cs.cur_component = component;
    ++cs.activations;
    cs.component_busy[rec.spec.name] += d;
    rec.stats.busy += d;
}

Time Runtime::busy_at(int core, Time t) const {
    const auto& cs = cores_[static_cast<std::size_t>(core)];
    Time busy = cs.busy_total;
    if (t < cs.cur_end) {
        busy -= cs.cur_end - std::max(t, cs.cur_start);
    }
    return busy;
}

std::optional<Time> Runtime::next_time() const {
    std::optional<Time> t;
    if (!heap_.empty()) {
        t = heap_.top().t;
    }
    for (const auto& d : devices_) {
        auto n = d->next_event();
        if (n && (!t || *n < *t)) {
            t = n;
        }
    }
    return t;
}

SimulationReport Runtime::run_until(Time t_end) {
    std::uint64_t stalled = 0;
    while (auto t = next_time()) {
        if (*t > t_end) {
            break;
        }
        if (*t <= now_) {
            if (++stalled > kLivelockEvents) {
                throw SimulationError("livelock: more than 10^7 events without virtual-time "
                                      "progress at t=" + std::to_string(now_.as_us()) + "us");
            }
        } else {
            stalled = 0;
        }
        now_ = std::max(now_, *t);
        for (auto& d : devices_) {
            auto n = d->next_event();
            if (n && *n <= now_) {
                d->advance(now_, true);
            }
        }
        while (!heap_.empty() && heap_.top().t <= now_) {
            const Event e = heap_.top();
            heap_.pop();
            ++events_;
            process(e);
        }
        dispatch();
    }
    now_ = std::max(now_, t_end);
    return report();
}

SimulationReport Runtime::report() const {
    SimulationReport r;
    r.end = now_;
    r.events = events_;
    for (std::size_t c = 0; c < cores_.size(); ++c) {
        const auto& cs = cores_[c];
        CoreAccount acc;
        acc.total = now_;
        acc.busy = busy_at(static_cast<int>(c), now_);
        acc.component_busy = cs.component_busy;
        if (now_ < cs.cur_end) {
            // trim the activation still running at the cut from its owner
            const Time overhang = cs.cur_end - std::max(now_, cs.cur_start);
            acc.component_busy[components_[cs.cur_component].spec.name] -= overhang;
        }
        acc.activations = cs.activations;
        acc.busy_cycles = costs().to_cycles(acc.busy);
        acc.total_cycles = costs().to_cycles(acc.total);
        r.cores.push_back(std::move(acc));
    }
    for (const auto& rec : components_) {
        auto stats = rec.stats;
        stats.core = rec.core;
        r.components.emplace(rec.spec.name, std::move(stats));
        for (const auto& [k, v] : rec.impl->counters()) {
            r.counters[rec.spec.name + "." + k] = v;
        }
    }
    for (const auto& d : devices_) {
        d->add_counters(r.counters);
    }
    return r;
}

void Runtime::migrate(const std::string& name, int new_core) {
    if (new_core < 0 || new_core >= cores()) {
        throw ConfigError("migrate '" + name + "': invalid core " + std::to_string(new_core));
    }
    const auto c = component_index(name);
    auto& rec = components_[c];
    if (rec.core == new_core) {
        return;
    }
    auto& old_ready = cores_[static_cast<std::size_t>(rec.core)].ready;
    const bool was_ready = rec.ready;
    if (was_ready) {
        old_ready.erase(std::find(old_ready.begin(), old_ready.end(), c));
        rec.ready = false;
    }
    rec.core = new_core;
    if (was_ready) {
        make_ready(c);
    }
}

void Runtime::restart(const std::string& name) {
    const auto c = component_index(name);
    schedule_maintenance(c, [this, c](Context& ctx) {
        auto& impl = *components_[c].impl;
        impl.reset_private();
        ctx.charge(costs().switch_cost());
        impl.init(ctx);
    });
}

SpscQueue<BufferDescriptor>& Runtime::descriptor_queue(const std::string& name) {
    for (auto& q : queues_) {
        if (q.spec.name == name) {
            if (auto* p = std::get_if<SpscQueue<BufferDescriptor>>(&q.q)) {
                return *p;
            }
            throw WiringError("queue '" + name + "' does not carry buffer descriptors");
        }
    }
    throw WiringError("unknown queue '" + name + "'");
}

AuditResult Runtime::audit_buffers() const {
    Census census;
    std::map<std::string, bool> audited;
    for (const auto& qr : queues_) {
        const auto* q = std::get_if<SpscQueue<BufferDescriptor>>(&qr.q);
        if (q == nullptr || qr.spec.region.empty()) {
            continue;
        }
        audited[qr.spec.region] = true;
        for (std::uint32_t i = 0; i < q->size(); ++i) {
            const auto& d = q->at(i);
            const auto global = qr.window_base + d.offset;
            if (d.broadcast()) {
                census.reference(qr.spec.region, global);
            } else {
                census.hold(qr.spec.region, global, "queue:" + qr.spec.name);
            }
        }
    }
    for (const auto& rec : components_) {
        rec.impl->census(census);
    }
    for (const auto& d : devices_) {
        d->census(census);
    }

    AuditResult result;
    auto problem = [&](std::string p) {
        result.ok = false;
        if (result.problems.size() < 32) {
            result.problems.push_back(std::move(p));
        }
    };
    for (const auto& [name, _] : audited) {
        const auto& r = region(name);
        const auto it = census.holders().find(name);
        for (std::uint64_t slot = 0; slot < r.slot_count(); ++slot) {
            const auto off = slot * r.slot_size();
            const std::vector<std::string>* holders = nullptr;
            if (it != census.holders().end()) {
                auto h = it->second.find(off);
                if (h != it->second.end()) {
                    holders = &h->second;
                }
            }
            if (holders == nullptr || holders->empty()) {
                problem(name + "@" + std::to_string(off) + ": leaked (no holder)");
            } else if (holders->size() > 1) {
                std::string who;
                for (const auto& h : *holders) {
                    who += " " + h;
                }
                problem(name + "@" + std::to_string(off) + ": held " +
                        std::to_string(holders->size()) + " times:" + who);
            }
        }
    }
    // Broadcast references must be backed by an entry whose count matches.
    for (const auto& [name, refs] : census.references()) {
        const auto it = census.holders().find(name);
        for (const auto& [off, n] : refs) {
            bool backed = false;
            if (it != census.holders().end()) {
                auto h = it->second.find(off);
                if (h != it->second.end()) {
                    for (const auto& holder : h->second) {
                        const std::string prefix = "broadcast:";
                        if (holder.rfind(prefix, 0) == 0) {
                            backed = std::stoul(holder.substr(prefix.size())) == n;
                        }
                    }
                }
            }
            if (!backed) {
                problem(name + "@" + std::to_string(off) + ": " + std::to_string(n) +
                        " broadcast references without a matching refcount");
            }
        }
    }
    return result;
}

std::string Runtime::describe() const {
    std::ostringstream os;
    os << "cores " << cores_.size() << "\n";
    for (const auto& rec : components_) {
        os << "component " << rec.spec.name << " class=" << rec.spec.cls << " core=" << rec.core
           << " priority=" << rec.priority << "\n";
        for (std::size_t ch = 0; ch < rec.channels.size(); ++ch) {
            os << "  channel " << ch << " -> " << components_[rec.channels[ch].peer].spec.name
               << ":" << rec.channels[ch].peer_channel << "\n";
        }
    }
    for (const auto& q : queues_) {
        os << "queue " << q.spec.name << " capacity=" << q.spec.capacity
           << " producer=" << q.spec.producers.front().str()
           << " consumer=" << q.spec.consumers.front().str() << " region=" << q.spec.region
           << " base=" << q.window_base << "\n";
    }
    for (const auto& [name, r] : regions_) {
        os << "region " << name << " slots=" << r->slot_count() << "x" << r->slot_size() << "\n";
    }
    return os.str();
}

} // namespace modio
