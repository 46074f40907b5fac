#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "modio/block.hpp"
#include "modio/queue.hpp"
#include "modio/region.hpp"
#include "modio/scenario.hpp"
#include "modio/time.hpp"

namespace modio {

class Runtime;
class Context;
class Component;
class Census;
class NicModel;
class LoadGenerator;
class DiskModel;

using ChannelId = std::uint32_t;
inline constexpr ChannelId kIrqChannel = 62;
inline constexpr ChannelId kTimerChannel = 63;

/// Raised by the event loop when it cannot make progress (livelock guard).
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Producer end of a queue as seen by one component: enqueue plus the
/// notification protocol.
template <typename Entry>
class ProducerEnd {
public:
    ProducerEnd() = default;
    ProducerEnd(SpscQueue<Entry>* q, ChannelId ch) : q_(q), ch_(ch) {}

    bool bound() const { return q_ != nullptr; }
    bool full() const { return q_->full(); }
    std::uint32_t size() const { return q_->size(); }
    SpscQueue<Entry>& queue() const { return *q_; }

    /// Enqueue and notify the consumer if the empty -> non-empty transition
    /// was requested. Returns false if the queue is full.
    bool push(Context& ctx, const Entry& e);

    /// Ask for a wake-up when the queue drains, then re-check. Returns true
    /// if the queue is still full (caller should stop producing).
    bool request_signal_if_full() {
        q_->set_signal_request(Side::producer, true);
        if (q_->full()) {
            return true;
        }
        q_->set_signal_request(Side::producer, false);
        return false;
    }

private:
    SpscQueue<Entry>* q_ = nullptr;
    ChannelId ch_ = 0;
};

template <typename Entry>
class ConsumerEnd {
public:
    ConsumerEnd() = default;
    ConsumerEnd(SpscQueue<Entry>* q, ChannelId ch) : q_(q), ch_(ch) {}

    bool bound() const { return q_ != nullptr; }
    bool empty() const { return q_->empty(); }
    std::uint32_t size() const { return q_->size(); }
    const Entry* peek() const { return q_->peek(); }
    SpscQueue<Entry>& queue() const { return *q_; }

    /// Dequeue and notify the producer if the full -> non-full transition
    /// was requested.
    std::optional<Entry> pop(Context& ctx);

    /// Ask for a wake-up on the next enqueue, then re-check. Returns true if
    /// the queue is still empty (caller may go to sleep).
    bool request_signal_if_empty() {
        q_->set_signal_request(Side::consumer, true);
        if (q_->empty()) {
            return true;
        }
        q_->set_signal_request(Side::consumer, false);
        return false;
    }

private:
    SpscQueue<Entry>* q_ = nullptr;
    ChannelId ch_ = 0;
};

using ComponentFactory = std::function<std::unique_ptr<Component>(const ComponentSpec&)>;
/// Make `cls` available to scenarios. Replaces an existing class of that name.
void register_component_class(const std::string& cls, ComponentFactory make);

/// Gives a component access to the endpoints, mappings and devices the
/// scenario wired to it. Only valid during Component::attach.
class Binder {
public:
    Binder(Runtime& rt, std::size_t component) : rt_(rt), component_(component) {}

    template <typename Entry>
    ProducerEnd<Entry> producer(const std::string& endpoint);
    template <typename Entry>
    ConsumerEnd<Entry> consumer(const std::string& endpoint);

    bool has_endpoint(const std::string& endpoint) const;
    /// Number of endpoints named `base[0]`, `base[1]`, ... bound to this component.
    std::size_t indexed_count(const std::string& base) const;

    RegionView view(const std::string& as);
    bool has_view(const std::string& as) const;
    /// Window of the sub-region owned by `owner` in `region`.
    RegionWindow subregion(const std::string& region, const std::string& owner) const;
    const DataRegion& region(const std::string& name) const;

    NicModel& nic();
    DiskModel& disk();
    const Scenario& scenario() const;
    const ComponentSpec& spec() const;
    /// Local channel id of the channel to `peer`.
    ChannelId channel_to(const std::string& peer) const;

private:
    template <typename Entry>
    std::pair<SpscQueue<Entry>*, ChannelId> lookup(const std::string& endpoint, bool producer);

    Runtime& rt_;
    std::size_t component_;
};

/// A single-threaded, run-to-completion event handler.
class Component {
public:
    Component(std::string name, std::string cls) : name_(std::move(name)), cls_(std::move(cls)) {}
    virtual ~Component() = default;
    Component(const Component&) = delete;
    Component& operator=(const Component&) = delete;

    /// Resolve queues, mappings and devices. Runs once at build.
    virtual void attach(Binder& binder) = 0;
    virtual void init(Context&) {}
    virtual void notified(Context& ctx, ChannelId channel) = 0;
    /// Drop component-private state ahead of a restart. Shared queues and
    /// metadata-region state survive.
    virtual void reset_private() {}
    /// Report data-region slots this component currently holds.
    virtual void census(Census&) const {}

    const std::string& name() const { return name_; }
    const std::string& cls() const { return cls_; }

    std::uint64_t counter(const std::string& key) const;
    const std::map<std::string, std::uint64_t>& counters() const { return counters_; }

protected:
    void bump(const std::string& key, std::uint64_t by = 1) { counters_[key] += by; }

private:
    std::string name_;
    std::string cls_;
    std::map<std::string, std::uint64_t> counters_;
};

/// Handle passed to a running handler. Tracks the invocation's local clock.
class Context {
public:
    Time now() const { return local_; }
    const CostModel& costs() const;
    Runtime& runtime() { return rt_; }

    void charge(std::int64_t cycles);
    void charge_time(Time t);
    /// Fixed per-invocation cost of this component's class.
    void charge_invocation();
    /// Per-item cost of this component's class, times `items`.
    void charge_items(std::uint64_t items);
    void charge_copy(std::uint64_t bytes);
    void charge_polls(std::uint64_t polls);

    /// Signal the peer on a local channel; charges a notify system call.
    void notify(ChannelId channel);
    /// Deliver a notification on kTimerChannel after `delay`.
    void set_timeout(Time delay);
    /// Record how many items this invocation processed (batching histogram).
    void record_batch(std::uint64_t items);

    std::size_t component_index() const { return component_; }

private:
    friend class Runtime;
    Context(Runtime& rt, std::size_t component, Time start)
        : rt_(rt), component_(component), local_(start) {}

    Runtime& rt_;
    std::size_t component_;
    Time local_;
};

/// Records which holder references each data-region slot.
class Census {
public:
    void hold(const std::string& region, std::uint64_t global_offset, const std::string& holder);
    /// A broadcast reference: counted against its owning entry, not as a
    /// holder. The owner reports itself with holder name "broadcast:<refcount>".
    void reference(const std::string& region, std::uint64_t global_offset);

    const std::map<std::string, std::map<std::uint64_t, std::vector<std::string>>>& holders() const {
        return holders_;
    }
    const std::map<std::string, std::map<std::uint64_t, std::uint32_t>>& references() const {
        return references_;
    }

private:
    std::map<std::string, std::map<std::uint64_t, std::vector<std::string>>> holders_;
    std::map<std::string, std::map<std::uint64_t, std::uint32_t>> references_;
};

struct AuditResult {
    bool ok = true;
    std::vector<std::string> problems;
};

struct ComponentStats {
    std::string cls;
    int core = 0;
    Time busy;
    std::uint64_t activations = 0;
    std::uint64_t notified_calls = 0;
    std::uint64_t notifications_coalesced = 0;
    std::uint64_t signals_sent = 0;
    std::uint64_t batch_invocations = 0;
    std::uint64_t batch_items = 0;
    std::map<std::uint64_t, std::uint64_t> batch_histogram;

    double avg_batch() const {
        return batch_invocations == 0 ? 0.0
                                      : static_cast<double>(batch_items) /
                                            static_cast<double>(batch_invocations);
    }
};

struct CoreAccount {
    Time busy;
    Time total;
    std::int64_t busy_cycles = 0;
    std::int64_t total_cycles = 0;
    std::map<std::string, Time> component_busy;
    std::uint64_t activations = 0;

    double utilisation() const {
        return total.as_ps() == 0 ? 0.0
                                  : static_cast<double>(busy.as_ps()) /
                                        static_cast<double>(total.as_ps());
    }
};

struct SimulationReport {
    Time end;
    std::vector<CoreAccount> cores;
    std::map<std::string, ComponentStats> components;
    /// "component.counter" and "device.counter" values.
    std::map<std::string, std::uint64_t> counters;
    std::uint64_t events = 0;

    std::uint64_t counter(const std::string& key) const {
        auto it = counters.find(key);
        return it == counters.end() ? 0 : it->second;
    }
};

/// Something with its own timeline that the event loop advances: NIC, disk.
class Device {
public:
    virtual ~Device() = default;
    virtual std::optional<Time> next_event() const = 0;
    /// Process device events with time <= t. IRQs are raised only when the
    /// event loop drives the device; a driver polling from inside its handler
    /// has the interrupt masked.
    virtual void advance(Time t, bool raise_irq) = 0;
    virtual void census(Census&) const {}
    virtual void add_counters(std::map<std::string, std::uint64_t>&) const {}
};

/// Deterministic discrete-event runtime: components placed on cores,
/// channels with coalescing notifications, and per-core cycle accounting.
class Runtime {
public:
    /// Validate the scenario, allocate regions and queues, construct and
    /// attach components, then run every init() in declaration order.
    static std::unique_ptr<Runtime> build(const Scenario& scenario);

    ~Runtime();
    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    /// Process events up to `t_end` and return cumulative accounts.
    SimulationReport run_until(Time t_end);
    SimulationReport report() const;

    Time now() const { return now_; }
    const Scenario& scenario() const { return scenario_; }
    const CostModel& costs() const { return scenario_.costs; }

    std::size_t component_count() const { return components_.size(); }
    Component& component(std::size_t index) { return *components_[index].impl; }
    Component& component(const std::string& name);
    std::size_t component_index(const std::string& name) const;
    int core_of(const std::string& name) const;
    int cores() const { return static_cast<int>(cores_.size()); }

    /// Move a component to another core. Takes effect for its next
    /// activation; queued and in-flight notifications are preserved.
    void migrate(const std::string& name, int new_core);
    /// Reset a component's private state and re-run its init() at the next
    /// handler boundary on its core.
    void restart(const std::string& name);
    /// Run `fn` in the component's context at its next handler boundary,
    /// occupying its core like an activation.
    void schedule_maintenance(std::size_t component, std::function<void(Context&)> fn);

    void at(Time t, std::function<void()> fn);
    void every(Time first, Time period, std::function<void(Time)> fn);

    /// Raise a device interrupt on a driver's kIrqChannel at time `t`.
    void raise_irq(std::size_t component, Time t);

    /// Busy time of `core` in [0, t] for t <= now().
    Time busy_at(int core, Time t) const;

    DataRegion& region(const std::string& name);
    const DataRegion& region(const std::string& name) const;
    bool has_region(const std::string& name) const;
    RegionWindow subregion(const std::string& region, const std::string& owner) const;

    NicModel* nic() { return nic_; }
    LoadGenerator* generator() { return generator_; }
    DiskModel* disk() { return disk_; }
    void add_device(std::unique_ptr<Device> d);
    void set_nic(NicModel* n) { nic_ = n; }
    void set_generator(LoadGenerator* g) { generator_ = g; }
    void set_disk(DiskModel* d) { disk_ = d; }

    /// Every data-region slot referenced by exactly one holder.
    AuditResult audit_buffers() const;

    /// Stable text dump of the component graph.
    std::string describe() const;

    /// Queue by name (descriptor queues only). Test and audit access.
    SpscQueue<BufferDescriptor>& descriptor_queue(const std::string& name);

private:
    friend class Binder;
    friend class Context;

    struct QueueRecord {
        QueueSpec spec;
        std::variant<SpscQueue<BufferDescriptor>, SpscQueue<BlockRequest>, SpscQueue<BlockResponse>>
            q;
        std::size_t producer = 0;
        std::size_t consumer = 0;
        std::uint64_t window_base = 0;
    };

    struct ChannelEnd {
        std::size_t peer = 0;
        ChannelId peer_channel = 0;
    };

    struct ComponentRecord {
        std::unique_ptr<Component> impl;
        ComponentSpec spec;
        int core = 0;
        int priority = 0;
        std::uint64_t pending = 0;
        std::uint64_t scheduled = 0;
        bool ready = false;
        std::uint64_t ready_seq = 0;
        std::optional<Time> timer_deadline;
        std::vector<std::function<void(Context&)>> maintenance;
        std::vector<ChannelEnd> channels;
        std::map<std::string, std::size_t> producer_endpoints;
        std::map<std::string, std::size_t> consumer_endpoints;
        std::map<std::string, RegionView> views;
        ComponentStats stats;
    };

    struct CoreState {
        Time busy_until;
        Time busy_total;
        Time cur_start;
        Time cur_end;
        std::size_t cur_component = 0;
        std::uint64_t activations = 0;
        std::vector<std::size_t> ready;
        std::map<std::string, Time> component_busy;
    };

    enum class EventKind { deliver, core_free, timer, callback };

    struct Event {
        Time t;
        std::uint64_t seq = 0;
        EventKind kind = EventKind::callback;
        std::size_t target = 0;
        ChannelId channel = 0;
        bool operator>(const Event& o) const {
            return t != o.t ? t > o.t : seq > o.seq;
        }
    };

    explicit Runtime(Scenario scenario);
    void construct();
    void push_event(Time t, EventKind kind, std::size_t target, ChannelId channel = 0);
    void process(const Event& e);
    void dispatch();
    void activate(int core, std::size_t component);
    void make_ready(std::size_t component);
    void signal(std::size_t from, ChannelId channel, Time at);
    void account(int core, std::size_t component, Time start, Time end);
    std::optional<Time> next_time() const;

    Scenario scenario_;
    Time now_;
    std::uint64_t seq_ = 0;
    std::uint64_t ready_seq_ = 0;
    std::uint64_t events_ = 0;
    std::vector<ComponentRecord> components_;
    std::map<std::string, std::size_t> component_index_;
    std::vector<QueueRecord> queues_;
    std::map<std::string, std::unique_ptr<DataRegion>> regions_;
    std::vector<CoreState> cores_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> heap_;
    std::vector<std::function<void()>> callbacks_;
    std::vector<std::unique_ptr<Device>> devices_;
    NicModel* nic_ = nullptr;
    LoadGenerator* generator_ = nullptr;
    DiskModel* disk_ = nullptr;
};

template <typename Entry>
bool ProducerEnd<Entry>::push(Context& ctx, const Entry& e) {
    if (!q_->enqueue(e)) {
        return false;
    }
    // Occupancy observed after publishing; a size of one means this enqueue
    // made the queue non-empty.
    const bool was_empty = q_->size() == 1;
    if (producer_should_signal(*q_, was_empty)) {
        q_->set_signal_request(Side::consumer, false);
        ctx.notify(ch_);
    }
    return true;
}

template <typename Entry>
std::optional<Entry> ConsumerEnd<Entry>::pop(Context& ctx) {
    auto e = q_->dequeue();
    if (!e) {
        return e;
    }
    const bool was_full = q_->size() == q_->capacity() - 1;
    if (consumer_should_signal(*q_, was_full)) {
        q_->set_signal_request(Side::producer, false);
        ctx.notify(ch_);
    }
    return e;
}

template <typename Entry>
std::pair<SpscQueue<Entry>*, ChannelId> Binder::lookup(const std::string& endpoint, bool producer) {
    auto& rec = rt_.components_[component_];
    auto& table = producer ? rec.producer_endpoints : rec.consumer_endpoints;
    auto it = table.find(endpoint);
    if (it == table.end()) {
        throw WiringError("component '" + rec.spec.name + "' has no " +
                          (producer ? "producer" : "consumer") + " endpoint '" + endpoint + "'");
    }
    auto& qr = rt_.queues_[it->second];
    auto* q = std::get_if<SpscQueue<Entry>>(&qr.q);
    if (q == nullptr) {
        throw WiringError("queue '" + qr.spec.name + "' has the wrong entry type for endpoint '" +
                          rec.spec.name + "." + endpoint + "'");
    }
    const auto peer = producer ? qr.consumer : qr.producer;
    return {q, channel_to(rt_.components_[peer].spec.name)};
}

template <typename Entry>
ProducerEnd<Entry> Binder::producer(const std::string& endpoint) {
    auto [q, ch] = lookup<Entry>(endpoint, true);
    return ProducerEnd<Entry>(q, ch);
}

template <typename Entry>
ConsumerEnd<Entry> Binder::consumer(const std::string& endpoint) {
    auto [q, ch] = lookup<Entry>(endpoint, false);
    return ConsumerEnd<Entry>(q, ch);
}

} // namespace modio
