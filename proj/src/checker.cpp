#include "modio/checker.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace modio::check {

namespace {

// Program text with symbolic jump targets, resolved once assembled.
struct Sym {
    std::string name;
    Op op;
    int queue = 0;
    Side side = Side::consumer;
    std::string next;
    std::string alt;
};

std::string qname(int q) { return "q" + std::to_string(q); }
std::string sname(Side s) { return s == Side::consumer ? "consumer" : "producer"; }

std::string op_label(const Sym& s) {
    switch (s.op) {
    case Op::enqueue: return "enqueue " + qname(s.queue);
    case Op::dequeue: return "dequeue " + qname(s.queue);
    case Op::saw_empty: return "saw_empty " + qname(s.queue);
    case Op::saw_full: return "saw_full " + qname(s.queue);
    case Op::test_empty: return "test_empty " + qname(s.queue);
    case Op::test_full: return "test_full " + qname(s.queue);
    case Op::test_flag: return "test_flag " + qname(s.queue) + "." + sname(s.side);
    case Op::set_flag: return "set_flag " + qname(s.queue) + "." + sname(s.side);
    case Op::clear_flag: return "clear_flag " + qname(s.queue) + "." + sname(s.side);
    case Op::notify: return "notify";
    case Op::sleep: return "wake";
    }
    return "?";
}

// Consumer end of queue q: take one item, then continue at `done`.
void consume(std::vector<Sym>& p, Variant v, int q, const std::string& pre, const std::string& done) {
    const std::string loop = pre + "deq";
    if (v == Variant::pessimistic) {
        p.push_back({loop, Op::dequeue, q, {}, pre + "notify", pre + "sleep"});
        p.push_back({pre + "notify", Op::notify, q, {}, done, done});
        p.push_back({pre + "sleep", Op::sleep, q, {}, loop, loop});
        return;
    }
    p.push_back({loop, Op::dequeue, q, {}, pre + "obs", pre + "empty"});
    p.push_back({pre + "obs", Op::saw_full, q, {}, pre + "flag", done});
    p.push_back({pre + "flag", Op::test_flag, q, Side::producer, pre + "clear", done});
    p.push_back({pre + "clear", Op::clear_flag, q, Side::producer, pre + "notify", pre + "notify"});
    p.push_back({pre + "notify", Op::notify, q, {}, done, done});
    switch (v) {
    case Variant::bug1:
        p.push_back({pre + "empty", Op::test_empty, q, {}, pre + "set", loop});
        p.push_back({pre + "set", Op::set_flag, q, Side::consumer, pre + "sleep", pre + "sleep"});
        break;
    case Variant::bug3:
        p.push_back({pre + "empty", Op::set_flag, q, Side::consumer, pre + "sleep", pre + "sleep"});
        break;
    default:
        p.push_back({pre + "empty", Op::set_flag, q, Side::consumer, pre + "recheck", pre + "recheck"});
        p.push_back({pre + "recheck", Op::test_empty, q, {}, pre + "sleep", pre + "unset"});
        p.push_back({pre + "unset", Op::clear_flag, q, Side::consumer, loop, loop});
        break;
    }
    p.push_back({pre + "sleep", Op::sleep, q, {}, loop, loop});
}

// Producer end of queue q: publish one item, then continue at `done`.
void produce(std::vector<Sym>& p, Variant v, int q, const std::string& pre, const std::string& done) {
    const std::string enq = pre + "enq";
    if (v == Variant::pessimistic) {
        p.push_back({enq, Op::enqueue, q, {}, pre + "notify", pre + "sleep"});
        p.push_back({pre + "notify", Op::notify, q, {}, done, done});
        p.push_back({pre + "sleep", Op::sleep, q, {}, enq, enq});
        return;
    }
    if (v == Variant::bug2) {
        // observes emptiness and the flag before the item is visible
        p.push_back({pre + "pre", Op::test_empty, q, {}, pre + "preflag", pre + "plain"});
        p.push_back({pre + "preflag", Op::test_flag, q, Side::consumer, pre + "enq_n", pre + "plain"});
        p.push_back({pre + "enq_n", Op::enqueue, q, {}, pre + "clear", pre + "full"});
        p.push_back({pre + "plain", Op::enqueue, q, {}, done, pre + "full"});
        p.push_back({pre + "clear", Op::clear_flag, q, Side::consumer, pre + "notify", pre + "notify"});
        p.push_back({pre + "notify", Op::notify, q, {}, done, done});
    } else {
        p.push_back({enq, Op::enqueue, q, {}, pre + "obs", pre + "full"});
        p.push_back({pre + "obs", Op::saw_empty, q, {}, pre + "flag", done});
        p.push_back({pre + "flag", Op::test_flag, q, Side::consumer, pre + "clear", done});
        p.push_back({pre + "clear", Op::clear_flag, q, Side::consumer, pre + "notify", pre + "notify"});
        p.push_back({pre + "notify", Op::notify, q, {}, done, done});
    }
    const std::string retry = v == Variant::bug2 ? pre + "pre" : enq;
    if (v == Variant::bug4) {
        p.push_back({pre + "full", Op::set_flag, q, Side::producer, pre + "sleep", pre + "sleep"});
    } else {
        p.push_back({pre + "full", Op::set_flag, q, Side::producer, pre + "recheck", pre + "recheck"});
        p.push_back({pre + "recheck", Op::test_full, q, {}, pre + "sleep", pre + "unset"});
        p.push_back({pre + "unset", Op::clear_flag, q, Side::producer, retry, retry});
    }
    p.push_back({pre + "sleep", Op::sleep, q, {}, retry, retry});
}

std::vector<Instr> assemble(const std::vector<Sym>& syms) {
    std::map<std::string, int> at;
    for (std::size_t i = 0; i < syms.size(); ++i) {
        at[syms[i].name] = static_cast<int>(i);
    }
    auto resolve = [&](const std::string& n) {
        auto it = at.find(n);
        if (it == at.end()) {
            throw std::logic_error("checker: unresolved label " + n);
        }
        return it->second;
    };
    std::vector<Instr> out;
    for (const auto& s : syms) {
        out.push_back({s.op, s.queue, s.side, resolve(s.next), resolve(s.alt), op_label(s)});
    }
    return out;
}

int find(const std::vector<Sym>& syms, const std::string& name) {
    for (std::size_t i = 0; i < syms.size(); ++i) {
        if (syms[i].name == name) {
            return static_cast<int>(i);
        }
    }
    throw std::logic_error("checker: no label " + name);
}

} // namespace

std::string variant_name(Variant v) {
    switch (v) {
    case Variant::pessimistic: return "pessimistic";
    case Variant::optimised: return "optimised";
    case Variant::bug1: return "bug-1";
    case Variant::bug2: return "bug-2";
    case Variant::bug3: return "bug-3";
    case Variant::bug4: return "bug-4";
    }
    return "?";
}

std::optional<Variant> parse_variant(const std::string& s) {
    for (auto v : all_variants()) {
        if (variant_name(v) == s) {
            return v;
        }
    }
    if (s == "optimized") {
        return Variant::optimised;
    }
    return std::nullopt;
}

std::string topology_name(Topology t) { return t == Topology::single ? "single" : "pair"; }

std::optional<Topology> parse_topology(const std::string& s) {
    if (s == "single") return Topology::single;
    if (s == "pair") return Topology::pair;
    return std::nullopt;
}

std::vector<Variant> all_variants() {
    return {Variant::pessimistic, Variant::optimised, Variant::bug1,
            Variant::bug2, Variant::bug3, Variant::bug4};
}

ProtocolModel ProtocolModel::make(Variant v, Topology t, std::uint32_t capacity) {
    if (capacity == 0 || capacity > 4 || (capacity & (capacity - 1)) != 0) {
        throw ConfigError("checker capacity must be 1, 2 or 4, got " + std::to_string(capacity));
    }
    ProtocolModel m;
    m.variant = v;
    m.topology = t;
    m.capacity = capacity;
    std::vector<Sym> p, c;
    if (t == Topology::single) {
        m.queues = 1;
        // endless source and sink
        produce(p, v, 0, "", v == Variant::bug2 ? "pre" : "enq");
        consume(c, v, 0, "", "deq");
        m.program[0] = assemble(p);
        m.program[1] = assemble(c);
        m.start[0] = 0;
        m.start[1] = find(c, "sleep");
    } else {
        // q0 carries requests P -> C, q1 returns buffers C -> P
        m.queues = 2;
        const std::string p_out = v == Variant::bug2 ? "out.pre" : "out.enq";
        consume(p, v, 1, "in.", p_out);
        produce(p, v, 0, "out.", "in.deq");
        const std::string c_out = v == Variant::bug2 ? "out.pre" : "out.enq";
        consume(c, v, 0, "in.", c_out);
        produce(c, v, 1, "out.", "in.deq");
        m.program[0] = assemble(p);
        m.program[1] = assemble(c);
        m.start[0] = 0;
        m.start[1] = find(c, "in.sleep");
    }
    return m;
}

std::uint64_t State::key() const {
    std::uint64_t k = 0;
    k |= static_cast<std::uint64_t>(pc[0]) & 0xff;
    k |= (static_cast<std::uint64_t>(pc[1]) & 0xff) << 8;
    k |= static_cast<std::uint64_t>(pending[0]) << 16;
    k |= static_cast<std::uint64_t>(pending[1]) << 17;
    int shift = 18;
    for (const auto& queue : q) {
        std::uint64_t b = (queue.tail() & 0xf) | ((queue.size() & 0xf) << 4) |
                          (static_cast<std::uint64_t>(queue.signal_requested(Side::consumer)) << 8) |
                          (static_cast<std::uint64_t>(queue.signal_requested(Side::producer)) << 9);
        k |= b << shift;
        shift += 10;
    }
    return k;
}

std::string describe(const ProtocolModel& m, const State& s) {
    std::ostringstream o;
    const char* ctx[2] = {"producer", "consumer"};
    for (int c = 0; c < 2; ++c) {
        const auto& in = m.program[c][s.pc[c]];
        o << ctx[c] << " at " << (in.op == Op::sleep ? std::string("sleep") : in.label)
          << (s.pending[c] ? " (notified)" : "") << "; ";
    }
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        o << "q" << i << " size " << s.q[i].size() << "/" << s.q[i].capacity()
          << " flags c=" << s.q[i].signal_requested(Side::consumer)
          << " p=" << s.q[i].signal_requested(Side::producer);
        if (i + 1 < s.q.size()) o << "; ";
    }
    return o.str();
}

std::string verdict_name(Verdict v) {
    switch (v) {
    case Verdict::deadlock_free: return "deadlock-free";
    case Verdict::deadlock: return "deadlock";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

State initial_state(const ProtocolModel& m) {
    State s;
    s.pc[0] = m.start[0];
    s.pc[1] = m.start[1];
    for (int i = 0; i < m.queues; ++i) {
        s.q.emplace_back(m.capacity);
    }
    if (m.topology == Topology::pair) {
        for (std::uint32_t i = 0; i < m.capacity; ++i) {
            (void)s.q[1].enqueue(0);
        }
    }
    return s;
}

bool enabled(const ProtocolModel& m, const State& s, int context) {
    return m.program[context][s.pc[context]].op != Op::sleep || s.pending[context];
}

Step step(const ProtocolModel& m, State& s, int context) {
    if (!enabled(m, s, context)) {
        throw std::logic_error("checker: context is asleep");
    }
    const Instr& in = m.program[context][s.pc[context]];
    auto& q = s.q[in.queue];
    bool take_next = true;
    switch (in.op) {
    case Op::enqueue: take_next = q.enqueue(0); break;
    case Op::dequeue: take_next = q.dequeue().has_value(); break;
    case Op::saw_empty: take_next = q.size() == 1; break;
    case Op::saw_full: take_next = q.size() == q.capacity() - 1; break;
    case Op::test_empty: take_next = q.empty(); break;
    case Op::test_full: take_next = q.full(); break;
    case Op::test_flag: take_next = q.signal_requested(in.side); break;
    case Op::set_flag: q.set_signal_request(in.side, true); break;
    case Op::clear_flag: q.set_signal_request(in.side, false); break;
    case Op::notify: s.pending[1 - context] = true; break;
    case Op::sleep: s.pending[context] = false; break;
    }
    s.pc[context] = take_next ? in.next : in.alt;
    for (auto& queue : s.q) {
        queue.normalise_counters();
    }
    return {context, in.label};
}

bool stuck(const ProtocolModel& m, const State& s) {
    // Both topologies always have pending work: the single producer has an
    // endless supply and in the pair every buffer is somewhere.
    return !enabled(m, s, 0) && !enabled(m, s, 1);
}

CheckResult explore(const ProtocolModel& m, std::uint64_t state_cap) {
    struct Node {
        State state;
        std::int64_t parent;
        Step via;
    };
    std::vector<Node> nodes;
    std::unordered_map<std::uint64_t, std::int64_t> seen;
    std::deque<std::int64_t> frontier;

    CheckResult r;
    nodes.push_back({initial_state(m), -1, {}});
    seen.emplace(nodes[0].state.key(), 0);
    frontier.push_back(0);

    while (!frontier.empty()) {
        const auto at = frontier.front();
        frontier.pop_front();
        if (stuck(m, nodes[at].state)) {
            r.verdict = Verdict::deadlock;
            r.states = nodes.size();
            r.stuck = describe(m, nodes[at].state);
            for (auto i = at; nodes[i].parent >= 0; i = nodes[i].parent) {
                r.trace.push_back(nodes[i].via);
            }
            std::reverse(r.trace.begin(), r.trace.end());
            return r;
        }
        for (int c = 0; c < 2; ++c) {
            if (!enabled(m, nodes[at].state, c)) {
                continue;
            }
            State next = nodes[at].state;
            Step st = step(m, next, c);
            const auto k = next.key();
            if (seen.count(k)) {
                continue;
            }
            if (nodes.size() >= state_cap) {
                r.verdict = Verdict::inconclusive;
                r.states = nodes.size();
                return r;
            }
            seen.emplace(k, static_cast<std::int64_t>(nodes.size()));
            nodes.push_back({std::move(next), at, std::move(st)});
            frontier.push_back(static_cast<std::int64_t>(nodes.size()) - 1);
        }
    }
    r.verdict = Verdict::deadlock_free;
    r.states = nodes.size();
    return r;
}

State replay(const std::vector<Step>& trace, const ProtocolModel& m) {
    State s = initial_state(m);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& t = trace[i];
        if (t.context < 0 || t.context > 1) {
            throw std::invalid_argument("replay: bad context at step " + std::to_string(i));
        }
        if (!enabled(m, s, t.context)) {
            throw std::invalid_argument("replay: step " + std::to_string(i) + " is not enabled");
        }
        const auto& expect = m.program[t.context][s.pc[t.context]].label;
        if (expect != t.label) {
            throw std::invalid_argument("replay: step " + std::to_string(i) + " expected '" + expect +
                                        "', trace has '" + t.label + "'");
        }
        step(m, s, t.context);
    }
    return s;
}

std::string format_trace(const std::vector<Step>& trace) {
    std::ostringstream o;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        o << i + 1 << "\t" << (trace[i].context == 0 ? "producer" : "consumer") << "\t"
          << trace[i].label << "\n";
    }
    return o.str();
}

} // namespace modio::check
