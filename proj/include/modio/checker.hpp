#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modio/queue.hpp"

namespace modio::check {

/// One step of a context's program. Steps are atomic; every queue access
/// goes through a real SpscQueue.
enum class Op {
    enqueue,        // alt taken when full
    dequeue,        // alt taken when empty
    saw_empty,      // size()==1 after an enqueue: next, else alt
    saw_full,       // size()==cap-1 after a dequeue: next, else alt
    test_empty,     // next if empty, else alt
    test_full,      // next if full, else alt
    test_flag,      // next if the flag is set, else alt
    set_flag,
    clear_flag,
    notify,         // mark a notification pending for the peer
    sleep,          // blocks until a notification is pending, then consumes it
};

struct Instr {
    Op op;
    int queue = 0;
    Side side = Side::consumer;  // flag owner for flag ops
    int next = 0;
    int alt = 0;
    std::string label;
};

enum class Variant {
    pessimistic,
    optimised,
    bug1,  // consumer re-checks emptiness before setting its flag
    bug2,  // producer reads the consumer flag before publishing
    bug3,  // consumer sets its flag but sleeps without re-checking
    bug4,  // producer sets its flag on full but sleeps without re-checking
};

enum class Topology { single, pair };

std::string variant_name(Variant v);
std::optional<Variant> parse_variant(const std::string& s);
std::string topology_name(Topology t);
std::optional<Topology> parse_topology(const std::string& s);
std::vector<Variant> all_variants();

/// Two contexts (0 = producer side, 1 = consumer side) sharing one queue,
/// or a request queue plus a return queue prefilled with every buffer.
struct ProtocolModel {
    Variant variant = Variant::optimised;
    Topology topology = Topology::single;
    std::uint32_t capacity = 2;
    std::vector<Instr> program[2];
    int start[2] = {0, 0};
    int queues = 1;

    static ProtocolModel make(Variant v, Topology t, std::uint32_t capacity);
};

struct State {
    int pc[2] = {0, 0};
    bool pending[2] = {false, false};
    std::vector<SpscQueue<std::uint8_t>> q;

    std::uint64_t key() const;
};

std::string describe(const ProtocolModel& m, const State& s);

struct Step {
    int context = 0;
    std::string label;
    friend bool operator==(const Step&, const Step&) = default;
};

enum class Verdict { deadlock_free, deadlock, inconclusive };
std::string verdict_name(Verdict v);

struct CheckResult {
    Verdict verdict = Verdict::inconclusive;
    std::uint64_t states = 0;
    std::vector<Step> trace;
    std::string stuck;  // description of the stuck state
};

inline constexpr std::uint64_t kStateCap = 10'000'000;

State initial_state(const ProtocolModel& m);
bool enabled(const ProtocolModel& m, const State& s, int context);
/// Execute one step of `context`. Throws std::logic_error if disabled.
Step step(const ProtocolModel& m, State& s, int context);
/// No context can run, yet there is work: the producer always has more to
/// send, and a non-empty queue is work for its consumer.
bool stuck(const ProtocolModel& m, const State& s);

CheckResult explore(const ProtocolModel& m, std::uint64_t state_cap = kStateCap);

/// Re-execute a trace from the initial state. Throws std::invalid_argument
/// when a step is disabled or its label does not match the model.
State replay(const std::vector<Step>& trace, const ProtocolModel& m);

std::string format_trace(const std::vector<Step>& trace);

} // namespace modio::check
