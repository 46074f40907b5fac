#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modio/runtime.hpp"
#include "modio/scenario.hpp"
#include "modio/swap.hpp"

namespace modio {

struct Percentiles {
    std::optional<double> p50;
    std::optional<double> p99;
    /// Fewer than the minimum number of samples; values left absent.
    bool insufficient = false;
};

inline constexpr std::size_t kMinRttSamples = 100;

/// Nearest-rank percentiles. Needs at least `min_samples` values.
Percentiles rtt_percentiles(std::vector<double> samples_us, std::size_t min_samples = kMinRttSamples);

/// One measurement window of a network run.
struct SampleRow {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double applied_mbps = 0.0;
    double achieved_mbps = 0.0;
    std::vector<double> util;
    std::optional<double> rtt_p50_us;
    std::optional<double> rtt_p99_us;
    std::uint64_t drops = 0;
    std::uint64_t invalid_descriptors = 0;
    double avg_batch = 0.0;
    // not in the CSV
    std::vector<double> client_mbps;               // egress by MAC table index
    std::vector<std::optional<double>> client_rtt_us;  // mean, by MAC table index
    std::uint64_t injected = 0;
    std::uint64_t echoed = 0;
    std::uint64_t driver_invocations = 0;
    std::uint64_t driver_items = 0;
};

/// Where injected unicast frames ended up, over the whole run.
struct DropLedger {
    std::uint64_t injected = 0;
    std::uint64_t echoed = 0;
    std::uint64_t nic = 0;
    std::uint64_t rx_virt = 0;    // unknown MAC or client queue full
    std::uint64_t tx_virt = 0;    // failed sanitising
    std::uint64_t client = 0;     // no transmit buffer
    /// Neither echoed nor dropped anywhere: lost or still in flight.
    std::int64_t unaccounted() const;
};

struct RunResult {
    std::string scenario;
    int cores = 1;
    SampleRow summary;                // warm-up end to duration
    std::vector<SampleRow> samples;   // one per sample window after warm-up
    SimulationReport report;          // final cumulative accounts
    DropLedger ledger;
    std::uint64_t audits = 0;
    std::vector<std::string> audit_problems;
    std::vector<SwapEvent> swaps;
    bool audit_ok() const { return audit_problems.empty(); }
};

/// Called after build, before the first event. Tests use it to schedule
/// migrations, restarts and probes.
using RunSetup = std::function<void(Runtime&)>;

/// Build and run a network scenario: warm-up, sampled measurement, then the
/// generator stops and in-flight frames drain.
RunResult run_scenario(const Scenario& s, const RunSetup& setup = {});

struct LoadSpec {
    std::vector<double> rates_mbps;
    std::uint32_t frame_bytes = 1518;
    double duration_s = 1.0;
    double warmup_s = 0.1;
    std::uint64_t seed = 1;
};

/// Throws ConfigError when the spec breaks its invariants.
void check_load(const LoadSpec& l);
/// "a:b:step" inclusive.
std::vector<double> parse_rates(const std::string& text);

struct SweepReport {
    int cores = 1;
    std::vector<SampleRow> rows;
};

/// One run per rate. The scenario's flows are scaled so their rates sum to
/// each applied rate.
SweepReport run_sweep(const Scenario& s, const LoadSpec& load,
                      std::vector<RunResult>* runs = nullptr);

std::vector<std::string> csv_header(int cores, bool with_time);
void write_csv(std::ostream& out, const std::vector<SampleRow>& rows, int cores, bool with_time);
void emit_csv(const SweepReport& r, const std::string& path);
/// Per-window report of a single run.
void emit_run_csv(const RunResult& r, const std::string& path);
/// Parse a sweep CSV back into rows (non-CSV fields left default).
SweepReport parse_sweep_csv(std::istream& in);

/// Swap demo: per-window client throughput and the window the swap landed in.
struct SwapRow {
    double time_s = 0.0;
    double client0_mbps = 0.0;
    double client1_mbps = 0.0;
    std::optional<double> client0_rtt_us;
    bool swap_marker = false;
};
std::vector<SwapRow> swap_rows(const RunResult& r);
void write_swap_csv(std::ostream& out, const std::vector<SwapRow>& rows);

/// Storage run: closed-loop clients until they finish or time runs out.
struct StorageRow {
    double time_s = 0.0;
    double iops = 0.0;
    double mbytes_per_s = 0.0;
    std::optional<double> lat_p50_us;
    std::optional<double> lat_p99_us;
    std::vector<double> util;
};

struct StorageResult {
    std::string scenario;
    std::vector<StorageRow> samples;
    StorageRow summary;
    SimulationReport report;
    std::uint64_t issued = 0;
    std::uint64_t completed = 0;
    bool finished = false;
    std::vector<std::string> barrier_violations;
    std::vector<std::string> isolation_problems;
    std::uint64_t verify_failures = 0;
    std::uint64_t verified_blocks = 0;
};

StorageResult run_storage(const Scenario& s, const RunSetup& setup = {});
void write_storage_csv(std::ostream& out, const StorageResult& r, int cores);

/// Barrier oracle over a disk trace: nothing submitted before a barrier
/// may complete after anything submitted after it.
std::vector<std::string> check_barriers(const DiskModel& disk);

std::string format_fixed(double v, int precision);

} // namespace modio
