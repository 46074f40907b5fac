// modio command line: run scenarios, sweep load, check the signalling
// protocol and replay the policy-swap experiment.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "modio/bench.hpp"
#include "modio/builders.hpp"
#include "modio/checker.hpp"
#include "modio/scenario.hpp"

using namespace modio;

namespace {

void write_out(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

int report_audit(const std::vector<std::string>& problems) {
    if (problems.empty()) return 0;
    for (const auto& p : problems) std::cerr << "audit: " << p << "\n";
    return 2;
}

int cmd_run(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed) {
    Scenario s = load_scenario(path);
    if (seed) s.seed = *seed;
    std::ostringstream csv;
    if (s.disk) {
        auto r = run_storage(s);
        write_storage_csv(csv, r, s.cores);
        write_out(out, csv.str());
        std::cerr << s.name << ": issued " << r.issued << " completed " << r.completed
                  << (r.finished ? "" : " (time limit)") << ", iops " << format_fixed(r.summary.iops, 1)
                  << ", verify failures " << r.verify_failures << "\n";
        auto problems = r.barrier_violations;
        problems.insert(problems.end(), r.isolation_problems.begin(), r.isolation_problems.end());
        return report_audit(problems);
    }
    auto r = run_scenario(s);
    write_csv(csv, r.samples, r.cores, true);
    write_out(out, csv.str());
    std::cerr << s.name << ": applied " << format_fixed(r.summary.applied_mbps, 1) << " Mb/s, achieved "
              << format_fixed(r.summary.achieved_mbps, 1) << " Mb/s, drops " << r.summary.drops
              << ", avg batch " << format_fixed(r.summary.avg_batch, 2);
    if (s.workload.audit) std::cerr << ", audits " << r.audits;
    std::cerr << "\n";
    return report_audit(r.audit_problems);
}

int cmd_sweep(const std::string& path, const std::string& rates, std::uint32_t frame, std::uint64_t seed,
              std::optional<double> duration, std::optional<double> warmup, const std::string& out) {
    Scenario s = load_scenario(path);
    LoadSpec l;
    l.rates_mbps = parse_rates(rates);
    l.frame_bytes = frame;
    l.seed = seed;
    l.duration_s = duration.value_or(s.workload.duration_s);
    l.warmup_s = warmup.value_or(s.workload.warmup_s);
    check_load(l);
    auto rep = run_sweep(s, l);
    std::ostringstream csv;
    write_csv(csv, rep.rows, rep.cores, false);
    write_out(out, csv.str());
    return 0;
}

int cmd_check(const std::string& protocol, std::uint32_t capacity, const std::string& topology, bool trace) {
    auto v = check::parse_variant(protocol);
    if (!v) throw ConfigError("unknown protocol '" + protocol + "'");
    auto t = check::parse_topology(topology);
    if (!t) throw ConfigError("unknown topology '" + topology + "'");
    auto m = check::ProtocolModel::make(*v, *t, capacity);
    auto r = check::explore(m);
    std::cout << "protocol " << check::variant_name(*v) << " topology " << check::topology_name(*t)
              << " capacity " << capacity << "\n"
              << "verdict " << check::verdict_name(r.verdict) << "\n"
              << "states " << r.states << "\n";
    if (r.verdict == check::Verdict::deadlock) {
        std::cout << "trace " << r.trace.size() << " steps\n";
        if (trace) std::cout << check::format_trace(r.trace);
        std::cout << "stuck " << r.stuck << "\n";
        return 1;
    }
    return r.verdict == check::Verdict::deadlock_free ? 0 : 3;
}

int cmd_swap(const std::string& out, std::uint64_t seed, bool audit) {
    SwapOptions o;
    o.seed = seed;
    o.audit = audit;
    auto r = run_scenario(swap_scenario(o));
    std::ostringstream csv;
    write_swap_csv(csv, swap_rows(r));
    write_out(out, csv.str());
    for (const auto& e : r.swaps) {
        std::cerr << "swap fired at " << format_fixed(e.fired.as_seconds(), 3) << " s, applied at "
                  << format_fixed(e.applied.as_seconds(), 6) << " s, cost "
                  << format_fixed(e.duration.as_us(), 1) << " us\n";
    }
    if (r.swaps.empty()) std::cerr << "swap never fired\n";
    std::cerr << "drops: nic " << r.ledger.nic << " rx_virt " << r.ledger.rx_virt << " tx_virt "
              << r.ledger.tx_virt << " client " << r.ledger.client << "\n";
    return report_audit(r.audit_problems);
}

Scenario builtin(const std::string& name) {
    if (name == "echo") return echo_scenario({});
    if (name == "echo-nocopy") {
        EchoOptions o;
        o.name = "echo-nocopy";
        o.copier = false;
        return echo_scenario(o);
    }
    if (name == "echo-null") {
        EchoOptions o;
        o.name = "echo-null";
        o.null_fwd = true;
        return echo_scenario(o);
    }
    if (name == "echo-multicore") {
        EchoOptions o;
        o.name = "echo-multicore";
        o.multicore = true;
        return echo_scenario(o);
    }
    if (name == "scaling") {
        EchoOptions o;
        o.name = "scaling";
        o.clients = 32;
        o.copier = false;
        o.rate_mbps = 300;
        return echo_scenario(o);
    }
    if (name == "broadcast") {
        EchoOptions o;
        o.name = "broadcast";
        o.clients = 3;
        o.audit = true;
        o.broadcast_mbps = 5;
        return echo_scenario(o);
    }
    if (name == "arp") {
        EchoOptions o;
        o.name = "arp";
        o.clients = 2;
        o.audit = true;
        o.broadcast = "arp";
        o.arp_client = true;
        o.broadcast_mbps = 5;
        return echo_scenario(o);
    }
    if (name == "swap") return swap_scenario({});
    if (name == "storage") return storage_scenario({});
    throw ConfigError("unknown built-in scenario '" + name + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"modio: simulated modular I/O framework"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one scenario and write per-window CSV");
    std::string run_scenario_path, run_out;
    std::optional<std::uint64_t> run_seed;
    run->add_option("--scenario", run_scenario_path, "scenario JSON file")->required();
    run->add_option("--out", run_out, "CSV output path (default stdout)");
    run->add_option("--seed", run_seed, "override the scenario seed");

    auto* sweep = app.add_subcommand("sweep", "one run per applied rate");
    std::string sw_path, sw_rates, sw_out;
    std::uint32_t sw_frame = 1518;
    std::uint64_t sw_seed = 1;
    std::optional<double> sw_duration, sw_warmup;
    sweep->add_option("--scenario", sw_path, "scenario JSON file")->required();
    sweep->add_option("--rates", sw_rates, "a:b:step in Mb/s, inclusive")->required();
    sweep->add_option("--frame", sw_frame, "frame size in bytes");
    sweep->add_option("--seed", sw_seed, "seed");
    sweep->add_option("--duration", sw_duration, "seconds per rate point");
    sweep->add_option("--warmup", sw_warmup, "warm-up seconds");
    sweep->add_option("--out", sw_out, "CSV output path (default stdout)");

    auto* chk = app.add_subcommand("check", "exhaustively check a signalling protocol");
    std::string ck_protocol = "optimised", ck_topology = "single";
    std::uint32_t ck_capacity = 2;
    bool ck_trace = false;
    chk->add_option("--protocol", ck_protocol, "pessimistic | optimised | bug-1 .. bug-4");
    chk->add_option("--capacity", ck_capacity, "queue capacity (1, 2 or 4)");
    chk->add_option("--topology", ck_topology, "single | pair");
    chk->add_flag("--trace", ck_trace, "print the counterexample");

    auto* swap = app.add_subcommand("swap-demo", "threshold-triggered policy swap");
    std::string swap_out;
    std::uint64_t swap_seed = 1;
    bool swap_audit = false;
    swap->add_option("--out", swap_out, "CSV output path (default stdout)");
    swap->add_option("--seed", swap_seed, "seed");
    swap->add_flag("--audit", swap_audit, "run the buffer conservation audit at every sample");

    auto* exp = app.add_subcommand("scenario", "write a built-in scenario as JSON");
    std::string ex_name, ex_out;
    exp->add_option("name", ex_name,
                    "echo | echo-nocopy | echo-null | echo-multicore | scaling | broadcast | arp | swap | storage")
        ->required();
    exp->add_option("--out", ex_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_scenario_path, run_out, run_seed);
        if (*sweep) return cmd_sweep(sw_path, sw_rates, sw_frame, sw_seed, sw_duration, sw_warmup, sw_out);
        if (*chk) return cmd_check(ck_protocol, ck_capacity, ck_topology, ck_trace);
        if (*swap) return cmd_swap(swap_out, swap_seed, swap_audit);
        if (*exp) {
            write_out(ex_out, scenario_to_json(builtin(ex_name)).dump(2) + "\n");
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "modio: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
