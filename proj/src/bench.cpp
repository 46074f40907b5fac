#include "modio/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "modio/net.hpp"
#include "modio/storage.hpp"

namespace modio {

namespace {

std::uint64_t sum_suffix(const std::map<std::string, std::uint64_t>& counters,
                         const std::string& suffix) {
    std::uint64_t n = 0;
    for (const auto& [k, v] : counters) {
        if (k.size() > suffix.size() && k.compare(k.size() - suffix.size(), suffix.size(), suffix) == 0 &&
            k[k.size() - suffix.size() - 1] == '.') {
            n += v;
        }
    }
    return n;
}

std::uint64_t sum_class(const SimulationReport& r, const Scenario& s, const std::string& cls,
                        const std::string& counter) {
    std::uint64_t n = 0;
    for (const auto& c : s.components) {
        if (c.cls == cls) n += r.counter(c.name + "." + counter);
    }
    return n;
}

struct Snapshot {
    Time t;
    SimulationReport report;
};

std::string na_or(const std::optional<double>& v, int precision) {
    return v ? format_fixed(*v, precision) : "NA";
}

std::vector<Time> boundaries(const WorkloadSpec& w) {
    std::vector<Time> b;
    const Time start = Time::seconds(w.warmup_s);
    const Time end = Time::seconds(w.duration_s);
    const Time step = Time::seconds(w.sample_ms * 1e-3);
    b.push_back(start);
    for (Time t = start + step; t < end; t += step) b.push_back(t);
    b.push_back(end);
    return b;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

} // namespace

std::string format_fixed(double v, int precision) {
    if (std::abs(v) < 0.5 * std::pow(10.0, -precision)) v = 0.0;  // no "-0.000"
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

Percentiles rtt_percentiles(std::vector<double> samples, std::size_t min_samples) {
    Percentiles p;
    if (samples.empty() || samples.size() < min_samples) {
        p.insufficient = true;
        return p;
    }
    std::sort(samples.begin(), samples.end());
    const auto rank = [&](double q) {
        auto r = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(samples.size())));
        return samples[std::clamp<std::size_t>(r, 1, samples.size()) - 1];
    };
    p.p50 = rank(50.0);
    p.p99 = rank(99.0);
    return p;
}

std::int64_t DropLedger::unaccounted() const {
    return static_cast<std::int64_t>(injected) -
           static_cast<std::int64_t>(echoed + nic + rx_virt + tx_virt + client);
}

// ------------------------------------------------------------- network runs

RunResult run_scenario(const Scenario& s, const RunSetup& setup) {
    auto rt = Runtime::build(s);
    if (setup) setup(*rt);
    RunResult res;
    res.scenario = s.name;
    res.cores = s.cores;
    const auto& w = s.workload;

    if (w.audit) {
        const Time step = Time::seconds(w.sample_ms * 1e-3);
        rt->every(step, step, [&res, r = rt.get()](Time t) {
            ++res.audits;
            auto a = r->audit_buffers();
            for (auto& p : a.problems) {
                res.audit_problems.push_back("t=" + format_fixed(t.as_seconds(), 6) + ": " + p);
            }
        });
    }

    std::vector<Snapshot> snaps;
    for (Time b : boundaries(w)) {
        snaps.push_back({b, rt->run_until(b)});
    }
    if (auto* g = rt->generator()) g->stop_at(Time::seconds(w.duration_s));
    res.report = rt->run_until(Time::seconds(w.duration_s + w.drain_s));
    if (w.audit) {
        ++res.audits;
        for (auto& p : rt->audit_buffers().problems) res.audit_problems.push_back("end: " + p);
    }
    for (std::size_t i = 0; i < rt->component_count(); ++i) {
        if (auto* tx = dynamic_cast<TxVirt*>(&rt->component(i))) {
            res.swaps.insert(res.swaps.end(), tx->swaps().begin(), tx->swaps().end());
        }
    }

    const auto* gen = rt->generator();
    const std::string driver = s.nic ? s.nic->driver : std::string();
    const auto n_macs = s.mac_table.size();

    auto window = [&](const Snapshot& a, const Snapshot& b) {
        SampleRow row;
        row.t_start_s = a.t.as_seconds();
        row.t_end_s = b.t.as_seconds();
        const double secs = (b.t - a.t).as_seconds();
        for (std::size_t c = 0; c < b.report.cores.size(); ++c) {
            const auto busy = b.report.cores[c].busy - a.report.cores[c].busy;
            row.util.push_back(secs > 0 ? std::clamp(busy.as_seconds() / secs, 0.0, 1.0) : 0.0);
        }
        row.invalid_descriptors = sum_suffix(b.report.counters, "invalid_descriptors") -
                                  sum_suffix(a.report.counters, "invalid_descriptors");
        if (!driver.empty()) {
            const auto& sa = a.report.components.at(driver);
            const auto& sb = b.report.components.at(driver);
            row.driver_invocations = sb.batch_invocations - sa.batch_invocations;
            row.driver_items = sb.batch_items - sa.batch_items;
            row.avg_batch = row.driver_invocations == 0
                                ? 0.0
                                : static_cast<double>(row.driver_items) /
                                      static_cast<double>(row.driver_invocations);
        }
        row.client_mbps.assign(n_macs, 0.0);
        row.client_rtt_us.assign(n_macs, std::nullopt);
        if (gen == nullptr || secs <= 0) return row;

        // frames whose last bit reached the NIC inside the window
        const auto& at = gen->injected_at();
        const auto& echoes = gen->echo_counts();
        const auto& bcast = gen->broadcast_flags();
        auto lo = std::lower_bound(at.begin() + 1, at.end(), a.t) - at.begin();
        auto hi = std::lower_bound(at.begin() + 1, at.end(), b.t) - at.begin();
        std::uint64_t bytes = 0;
        std::uint64_t echoed_bytes = 0;
        for (auto id = lo; id < hi; ++id) {
            bytes += w.frame_bytes;
            ++row.injected;
            if (echoes[id] > 0) {
                ++row.echoed;
                echoed_bytes += w.frame_bytes;
            } else if (bcast[id] == 0) {
                ++row.drops;
            }
        }
        row.applied_mbps = static_cast<double>(bytes) * 8.0 / secs / 1e6;
        row.achieved_mbps = static_cast<double>(echoed_bytes) * 8.0 / secs / 1e6;

        std::vector<double> rtts;
        std::vector<double> rtt_sum(n_macs, 0.0);
        std::vector<std::uint64_t> rtt_n(n_macs, 0);
        for (const auto& r : gen->rtt_samples()) {
            if (r.t < a.t || r.t >= b.t) continue;
            rtts.push_back(r.rtt.as_us());
            if (r.src >= 0) {
                rtt_sum[static_cast<std::size_t>(r.src)] += r.rtt.as_us();
                ++rtt_n[static_cast<std::size_t>(r.src)];
            }
        }
        const auto p = rtt_percentiles(rtts);
        row.rtt_p50_us = p.p50;
        row.rtt_p99_us = p.p99;
        std::vector<std::uint64_t> egress_bytes(n_macs, 0);
        for (const auto& e : gen->egress()) {
            if (e.t < a.t || e.t >= b.t || e.src < 0) continue;
            egress_bytes[static_cast<std::size_t>(e.src)] += e.bytes;
        }
        for (std::size_t i = 0; i < n_macs; ++i) {
            row.client_mbps[i] = static_cast<double>(egress_bytes[i]) * 8.0 / secs / 1e6;
            if (rtt_n[i] > 0) row.client_rtt_us[i] = rtt_sum[i] / static_cast<double>(rtt_n[i]);
        }
        return row;
    };

    for (std::size_t i = 1; i < snaps.size(); ++i) {
        res.samples.push_back(window(snaps[i - 1], snaps[i]));
    }
    res.summary = window(snaps.front(), snaps.back());

    if (gen != nullptr) {
        const auto& echoes = gen->echo_counts();
        const auto& bcast = gen->broadcast_flags();
        for (std::size_t id = 1; id < echoes.size(); ++id) {
            if (bcast[id] != 0) continue;
            ++res.ledger.injected;
            if (echoes[id] > 0) ++res.ledger.echoed;
        }
        const auto& r = res.report;
        // NIC drops of broadcast frames are not part of the unicast ledger
        std::uint64_t nic_bcast = 0;
        for (std::size_t f = 0; f < s.workload.flows.size(); ++f) {
            const auto& dst = s.workload.flows[f].dst;
            if (dst == "broadcast" || dst.rfind("arp:", 0) == 0) {
                nic_bcast += gen->flow_stats()[f].nic_drops;
            }
        }
        res.ledger.nic = gen->nic_drops() - nic_bcast;
        res.ledger.rx_virt = sum_class(r, s, "rx_virt", "unknown_mac_drops") +
                             sum_class(r, s, "rx_virt", "overflow_drops");
        res.ledger.tx_virt = sum_class(r, s, "tx_virt", "invalid_descriptors");
        res.ledger.client = sum_class(r, s, "echo_client", "tx_drops");
    }
    return res;
}

void check_load(const LoadSpec& l) {
    if (!std::is_sorted(l.rates_mbps.begin(), l.rates_mbps.end())) {
        throw ConfigError("load: rates must be sorted ascending");
    }
    if (std::any_of(l.rates_mbps.begin(), l.rates_mbps.end(), [](double r) { return r <= 0; })) {
        throw ConfigError("load: rates must be positive");
    }
    if (l.duration_s <= l.warmup_s || l.warmup_s < 0) {
        throw ConfigError("load: duration must exceed warm-up");
    }
}

std::vector<double> parse_rates(const std::string& text) {
    const auto parts = split(text, ':');
    std::vector<double> out;
    try {
        if (parts.size() == 1) {
            out.push_back(std::stod(parts[0]));
            return out;
        }
        if (parts.size() != 3) throw std::invalid_argument("shape");
        const double a = std::stod(parts[0]);
        const double b = std::stod(parts[1]);
        const double step = std::stod(parts[2]);
        if (step <= 0 || b < a) throw std::invalid_argument("range");
        const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
        for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    } catch (const std::invalid_argument&) {
        throw ConfigError("rates: expected a:b:step, got '" + text + "'");
    }
    return out;
}

SweepReport run_sweep(const Scenario& base, const LoadSpec& load, std::vector<RunResult>* runs) {
    check_load(load);
    double base_total = 0.0;
    for (const auto& f : base.workload.flows) base_total += f.rate_mbps;
    if (base_total <= 0.0) {
        throw ConfigError("sweep: scenario '" + base.name + "' has no flow to scale");
    }
    SweepReport rep;
    rep.cores = base.cores;
    for (double rate : load.rates_mbps) {
        Scenario s = base;
        s.seed = load.seed;
        s.workload.frame_bytes = load.frame_bytes;
        s.workload.duration_s = load.duration_s;
        s.workload.warmup_s = load.warmup_s;
        s.workload.sample_ms = std::max(s.workload.sample_ms, (load.duration_s - load.warmup_s) * 1e3);
        for (auto& f : s.workload.flows) {
            f.rate_mbps = f.rate_mbps / base_total * rate;
            f.ramp_to_mbps.reset();
        }
        auto r = run_scenario(s);
        rep.rows.push_back(r.summary);
        if (runs != nullptr) runs->push_back(std::move(r));
    }
    return rep;
}

// --------------------------------------------------------------------- CSV

std::vector<std::string> csv_header(int cores, bool with_time) {
    std::vector<std::string> h;
    if (with_time) h.push_back("time_s");
    h.push_back("applied_mbps");
    h.push_back("achieved_mbps");
    for (int c = 0; c < cores; ++c) h.push_back("util_core" + std::to_string(c));
    for (const char* k : {"rtt_p50_us", "rtt_p99_us", "drops", "invalid_descriptors", "avg_batch"}) {
        h.emplace_back(k);
    }
    return h;
}

void write_csv(std::ostream& out, const std::vector<SampleRow>& rows, int cores, bool with_time) {
    const auto h = csv_header(cores, with_time);
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << "\n";
    for (const auto& r : rows) {
        if (with_time) out << format_fixed(r.t_end_s, 3) << ",";
        out << format_fixed(r.applied_mbps, 3) << "," << format_fixed(r.achieved_mbps, 3);
        for (int c = 0; c < cores; ++c) {
            const double u = static_cast<std::size_t>(c) < r.util.size() ? r.util[static_cast<std::size_t>(c)] : 0.0;
            out << "," << format_fixed(u, 6);
        }
        out << "," << na_or(r.rtt_p50_us, 3) << "," << na_or(r.rtt_p99_us, 3) << "," << r.drops
            << "," << r.invalid_descriptors << "," << format_fixed(r.avg_batch, 3) << "\n";
    }
}

namespace {

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

} // namespace

void emit_csv(const SweepReport& r, const std::string& path) {
    std::ostringstream out;
    write_csv(out, r.rows, r.cores, false);
    write_file(path, out.str());
}

void emit_run_csv(const RunResult& r, const std::string& path) {
    std::ostringstream out;
    write_csv(out, r.samples, r.cores, true);
    write_file(path, out.str());
}

SweepReport parse_sweep_csv(std::istream& in) {
    SweepReport rep;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("csv: empty input");
    const auto header = split(line, ',');
    int cores = 0;
    for (const auto& h : header) {
        if (h.rfind("util_core", 0) == 0) ++cores;
    }
    if (header != csv_header(cores, false)) throw ConfigError("csv: unexpected header");
    rep.cores = cores;
    auto opt = [](const std::string& v) -> std::optional<double> {
        if (v == "NA") return std::nullopt;
        return std::stod(v);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != header.size()) throw ConfigError("csv: ragged row");
        SampleRow r;
        std::size_t i = 0;
        r.applied_mbps = std::stod(f[i++]);
        r.achieved_mbps = std::stod(f[i++]);
        for (int c = 0; c < cores; ++c) r.util.push_back(std::stod(f[i++]));
        r.rtt_p50_us = opt(f[i++]);
        r.rtt_p99_us = opt(f[i++]);
        r.drops = std::stoull(f[i++]);
        r.invalid_descriptors = std::stoull(f[i++]);
        r.avg_batch = std::stod(f[i++]);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

// -------------------------------------------------------------- swap demo

std::vector<SwapRow> swap_rows(const RunResult& r) {
    std::vector<SwapRow> rows;
    for (const auto& s : r.samples) {
        SwapRow row;
        row.time_s = s.t_end_s;
        row.client0_mbps = s.client_mbps.size() > 0 ? s.client_mbps[0] : 0.0;
        row.client1_mbps = s.client_mbps.size() > 1 ? s.client_mbps[1] : 0.0;
        row.client0_rtt_us = s.client_rtt_us.empty() ? std::nullopt : s.client_rtt_us[0];
        for (const auto& e : r.swaps) {
            const double t = e.applied.as_seconds();
            if (t >= s.t_start_s && t < s.t_end_s) row.swap_marker = true;
        }
        rows.push_back(row);
    }
    return rows;
}

void write_swap_csv(std::ostream& out, const std::vector<SwapRow>& rows) {
    out << "time_s,client0_mbps,client1_mbps,client0_rtt_us,swap_marker\n";
    for (const auto& r : rows) {
        out << format_fixed(r.time_s, 3) << "," << format_fixed(r.client0_mbps, 3) << ","
            << format_fixed(r.client1_mbps, 3) << "," << na_or(r.client0_rtt_us, 3) << ","
            << (r.swap_marker ? 1 : 0) << "\n";
    }
}

// ----------------------------------------------------------------- storage

std::vector<std::string> check_barriers(const DiskModel& disk) {
    std::vector<std::string> out;
    const auto& trace = disk.trace();
    for (const auto mark : disk.barrier_marks()) {
        std::optional<std::uint64_t> last_before;
        std::optional<std::uint64_t> first_after;
        std::uint64_t before_id = 0;
        std::uint64_t after_id = 0;
        for (const auto& e : trace) {
            if (e.submit_seq < mark) {
                if (!last_before || e.complete_seq > *last_before) {
                    last_before = e.complete_seq;
                    before_id = e.id;
                }
            } else if (!first_after || e.complete_seq < *first_after) {
                first_after = e.complete_seq;
                after_id = e.id;
            }
        }
        if (last_before && first_after && *first_after < *last_before) {
            out.push_back("barrier after submission " + std::to_string(mark) + ": request " +
                          std::to_string(after_id) + " completed before request " +
                          std::to_string(before_id));
        }
    }
    return out;
}

StorageResult run_storage(const Scenario& s, const RunSetup& setup) {
    auto rt = Runtime::build(s);
    if (setup) setup(*rt);
    StorageResult res;
    res.scenario = s.name;

    std::vector<BlkClient*> clients;
    for (std::size_t i = 0; i < rt->component_count(); ++i) {
        if (auto* c = dynamic_cast<BlkClient*>(&rt->component(i))) clients.push_back(c);
    }
    auto done = [&] {
        return std::all_of(clients.begin(), clients.end(), [](const BlkClient* c) {
            return c->outstanding() == 0;
        });
    };

    const Time step = Time::seconds(s.workload.sample_ms * 1e-3);
    const Time end = Time::seconds(s.workload.duration_s);
    std::vector<Snapshot> snaps{{Time{}, rt->report()}};
    Time t{};
    while (t < end) {
        t = std::min(t + step, end);
        snaps.push_back({t, rt->run_until(t)});
        if (done()) break;
    }
    res.report = rt->report();
    res.finished = done();

    std::vector<LatencySample> lat;
    for (auto* c : clients) {
        res.issued += c->issued();
        res.completed += c->completed();
        lat.insert(lat.end(), c->latencies().begin(), c->latencies().end());
        res.verify_failures += c->counter("verify_failures");
        res.verified_blocks += c->counter("verified_blocks");
    }
    std::sort(lat.begin(), lat.end(), [](const auto& a, const auto& b) { return a.t < b.t; });

    auto window = [&](const Snapshot& a, const Snapshot& b) {
        StorageRow row;
        row.time_s = b.t.as_seconds();
        const double secs = (b.t - a.t).as_seconds();
        std::vector<double> us;
        std::uint64_t bytes = 0;
        for (const auto& l : lat) {
            if (l.t <= a.t || l.t > b.t) continue;
            us.push_back(l.latency.as_us());
            bytes += l.bytes;
        }
        if (secs > 0) {
            row.iops = static_cast<double>(us.size()) / secs;
            row.mbytes_per_s = static_cast<double>(bytes) / secs / 1e6;
        }
        const auto p = rtt_percentiles(us);
        row.lat_p50_us = p.p50;
        row.lat_p99_us = p.p99;
        for (std::size_t c = 0; c < b.report.cores.size(); ++c) {
            const auto busy = b.report.cores[c].busy - a.report.cores[c].busy;
            row.util.push_back(secs > 0 ? std::clamp(busy.as_seconds() / secs, 0.0, 1.0) : 0.0);
        }
        return row;
    };
    for (std::size_t i = 1; i < snaps.size(); ++i) res.samples.push_back(window(snaps[i - 1], snaps[i]));
    res.summary = window(snaps.front(), snaps.back());

    if (auto* disk = rt->disk()) {
        res.barrier_violations = check_barriers(*disk);
        auto* virt = [&]() -> BlkVirt* {
            for (std::size_t i = 0; i < rt->component_count(); ++i) {
                if (auto* v = dynamic_cast<BlkVirt*>(&rt->component(i))) return v;
            }
            return nullptr;
        }();
        std::vector<bool> covered(disk->spec().capacity_blocks, false);
        if (virt != nullptr) {
            for (const auto& part : virt->partitions()) {
                auto* client = dynamic_cast<BlkClient*>(&rt->component(part.client));
                for (std::uint64_t lba = 0; lba < part.length; ++lba) {
                    covered[part.start_lba + lba] = true;
                    if (client == nullptr) continue;
                    const auto want = client->expected_block(lba);
                    if (want && *want != disk->block(part.start_lba + lba)) {
                        res.isolation_problems.push_back(part.client + " block " + std::to_string(lba) +
                                                         " differs from the oracle");
                    }
                }
            }
        }
        const std::vector<std::uint8_t> zero(disk->spec().block_size, 0);
        for (std::uint64_t lba = 0; lba < covered.size(); ++lba) {
            if (!covered[lba] && disk->block(lba) != zero) {
                res.isolation_problems.push_back("unpartitioned block " + std::to_string(lba) +
                                                 " was written");
            }
        }
    }
    return res;
}

void write_storage_csv(std::ostream& out, const StorageResult& r, int cores) {
    out << "time_s,iops,mbytes_per_s,lat_p50_us,lat_p99_us";
    for (int c = 0; c < cores; ++c) out << ",util_core" << c;
    out << "\n";
    for (const auto& row : r.samples) {
        out << format_fixed(row.time_s, 3) << "," << format_fixed(row.iops, 3) << ","
            << format_fixed(row.mbytes_per_s, 3) << "," << na_or(row.lat_p50_us, 3) << ","
            << na_or(row.lat_p99_us, 3);
        for (int c = 0; c < cores; ++c) {
            const double u = static_cast<std::size_t>(c) < row.util.size() ? row.util[static_cast<std::size_t>(c)] : 0.0;
            out << "," << format_fixed(u, 6);
        }
        out << "\n";
    }
}

} // namespace modio
