#include "modio/net.hpp"

#include <algorithm>
#include <cmath>

namespace modio {

namespace frame {

std::uint64_t get_mac(std::span<const std::uint8_t> f, std::size_t at) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        v = (v << 8) | f[at + i];
    }
    return v;
}

void put_mac(std::span<std::uint8_t> f, std::size_t at, std::uint64_t mac) {
    for (std::size_t i = 0; i < 6; ++i) {
        f[at + i] = static_cast<std::uint8_t>(mac >> (8 * (5 - i)));
    }
}

std::uint64_t get_u64(std::span<const std::uint8_t> f, std::size_t at) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        v = (v << 8) | f[at + i];
    }
    return v;
}

void put_u64(std::span<std::uint8_t> f, std::size_t at, std::uint64_t v) {
    for (std::size_t i = 0; i < 8; ++i) {
        f[at + i] = static_cast<std::uint8_t>(v >> (8 * (7 - i)));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> f, std::size_t at) {
    return (std::uint32_t{f[at]} << 24) | (std::uint32_t{f[at + 1]} << 16) |
           (std::uint32_t{f[at + 2]} << 8) | f[at + 3];
}

void put_u32(std::span<std::uint8_t> f, std::size_t at, std::uint32_t v) {
    for (std::size_t i = 0; i < 4; ++i) {
        f[at + i] = static_cast<std::uint8_t>(v >> (8 * (3 - i)));
    }
}

std::uint16_t get_u16(std::span<const std::uint8_t> f, std::size_t at) {
    return static_cast<std::uint16_t>((f[at] << 8) | f[at + 1]);
}

void put_u16(std::span<std::uint8_t> f, std::size_t at, std::uint16_t v) {
    f[at] = static_cast<std::uint8_t>(v >> 8);
    f[at + 1] = static_cast<std::uint8_t>(v);
}

namespace {
std::uint8_t pattern(std::uint64_t id, std::size_t i) {
    return static_cast<std::uint8_t>(id * 0x9e37u + i * 7u);
}
} // namespace

void build(std::span<std::uint8_t> f, std::uint64_t dst, std::uint64_t src, std::uint16_t type,
           std::uint64_t id, Time stamp) {
    put_mac(f, kDst, dst);
    put_mac(f, kSrc, src);
    put_u16(f, kType, type);
    put_u64(f, kId, id);
    put_u64(f, kStamp, static_cast<std::uint64_t>(stamp.as_ps()));
    for (std::size_t i = kBody; i < f.size(); ++i) {
        f[i] = pattern(id, i);
    }
}

bool body_intact(std::span<const std::uint8_t> f) {
    if (f.size() < kBody) {
        return false;
    }
    const auto id = get_u64(f, kId);
    for (std::size_t i = kBody; i < f.size(); ++i) {
        if (f[i] != pattern(id, i)) {
            return false;
        }
    }
    return true;
}

void build_arp(std::span<std::uint8_t> f, std::uint64_t dst, std::uint64_t src, std::uint16_t op,
               std::uint64_t sender_mac, std::uint32_t sender_ip, std::uint32_t target_ip,
               std::uint64_t id, Time stamp) {
    build(f, dst, src, kArp, id, stamp);
    put_u16(f, kArpOp, op);
    put_mac(f, kArpSenderMac, sender_mac);
    put_u32(f, kArpSenderIp, sender_ip);
    put_u32(f, kArpTargetIp, target_ip);
}

Time wire_time(std::uint32_t length, std::uint32_t overhead, double line_rate_mbps) {
    const double bits = 8.0 * (length + overhead);
    // ps = bits / (Mb/s * 1e6) * 1e12
    return Time::ps(static_cast<std::int64_t>(std::llround(bits * 1e6 / line_rate_mbps)));
}

} // namespace frame

// ------------------------------------------------------------------ MacTable

MacTable::MacTable(const std::vector<MacEntry>& entries) : entries_(entries) {}

std::optional<std::size_t> MacTable::find_mac(std::uint64_t mac) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].mac == mac) {
            return i;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> MacTable::find_ip(std::uint32_t ip) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].ip == ip) {
            return i;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> MacTable::find_owner(const std::string& owner) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].owner == owner) {
            return i;
        }
    }
    return std::nullopt;
}

// ------------------------------------------------------------- LoadGenerator

namespace {
constexpr std::uint64_t kUnknownMac = 0x02'ff'ff'ff'ff'feull;
constexpr std::uint32_t kUnknownIp = 0x0a'ff'ff'fe;
// Offered traffic that would wait longer than this for the input link is
// discarded at the source.
constexpr Time kMaxLinkBacklog = Time::ms(1);
} // namespace

LoadGenerator::LoadGenerator(const Scenario& s, std::uint64_t seed)
    : macs_(s.mac_table), frame_bytes_(s.workload.frame_bytes),
      overhead_(s.nic ? s.nic->frame_overhead_bytes : 20),
      line_rate_(s.nic ? s.nic->line_rate_mbps : 1000.0), gen_mac_(s.workload.generator_mac),
      gen_ip_(s.workload.generator_ip), jitter_(s.workload.arrival == ArrivalMode::jitter),
      jitter_fraction_(s.workload.jitter_fraction), rng_(seed) {
    for (const auto& fs : s.workload.flows) {
        Flow f;
        f.spec = fs;
        f.next_nominal = Time::seconds(fs.start_s);
        if (fs.dst == "broadcast") {
            f.dst_mac = frame::kBroadcastMac;
            f.broadcast = true;
        } else if (fs.dst == "unknown") {
            f.dst_mac = kUnknownMac;
        } else if (fs.dst.rfind("arp:", 0) == 0) {
            f.dst_mac = frame::kBroadcastMac;
            f.broadcast = true;
            f.type = frame::kArp;
            const auto target = fs.dst.substr(4);
            const auto idx = macs_.find_owner(target);
            f.target_ip = idx ? macs_.at(*idx).ip : kUnknownIp;
        } else {
            const auto idx = macs_.find_owner(fs.dst);
            if (!idx) {
                throw ConfigError("flow destination '" + fs.dst + "' has no MAC");
            }
            f.dst_mac = macs_.at(*idx).mac;
        }
        flows_.push_back(f);
    }
    flows_stats_.resize(flows_.size());
    echo_count_.push_back(0);
    is_broadcast_.push_back(0);
    injected_at_.push_back(Time{});
    schedule();
}

Time LoadGenerator::wire(std::uint32_t len) const {
    return frame::wire_time(len, overhead_, line_rate_);
}

double LoadGenerator::rate_at(const Flow& f, Time t) const {
    const auto& s = f.spec;
    if (!s.ramp_to_mbps) {
        return s.rate_mbps;
    }
    const double x = t.as_seconds();
    if (x <= s.ramp_start_s) {
        return s.rate_mbps;
    }
    if (x >= s.ramp_end_s) {
        return *s.ramp_to_mbps;
    }
    const double a = (x - s.ramp_start_s) / (s.ramp_end_s - s.ramp_start_s);
    return s.rate_mbps + a * (*s.ramp_to_mbps - s.rate_mbps);
}

void LoadGenerator::schedule() {
    next_.reset();
    for (;;) {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < flows_.size(); ++i) {
            auto& f = flows_[i];
            if (f.done) {
                continue;
            }
            const Time stop = f.spec.stop_s ? std::min(stop_, Time::seconds(*f.spec.stop_s)) : stop_;
            if (f.next_nominal >= stop) {
                f.done = true;
                continue;
            }
            if (!best || f.next_nominal < flows_[*best].next_nominal) {
                best = i;
            }
        }
        if (!best) {
            return;
        }
        auto& f = flows_[*best];
        const double rate = rate_at(f, f.next_nominal);
        if (rate <= 0.0) {
            f.next_nominal += Time::ms(1);
            continue;
        }
        const Time start = std::max(f.next_nominal, link_free_);
        if (start - f.next_nominal > kMaxLinkBacklog) {
            ++flows_stats_[*best].overflow;
            const double secs = frame_bytes_ * 8.0 / (rate * 1e6);
            f.next_nominal += Time::seconds(secs);
            continue;
        }
        next_ = Pending{*best, start, start + wire(frame_bytes_)};
        return;
    }
}

std::optional<Time> LoadGenerator::next_arrival() const {
    if (!next_) {
        return std::nullopt;
    }
    return next_->arrival;
}

std::uint32_t LoadGenerator::emit(std::span<std::uint8_t> dst) {
    const auto p = *next_;
    auto& f = flows_[p.flow];
    const auto id = next_id_++;
    const auto len = std::min<std::uint32_t>(frame_bytes_, static_cast<std::uint32_t>(dst.size()));
    auto out = dst.subspan(0, len);
    if (f.type == frame::kArp) {
        frame::build_arp(out, f.dst_mac, gen_mac_, 1, gen_mac_, gen_ip_, f.target_ip, id, p.start);
    } else {
        frame::build(out, f.dst_mac, gen_mac_, f.type, id, p.start);
    }
    echo_count_.push_back(0);
    is_broadcast_.push_back(f.broadcast ? 1 : 0);
    injected_at_.push_back(p.arrival);
    ++flows_stats_[p.flow].injected;
    flows_stats_[p.flow].injected_bytes += len;

    link_free_ = p.arrival;
    double secs = frame_bytes_ * 8.0 / (rate_at(f, f.next_nominal) * 1e6);
    if (jitter_) {
        std::uniform_real_distribution<double> u(1.0 - jitter_fraction_, 1.0 + jitter_fraction_);
        secs *= u(rng_);
    }
    f.next_nominal += Time::seconds(secs);
    schedule();
    return len;
}

void LoadGenerator::drop_next() {
    const auto p = *next_;
    auto& f = flows_[p.flow];
    ++next_id_;
    echo_count_.push_back(0);
    is_broadcast_.push_back(f.broadcast ? 1 : 0);
    injected_at_.push_back(p.arrival);
    ++flows_stats_[p.flow].injected;
    flows_stats_[p.flow].injected_bytes += frame_bytes_;
    ++flows_stats_[p.flow].nic_drops;

    link_free_ = p.arrival;
    double secs = frame_bytes_ * 8.0 / (rate_at(f, f.next_nominal) * 1e6);
    if (jitter_) {
        std::uniform_real_distribution<double> u(1.0 - jitter_fraction_, 1.0 + jitter_fraction_);
        secs *= u(rng_);
    }
    f.next_nominal += Time::seconds(secs);
    schedule();
}

std::uint64_t LoadGenerator::injected() const {
    std::uint64_t n = 0;
    for (const auto& s : flows_stats_) {
        n += s.injected;
    }
    return n;
}

std::uint64_t LoadGenerator::nic_drops() const {
    std::uint64_t n = 0;
    for (const auto& s : flows_stats_) {
        n += s.nic_drops;
    }
    return n;
}

void LoadGenerator::on_egress(std::span<const std::uint8_t> f, Time t) {
    if (f.size() < frame::kBody) {
        ++unknown_egress_;
        return;
    }
    const auto src_idx = macs_.find_mac(frame::src(f));
    const std::int32_t src = src_idx ? static_cast<std::int32_t>(*src_idx) : -1;
    egress_.push_back({t, static_cast<std::uint32_t>(f.size()), src});

    if (frame::ethertype(f) == frame::kArp && f.size() >= frame::kArpTargetIp + 4 &&
        frame::get_u16(f, frame::kArpOp) == 2) {
        arp_replies_.emplace_back(frame::get_u32(f, frame::kArpSenderIp),
                                  frame::get_mac(f, frame::kArpSenderMac));
        return;
    }
    const auto id = frame::get_u64(f, frame::kId);
    if ((id & frame::kLocalIdBit) != 0) {
        ++local_frames_;
        return;
    }
    if (id == 0 || id >= next_id_) {
        ++unknown_egress_;
        return;
    }
    if (echo_count_[id] < 255) {
        ++echo_count_[id];
    }
    if (is_broadcast_[id] == 0 && echo_count_[id] > 1) {
        ++duplicates_;
    }
    if (!frame::body_intact(f)) {
        ++corrupt_;
    }
    ++echoed_;
    const Time stamp = Time::ps(static_cast<std::int64_t>(frame::get_u64(f, frame::kStamp)));
    rtt_.push_back({t, t - stamp, src});
}

// ------------------------------------------------------------------ NicModel

NicModel::NicModel(Runtime& rt, const NicSpec& spec, DataRegion& rx, DataRegion& tx,
                   LoadGenerator* gen, std::size_t driver)
    : rt_(rt), spec_(spec), rx_(rx), tx_(tx), gen_(gen), driver_(driver) {}

Time NicModel::wire_time(std::uint32_t length) const {
    return frame::wire_time(length, spec_.frame_overhead_bytes, spec_.line_rate_mbps);
}

std::optional<Time> NicModel::next_event() const {
    std::optional<Time> t;
    if (!tx_ring_.empty()) {
        t = tx_ring_.front().done;
    }
    if (gen_ != nullptr) {
        auto a = gen_->next_arrival();
        if (a && (!t || *a < *t)) {
            t = a;
        }
    }
    return t;
}

void NicModel::advance(Time t, bool raise_irq) {
    for (;;) {
        std::optional<Time> tc;
        if (!tx_ring_.empty() && tx_ring_.front().done <= t) {
            tc = tx_ring_.front().done;
        }
        std::optional<Time> ta;
        if (gen_ != nullptr) {
            auto a = gen_->next_arrival();
            if (a && *a <= t) {
                ta = a;
            }
        }
        if (!tc && !ta) {
            return;
        }
        if (tc && (!ta || *tc <= *ta)) {
            const auto slot = tx_ring_.front();
            tx_ring_.pop_front();
            ++tx_frames_;
            tx_bytes_ += slot.d.length;
            if (gen_ != nullptr) {
                gen_->on_egress(tx_.slot_bytes(slot.d.offset, slot.d.length), slot.done);
            }
            tx_done_.push_back(slot.d);
            if (raise_irq) {
                rt_.raise_irq(driver_, slot.done);
            }
        } else {
            if (rx_ring_.empty()) {
                gen_->drop_next();
                ++rx_dropped_;
                continue;
            }
            auto d = rx_ring_.front();
            rx_ring_.pop_front();
            d.length = gen_->emit(rx_.slot_bytes(d.offset, rx_.slot_size()));
            d.flags = 0;
            rx_done_.push_back(d);
            ++rx_frames_;
            if (raise_irq) {
                rt_.raise_irq(driver_, *ta);
            }
        }
    }
}

bool NicModel::rx_post(const BufferDescriptor& d) {
    if (rx_space() == 0) {
        return false;
    }
    rx_ring_.push_back(d);
    return true;
}

std::optional<BufferDescriptor> NicModel::rx_take() {
    if (rx_done_.empty()) {
        return std::nullopt;
    }
    auto d = rx_done_.front();
    rx_done_.pop_front();
    return d;
}

bool NicModel::tx_post(const BufferDescriptor& d, Time now) {
    if (tx_space() == 0) {
        return false;
    }
    const Time start = std::max(now, tx_wire_free_);
    tx_wire_free_ = start + wire_time(d.length);
    tx_ring_.push_back({d, tx_wire_free_});
    return true;
}

std::optional<BufferDescriptor> NicModel::tx_take() {
    if (tx_done_.empty()) {
        return std::nullopt;
    }
    auto d = tx_done_.front();
    tx_done_.pop_front();
    return d;
}

void NicModel::census(Census& c) const {
    for (const auto& d : rx_ring_) {
        c.hold(rx_.name(), d.offset, "nic:rx_ring");
    }
    for (const auto& d : rx_done_) {
        c.hold(rx_.name(), d.offset, "nic:rx_done");
    }
    for (const auto& s : tx_ring_) {
        c.hold(tx_.name(), s.d.offset, "nic:tx_ring");
    }
    for (const auto& d : tx_done_) {
        c.hold(tx_.name(), d.offset, "nic:tx_done");
    }
}

void NicModel::add_counters(std::map<std::string, std::uint64_t>& out) const {
    out["nic.rx_frames"] = rx_frames_;
    out["nic.rx_dropped"] = rx_dropped_;
    out["nic.tx_frames"] = tx_frames_;
    out["nic.tx_bytes"] = tx_bytes_;
    if (gen_ != nullptr) {
        out["gen.injected"] = gen_->injected();
        out["gen.echoed"] = gen_->echoed();
        out["gen.duplicates"] = gen_->duplicates();
        out["gen.corrupt"] = gen_->corrupt();
        out["gen.local_frames"] = gen_->local_frames();
        out["gen.unknown_egress"] = gen_->unknown_egress();
        out["gen.arp_replies"] = gen_->arp_replies().size();
    }
}

} // namespace modio
