#include <algorithm>
#include <cstring>

#include "modio/net.hpp"

namespace modio {

namespace {

std::vector<std::string> string_list(const nlohmann::json& params, const char* key,
                                     const std::string& who) {
    if (!params.contains(key)) {
        throw ConfigError(who + ": missing param '" + key + "'");
    }
    return params.at(key).get<std::vector<std::string>>();
}

void reject_unknown(const nlohmann::json& params, std::initializer_list<const char*> allowed,
                    const std::string& who) {
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* a) { return it.key() == a; })) {
            throw ConfigError(who + ": unknown param '" + it.key() + "'");
        }
    }
}

std::string idx(const char* base, std::size_t i) {
    return std::string(base) + "[" + std::to_string(i) + "]";
}

} // namespace

// ----------------------------------------------------------------- EthDriver

EthDriver::EthDriver(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "eth_driver") {
    reject_unknown(params, {}, this->name());
}

void EthDriver::attach(Binder& b) {
    nic_ = &b.nic();
    rx_avail_ = b.producer<BufferDescriptor>("rx_avail");
    rx_free_ = b.consumer<BufferDescriptor>("rx_free");
    tx_avail_ = b.consumer<BufferDescriptor>("tx_avail");
    tx_free_ = b.producer<BufferDescriptor>("tx_free");
}

void EthDriver::init(Context& ctx) { run(ctx); }

void EthDriver::notified(Context& ctx, ChannelId) { run(ctx); }

void EthDriver::run(Context& ctx) {
    ctx.charge_invocation();
    std::uint64_t packets = 0;
    for (;;) {
        // Device work that arrived while we were running is picked up here.
        nic_->advance(ctx.now(), false);
        std::uint64_t n = 0;
        while (!rx_avail_.full()) {
            auto d = nic_->rx_take();
            if (!d) break;
            rx_avail_.push(ctx, *d);
            ctx.charge_items(1);
            ++n;
            ++packets;
            bump("rx_packets");
        }
        while (nic_->rx_space() > 0) {
            auto d = rx_free_.pop(ctx);
            if (!d) break;
            nic_->rx_post(*d);
            ctx.charge_polls(1);
            ++n;
        }
        while (nic_->tx_space() > 0) {
            auto d = tx_avail_.pop(ctx);
            if (!d) break;
            nic_->tx_post(*d, ctx.now());
            ctx.charge_items(1);
            ++n;
            ++packets;
            bump("tx_packets");
        }
        while (!tx_free_.full()) {
            auto d = nic_->tx_take();
            if (!d) break;
            tx_free_.push(ctx, *d);
            ctx.charge_polls(1);
            ++n;
        }
        if (n > 0) {
            continue;
        }
        bool more = false;
        if (nic_->tx_space() > 0 && !tx_avail_.request_signal_if_empty()) more = true;
        if (nic_->rx_space() > 0 && !rx_free_.request_signal_if_empty()) more = true;
        if (!nic_->rx_done_empty() && !rx_avail_.request_signal_if_full()) more = true;
        if (!nic_->tx_done_empty() && !tx_free_.request_signal_if_full()) more = true;
        if (!more) {
            break;
        }
    }
    ctx.record_batch(packets);
}

// -------------------------------------------------------------------- RxVirt

RxVirt::RxVirt(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "rx_virt") {
    reject_unknown(params, {"clients", "broadcast", "arp_client"}, this->name());
    client_names_ = string_list(params, "clients", this->name());
    const auto scheme = params.value("broadcast", std::string("refcount"));
    if (scheme == "refcount") {
        scheme_ = BroadcastScheme::refcount;
    } else if (scheme == "arp") {
        scheme_ = BroadcastScheme::arp;
    } else if (scheme == "drop") {
        scheme_ = BroadcastScheme::drop;
    } else {
        throw ConfigError(this->name() + ": unknown broadcast scheme '" + scheme + "'");
    }
    if (params.contains("arp_client")) {
        const auto arp = params.at("arp_client").get<std::string>();
        auto it = std::find(client_names_.begin(), client_names_.end(), arp);
        if (it == client_names_.end()) {
            throw ConfigError(this->name() + ": arp_client '" + arp + "' is not a client");
        }
        arp_index_ = static_cast<std::size_t>(it - client_names_.begin());
    }
    if (scheme_ == BroadcastScheme::arp && !arp_index_) {
        throw ConfigError(this->name() + ": broadcast scheme 'arp' needs an arp_client");
    }
}

void RxVirt::attach(Binder& b) {
    view_ = b.view("rx");
    region_name_ = view_.region()->name();
    drv_avail_ = b.consumer<BufferDescriptor>("drv_rx_avail");
    drv_free_ = b.producer<BufferDescriptor>("drv_rx_free");
    if (b.indexed_count("cli_rx_avail") != client_names_.size()) {
        throw WiringError(name() + ": " + std::to_string(client_names_.size()) +
                          " clients but " + std::to_string(b.indexed_count("cli_rx_avail")) +
                          " cli_rx_avail endpoints");
    }
    for (std::size_t i = 0; i < client_names_.size(); ++i) {
        const auto* m = b.scenario().find_mac(client_names_[i]);
        if (m == nullptr) {
            throw WiringError(name() + ": client '" + client_names_[i] + "' has no MAC");
        }
        client_macs_.push_back(m->mac);
        cli_avail_.push_back(b.producer<BufferDescriptor>(idx("cli_rx_avail", i)));
        cli_free_.push_back(b.consumer<BufferDescriptor>(idx("cli_rx_free", i)));
    }
}

void RxVirt::give_back(Context& ctx, const BufferDescriptor& d) {
    if (sanitize(d, view_.window()) != SanitizeResult::ok) {
        bump("invalid_descriptors");
        return;
    }
    if (d.broadcast()) {
        auto it = bcast_.find(d.offset);
        if (it == bcast_.end()) {
            bump("bad_returns");
            return;
        }
        if (--it->second > 0) {
            return;
        }
        bcast_.erase(it);
    }
    drv_free_.push(ctx, BufferDescriptor{d.offset, 0, 0});
}

void RxVirt::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    std::uint64_t packets = 0;
    const auto n_clients = client_names_.size();
    for (;;) {
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < n_clients; ++i) {
            ctx.charge_polls(1);
            while (auto d = cli_free_[i].pop(ctx)) {
                give_back(ctx, *d);
                ctx.charge_polls(1);
                ++n;
            }
        }
        while (auto got = drv_avail_.pop(ctx)) {
            const auto d = *got;
            ++n;
            ++packets;
            ctx.charge_items(1);
            const auto hdr = view_.header(d.offset);
            const auto dst = frame::dst(hdr);
            if (dst == frame::kBroadcastMac) {
                bump("broadcast");
                if (scheme_ == BroadcastScheme::refcount) {
                    auto& refs = bcast_[d.offset];
                    refs = 0;
                    for (std::size_t i = 0; i < n_clients; ++i) {
                        if (cli_avail_[i].full()) {
                            bump("broadcast_skipped");
                            continue;
                        }
                        ++refs;
                        cli_avail_[i].push(
                            ctx, BufferDescriptor{d.offset, d.length, BufferDescriptor::kBroadcast});
                    }
                    if (refs == 0) {
                        bcast_.erase(d.offset);
                        drv_free_.push(ctx, BufferDescriptor{d.offset, 0, 0});
                    }
                } else if (scheme_ == BroadcastScheme::arp &&
                           frame::ethertype(hdr) == frame::kArp && !cli_avail_[*arp_index_].full()) {
                    cli_avail_[*arp_index_].push(ctx, d);
                } else {
                    bump("broadcast_dropped");
                    drv_free_.push(ctx, BufferDescriptor{d.offset, 0, 0});
                }
                continue;
            }
            auto it = std::find(client_macs_.begin(), client_macs_.end(), dst);
            if (it == client_macs_.end()) {
                bump("unknown_mac_drops");
                drv_free_.push(ctx, BufferDescriptor{d.offset, 0, 0});
                continue;
            }
            auto& q = cli_avail_[static_cast<std::size_t>(it - client_macs_.begin())];
            if (q.full()) {
                bump("overflow_drops");
                drv_free_.push(ctx, BufferDescriptor{d.offset, 0, 0});
                continue;
            }
            q.push(ctx, d);
        }
        if (n > 0) {
            continue;
        }
        bool more = !drv_avail_.request_signal_if_empty();
        for (auto& q : cli_free_) {
            if (!q.request_signal_if_empty()) more = true;
        }
        if (!more) {
            break;
        }
    }
    ctx.record_batch(packets);
}

void RxVirt::census(Census& c) const {
    for (const auto& [off, refs] : bcast_) {
        c.hold(region_name_, off, "broadcast:" + std::to_string(refs));
    }
}

// -------------------------------------------------------------------- TxVirt

TxVirt::TxVirt(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "tx_virt") {
    reject_unknown(params,
                   {"clients", "policy", "monitor_ms", "trigger", "swapper", "log_service",
                    "region"},
                   this->name());
    client_names_ = string_list(params, "clients", this->name());
    policy_config_ = params.value("policy", nlohmann::json{{"variant", "round_robin"}});
    policy_ = make_policy(policy_config_, client_names_.size());
    monitor_window_ = Time::seconds(params.value("monitor_ms", 10.0) * 1e-3);
    monitor_ = BandwidthMonitor(client_names_.size(), monitor_window_);
    if (params.contains("trigger")) {
        const auto& t = params.at("trigger");
        SwapTrigger trig;
        trig.client = t.value("client", std::size_t{1});
        trig.threshold_mbps = t.value("threshold_mbps", 500.0);
        if (trig.client >= client_names_.size()) {
            throw ConfigError(this->name() + ": trigger client out of range");
        }
        trigger_ = trig;
    }
    swapper_ = params.value("swapper", std::string());
    log_service_ = params.value("log_service", false);
    sent_.assign(client_names_.size(), 0);
    head_.assign(client_names_.size(), 0);
}

void TxVirt::attach(Binder& b) {
    std::string region = b.spec().params.value("region", std::string());
    if (region.empty()) {
        if (!b.scenario().nic) {
            throw WiringError(name() + ": no Tx region (no NIC and no 'region' param)");
        }
        region = b.scenario().nic->tx_region;
    }
    drv_avail_ = b.producer<BufferDescriptor>("drv_tx_avail");
    drv_free_ = b.consumer<BufferDescriptor>("drv_tx_free");
    if (b.indexed_count("cli_tx_avail") != client_names_.size()) {
        throw WiringError(name() + ": " + std::to_string(client_names_.size()) +
                          " clients but " + std::to_string(b.indexed_count("cli_tx_avail")) +
                          " cli_tx_avail endpoints");
    }
    for (std::size_t i = 0; i < client_names_.size(); ++i) {
        windows_.push_back(b.subregion(region, client_names_[i]));
        by_base_.emplace_back(windows_.back().base, i);
        cli_avail_.push_back(b.consumer<BufferDescriptor>(idx("cli_tx_avail", i)));
        cli_free_.push_back(b.producer<BufferDescriptor>(idx("cli_tx_free", i)));
    }
    std::sort(by_base_.begin(), by_base_.end());
    if (!swapper_.empty()) {
        swapper_channel_ = b.channel_to(swapper_);
    }
}

std::optional<std::size_t> TxVirt::owner_of(std::uint64_t global) const {
    auto it = std::upper_bound(by_base_.begin(), by_base_.end(),
                               std::make_pair(global, std::numeric_limits<std::size_t>::max()));
    if (it == by_base_.begin()) {
        return std::nullopt;
    }
    --it;
    if (!windows_[it->second].contains_global(global)) {
        return std::nullopt;
    }
    return it->second;
}

void TxVirt::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    run(ctx);
}

void TxVirt::run(Context& ctx) {
    const auto n_clients = client_names_.size();
    std::uint64_t packets = 0;
    auto scan = [&] {
        for (std::size_t i = 0; i < n_clients; ++i) {
            const auto* p = cli_avail_[i].peek();
            head_[i] = p == nullptr ? 0 : std::max<std::uint32_t>(1, p->length);
        }
        ctx.charge_polls(n_clients);
        polls_ += n_clients;
    };
    for (;;) {
        std::uint64_t n = 0;
        while (auto d = drv_free_.pop(ctx)) {
            ++n;
            ctx.charge_polls(1);
            const auto owner = owner_of(d->offset);
            if (!owner) {
                bump("unroutable_returns");
                continue;
            }
            cli_free_[*owner].push(ctx,
                                   BufferDescriptor{d->offset - windows_[*owner].base, 0, 0});
        }
        while (!drv_avail_.full()) {
            scan();
            const auto pick = policy_->pick(head_, ctx.now());
            if (!pick) {
                break;
            }
            const auto i = *pick;
            const auto d = *cli_avail_[i].pop(ctx);
            ++n;
            ++packets;
            ctx.charge_items(1);
            if (sanitize(d, windows_[i]) != SanitizeResult::ok) {
                bump("invalid_descriptors");
                continue;
            }
            drv_avail_.push(ctx, BufferDescriptor{d.offset + windows_[i].base, d.length, 0});
            policy_->on_sent(i, d.length, ctx.now());
            ++sent_[i];
            bump("sent");
            monitor_.record(i, d.length, ctx.now());
            if (log_service_) {
                log_.push_back(static_cast<std::uint32_t>(i));
            }
            if (trigger_ && trigger_->client == i &&
                trigger_->check(monitor_.mbps(i, ctx.now()))) {
                triggered_at_ = ctx.now();
                bump("swap_triggered");
                if (swapper_channel_) {
                    ctx.notify(*swapper_channel_);
                }
            }
        }
        if (n > 0) {
            continue;
        }
        bool more = !drv_free_.request_signal_if_empty();
        if (drv_avail_.full()) {
            if (!drv_avail_.request_signal_if_full()) more = true;
        } else {
            for (auto& q : cli_avail_) {
                q.request_signal_if_empty();
            }
            // Clients that are backlogged but held back by the policy need a
            // timer; queue transitions will not wake us for them.
            scan();
            if (policy_->pick(head_, ctx.now())) {
                more = true;
            } else if (auto t = policy_->next_eligible(head_, ctx.now())) {
                ctx.set_timeout(*t - ctx.now());
            }
        }
        if (!more) {
            break;
        }
    }
    ctx.record_batch(packets);
}

SwapEvent TxVirt::swap_policy(Context& ctx, std::unique_ptr<TxPolicy> next) {
    SwapEvent e;
    e.fired = triggered_at_.value_or(ctx.now());
    e.applied = ctx.now();
    e.duration = ctx.costs().swap_cost;
    e.from = policy_->name();
    e.to = next->name();
    for (const auto& q : cli_avail_) {
        e.in_flight += q.size();
    }
    e.in_flight += drv_avail_.size();
    ctx.charge_time(e.duration);
    policy_ = std::move(next);
    swaps_.push_back(e);
    bump("swaps");
    return e;
}

void TxVirt::reset_private() {
    policy_->reset();
    monitor_.reset();
}

// -------------------------------------------------------------------- Copier

Copier::Copier(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "copier") {
    reject_unknown(params, {}, this->name());
}

void Copier::attach(Binder& b) {
    src_ = b.view("src");
    dst_ = b.view("dst");
    up_avail_ = b.consumer<BufferDescriptor>("up_avail");
    up_free_ = b.producer<BufferDescriptor>("up_free");
    cli_avail_ = b.producer<BufferDescriptor>("cli_avail");
    cli_free_ = b.consumer<BufferDescriptor>("cli_free");
}

void Copier::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    std::uint64_t packets = 0;
    for (;;) {
        std::uint64_t n = 0;
        // Take an upstream buffer only when a client slot is free, so nothing
        // is ever held across handler boundaries.
        while (up_avail_.peek() != nullptr && !cli_free_.empty() && !cli_avail_.full()) {
            const auto up = *up_avail_.pop(ctx);
            const auto slot = *cli_free_.pop(ctx);
            const auto len = std::min(up.length, dst_.window().slot_size);
            auto in = src_.read(up.offset, len);
            auto out = dst_.write(slot.offset, len);
            std::memcpy(out.data(), in.data(), len);
            ctx.charge_copy(len);
            ctx.charge_items(1);
            cli_avail_.push(ctx, BufferDescriptor{slot.offset, len, 0});
            up_free_.push(ctx, up);
            ++n;
            ++packets;
        }
        if (n > 0) {
            continue;
        }
        bool more = false;
        if (!up_avail_.request_signal_if_empty()) {
            if (!cli_free_.request_signal_if_empty()) {
                more = !cli_avail_.request_signal_if_full();
            }
        }
        if (!more) {
            break;
        }
    }
    ctx.record_batch(packets);
}

// ------------------------------------------------------------- NullForwarder

NullForwarder::NullForwarder(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "null_fwd") {
    reject_unknown(params, {}, this->name());
}

void NullForwarder::attach(Binder& b) {
    in_avail_ = b.consumer<BufferDescriptor>("in_avail");
    in_free_ = b.producer<BufferDescriptor>("in_free");
    out_avail_ = b.producer<BufferDescriptor>("out_avail");
    out_free_ = b.consumer<BufferDescriptor>("out_free");
}

void NullForwarder::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    std::uint64_t packets = 0;
    for (;;) {
        std::uint64_t n = 0;
        while (!out_avail_.full()) {
            auto d = in_avail_.pop(ctx);
            if (!d) break;
            out_avail_.push(ctx, *d);
            ctx.charge_items(1);
            ++n;
            ++packets;
        }
        while (!in_free_.full()) {
            auto d = out_free_.pop(ctx);
            if (!d) break;
            in_free_.push(ctx, *d);
            ctx.charge_items(1);
            ++n;
        }
        if (n > 0) {
            continue;
        }
        bool more = false;
        if (!out_avail_.full() && !in_avail_.request_signal_if_empty()) more = true;
        if (!in_free_.full() && !out_free_.request_signal_if_empty()) more = true;
        if (!in_avail_.empty() && !out_avail_.request_signal_if_full()) more = true;
        if (!out_free_.empty() && !in_free_.request_signal_if_full()) more = true;
        if (!more) {
            break;
        }
    }
    ctx.record_batch(packets);
}

// ---------------------------------------------------------------- EchoClient

EchoClient::EchoClient(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "echo_client") {
    reject_unknown(params, {}, this->name());
}

void EchoClient::attach(Binder& b) {
    const auto* m = b.scenario().find_mac(name());
    if (m == nullptr) {
        throw WiringError(name() + ": no MAC table entry");
    }
    mac_ = m->mac;
    ip_ = m->ip;
    rx_ = b.view("rx");
    tx_ = b.view("tx");
    scratch_.resize(tx_.window().slot_size);
    rx_avail_ = b.consumer<BufferDescriptor>("rx_avail");
    rx_free_ = b.producer<BufferDescriptor>("rx_free");
    tx_avail_ = b.producer<BufferDescriptor>("tx_avail");
    tx_free_ = b.consumer<BufferDescriptor>("tx_free");
}

std::uint32_t EchoClient::respond(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
    const auto len = static_cast<std::uint32_t>(std::min(in.size(), out.size()));
    std::memcpy(out.data(), in.data(), len);
    frame::put_mac(out, frame::kDst, frame::src(in));
    frame::put_mac(out, frame::kSrc, mac_);
    return len;
}

void EchoClient::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    std::uint64_t packets = 0;
    for (;;) {
        std::uint64_t n = 0;
        while (auto d = rx_avail_.pop(ctx)) {
            ++n;
            ++packets;
            ctx.charge_items(1);
            bump("rx_frames");
            if (d->length >= frame::kBody) {
                const auto len = respond(rx_.read(d->offset, d->length), scratch_);
                if (len > 0) {
                    if (tx_free_.empty() || tx_avail_.full()) {
                        bump("tx_drops");
                    } else {
                        const auto slot = *tx_free_.pop(ctx);
                        auto out = tx_.write(slot.offset, len);
                        std::memcpy(out.data(), scratch_.data(), len);
                        ctx.charge_copy(len);
                        tx_avail_.push(ctx, BufferDescriptor{slot.offset, len, 0});
                        bump("tx_frames");
                    }
                }
            } else {
                bump("runts");
            }
            rx_free_.push(ctx, *d);
        }
        if (n > 0) {
            continue;
        }
        if (rx_avail_.request_signal_if_empty()) {
            break;
        }
    }
    ctx.record_batch(packets);
}

// ----------------------------------------------------------------- ArpClient

ArpClient::ArpClient(std::string name, const nlohmann::json& params)
    : EchoClient(std::move(name), params) {}

void ArpClient::attach(Binder& b) {
    EchoClient::attach(b);
    table_ = MacTable(b.scenario().mac_table);
}

std::uint32_t ArpClient::respond(std::span<const std::uint8_t> in, std::span<std::uint8_t> out) {
    if (frame::ethertype(in) != frame::kArp || in.size() < frame::kArpTargetIp + 4 ||
        frame::get_u16(in, frame::kArpOp) != 1) {
        bump("broadcast_dropped");
        return 0;
    }
    const auto target = frame::get_u32(in, frame::kArpTargetIp);
    const auto who = table_.find_ip(target);
    if (!who) {
        bump("arp_unknown");
        return 0;
    }
    const auto& entry = table_.at(*who);
    constexpr std::uint32_t kReplyBytes = frame::kMinBytes;
    const Time stamp = Time::ps(static_cast<std::int64_t>(frame::get_u64(in, frame::kStamp)));
    frame::build_arp(out.subspan(0, kReplyBytes), frame::get_mac(in, frame::kArpSenderMac), mac(),
                     2, entry.mac, entry.ip, frame::get_u32(in, frame::kArpSenderIp),
                     frame::kLocalIdBit | frame::get_u64(in, frame::kId), stamp);
    bump("arp_replies");
    return kReplyBytes;
}

// ------------------------------------------------------------------ TxSource

TxSource::TxSource(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "tx_source") {
    reject_unknown(params, {"rate_mbps", "frame_bytes", "dst"}, this->name());
    if (params.contains("rate_mbps")) {
        rate_mbps_ = params.at("rate_mbps").get<double>();
        if (*rate_mbps_ <= 0) {
            throw ConfigError(this->name() + ": rate_mbps must be positive");
        }
    }
    frame_bytes_ = params.value("frame_bytes", 1518u);
    if (frame_bytes_ < frame::kMinBytes || frame_bytes_ > frame::kMaxBytes) {
        throw ConfigError(this->name() + ": frame_bytes out of range");
    }
    if (params.contains("dst")) {
        dst_ = parse_mac(params.at("dst").get<std::string>());
    }
}

void TxSource::attach(Binder& b) {
    if (const auto* m = b.scenario().find_mac(name())) {
        mac_ = m->mac;
    }
    for (std::size_t i = 0; i < b.scenario().components.size(); ++i) {
        if (b.scenario().components[i].name == name()) {
            index_ = i;
        }
    }
    tx_ = b.view("tx");
    tx_avail_ = b.producer<BufferDescriptor>("tx_avail");
    tx_free_ = b.consumer<BufferDescriptor>("tx_free");
}

void TxSource::init(Context& ctx) {
    next_send_ = ctx.now();
    fill(ctx);
}

void TxSource::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    fill(ctx);
}

void TxSource::reset_private() { seq_ = 0; }

void TxSource::fill(Context& ctx) {
    auto send_one = [&]() -> bool {
        if (tx_avail_.full() || tx_free_.empty()) {
            return false;
        }
        const auto slot = *tx_free_.pop(ctx);
        auto out = tx_.write(slot.offset, frame_bytes_);
        const auto id = frame::kLocalIdBit | (index_ << 40) | seq_++;
        frame::build(out, dst_, mac_, frame::kIpv4, id, ctx.now());
        ctx.charge_items(1);
        tx_avail_.push(ctx, BufferDescriptor{slot.offset, frame_bytes_, 0});
        bump("sent");
        return true;
    };
    if (!rate_mbps_) {
        for (;;) {
            while (send_one()) {
            }
            if (tx_avail_.full()) {
                if (tx_avail_.request_signal_if_full()) break;
            } else if (tx_free_.request_signal_if_empty()) {
                break;
            }
        }
        return;
    }
    const Time interval = Time::seconds(frame_bytes_ * 8.0 / (*rate_mbps_ * 1e6));
    while (next_send_ <= ctx.now()) {
        if (!send_one()) {
            bump("drops");
        }
        next_send_ += interval;
    }
    ctx.set_timeout(next_send_ - ctx.now());
}

} // namespace modio
