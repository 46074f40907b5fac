#include "modio/storage.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace modio {

namespace {

void reject_unknown(const nlohmann::json& params, std::initializer_list<const char*> allowed,
                    const std::string& who) {
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (std::none_of(allowed.begin(), allowed.end(),
                         [&](const char* a) { return it.key() == a; })) {
            throw ConfigError(who + ": unknown param '" + it.key() + "'");
        }
    }
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t kUnknownVersion = std::numeric_limits<std::uint64_t>::max();

} // namespace

// ----------------------------------------------------------------- DiskModel

DiskModel::DiskModel(Runtime& rt, const DiskSpec& spec, DataRegion& data, std::size_t driver,
                     std::uint64_t seed)
    : rt_(rt), spec_(spec), data_(data), driver_(driver), rng_(seed) {}

std::optional<Time> DiskModel::next_event() const {
    if (!serving_) {
        return std::nullopt;
    }
    return serving_->second;
}

void DiskModel::submit(const BlockRequest& r, Time now) {
    waiting_.push_back({r, submitted_++});
    if (!serving_) {
        start_next(now);
    }
}

void DiskModel::start_next(Time t) {
    if (waiting_.empty()) {
        return;
    }
    const auto window = std::min<std::size_t>(spec_.reorder_window, waiting_.size());
    const auto k = static_cast<std::size_t>(rng_() % window);
    const auto w = waiting_[k];
    waiting_.erase(waiting_.begin() + static_cast<std::ptrdiff_t>(k));
    const Time service = spec_.fixed_service + spec_.per_block_service * w.r.count;
    serving_ = std::make_pair(w, t + service);
}

void DiskModel::complete(const Waiting& w, Time t) {
    const auto& r = w.r;
    BlockStatus status = BlockStatus::ok;
    if (r.count == 0 || r.lba + r.count > spec_.capacity_blocks) {
        status = BlockStatus::out_of_range;
    } else if (spec_.error_rate > 0.0 &&
               std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < spec_.error_rate) {
        status = BlockStatus::device_error;
        ++errors_;
    } else {
        const auto bs = spec_.block_size;
        auto bytes = data_.slot_bytes(r.data.offset, r.count * bs);
        for (std::uint32_t b = 0; b < r.count; ++b) {
            auto chunk = bytes.subspan(std::size_t{b} * bs, bs);
            if (r.op == BlockOp::write) {
                store_[r.lba + b].assign(chunk.begin(), chunk.end());
            } else {
                auto it = store_.find(r.lba + b);
                if (it == store_.end()) {
                    std::fill(chunk.begin(), chunk.end(), 0);
                } else {
                    std::copy(it->second.begin(), it->second.end(), chunk.begin());
                }
            }
        }
    }
    trace_.push_back({r.id, r.op, r.lba, r.count, w.seq, completed_++});
    done_.push_back({r.id, status, t});
}

void DiskModel::advance(Time t, bool raise_irq) {
    while (serving_ && serving_->second <= t) {
        const auto [w, tc] = *serving_;
        serving_.reset();
        complete(w, tc);
        if (raise_irq) {
            rt_.raise_irq(driver_, tc);
        }
        start_next(tc);
    }
}

std::optional<BlockResponse> DiskModel::take_completion() {
    if (done_.empty()) {
        return std::nullopt;
    }
    auto r = done_.front();
    done_.pop_front();
    return r;
}

std::vector<std::uint8_t> DiskModel::block(std::uint64_t lba) const {
    auto it = store_.find(lba);
    if (it == store_.end()) {
        return std::vector<std::uint8_t>(spec_.block_size, 0);
    }
    return it->second;
}

void DiskModel::add_counters(std::map<std::string, std::uint64_t>& out) const {
    out["disk.submitted"] = submitted_;
    out["disk.completed"] = completed_;
    out["disk.errors"] = errors_;
    out["disk.barriers"] = barrier_marks_.size();
}

// ----------------------------------------------------------------- BlkDriver

BlkDriver::BlkDriver(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "blk_driver") {
    reject_unknown(params, {}, this->name());
}

void BlkDriver::attach(Binder& b) {
    disk_ = &b.disk();
    enforce_ = disk_->spec().enforce_barriers;
    rq_ = b.consumer<BlockRequest>("rq");
    rs_ = b.producer<BlockResponse>("rs");
}

void BlkDriver::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    std::uint64_t items = 0;
    for (;;) {
        disk_->advance(ctx.now(), false);
        std::uint64_t n = 0;
        while (!rs_.full()) {
            auto c = disk_->take_completion();
            if (!c) break;
            rs_.push(ctx, *c);
            ctx.charge_items(1);
            ++n;
        }
        bool barrier_blocked = false;
        while (const auto* r = rq_.peek()) {
            if (r->op == BlockOp::barrier) {
                // A barrier retires once everything issued before it is done.
                if (enforce_ && disk_->in_flight() > 0) {
                    barrier_blocked = true;
                    break;
                }
                if (rs_.full()) break;
                const auto b = *rq_.pop(ctx);
                disk_->mark_barrier();
                rs_.push(ctx, BlockResponse{b.id, BlockStatus::ok, ctx.now()});
                bump("barriers");
                ++n;
                continue;
            }
            const auto q = *rq_.pop(ctx);
            disk_->submit(q, ctx.now());
            ctx.charge_items(1);
            ++n;
            ++items;
        }
        if (n > 0) {
            continue;
        }
        bool more = false;
        if (rq_.peek() == nullptr) {
            if (!rq_.request_signal_if_empty()) more = true;
        } else if (!barrier_blocked && !rs_.request_signal_if_full()) {
            more = true;
        }
        if (!disk_->completions_empty() && !rs_.request_signal_if_full()) more = true;
        if (!more) {
            break;
        }
    }
    ctx.record_batch(items);
}

// ------------------------------------------------------------------- BlkVirt

BlkVirt::BlkVirt(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "blk_virt") {
    reject_unknown(params, {"clients", "region"}, this->name());
    if (!params.contains("clients")) {
        throw ConfigError(this->name() + ": missing param 'clients'");
    }
    for (const auto& c : params.at("clients")) {
        Partition p;
        p.client = c.at("name").get<std::string>();
        p.start_lba = c.at("start_lba").get<std::uint64_t>();
        p.length = c.at("length").get<std::uint64_t>();
        parts_.push_back(p);
    }
}

void BlkVirt::attach(Binder& b) {
    if (!b.scenario().disk) {
        throw WiringError(name() + ": scenario has no disk");
    }
    const auto& disk = *b.scenario().disk;
    block_size_ = disk.block_size;
    const auto region = b.spec().params.value("region", disk.data_region);
    auto sorted = parts_;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& x, const auto& y) { return x.start_lba < y.start_lba; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].length == 0 || sorted[i].start_lba + sorted[i].length > disk.capacity_blocks) {
            throw WiringError(name() + ": partition of '" + sorted[i].client +
                              "' exceeds the device");
        }
        if (i > 0 && sorted[i].start_lba < sorted[i - 1].start_lba + sorted[i - 1].length) {
            throw WiringError(name() + ": partitions of '" + sorted[i - 1].client + "' and '" +
                              sorted[i].client + "' overlap");
        }
    }
    drv_rq_ = b.producer<BlockRequest>("drv_rq");
    drv_rs_ = b.consumer<BlockResponse>("drv_rs");
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        windows_.push_back(b.subregion(region, parts_[i].client));
        cli_rq_.push_back(b.consumer<BlockRequest>("cli_rq[" + std::to_string(i) + "]"));
        cli_rs_.push_back(b.producer<BlockResponse>("cli_rs[" + std::to_string(i) + "]"));
    }
}

InfoPage BlkVirt::info_page(const std::string& client) const {
    for (const auto& p : parts_) {
        if (p.client == client) {
            return {block_size_, p.length};
        }
    }
    throw ConfigError(name() + ": unknown client '" + client + "'");
}

void BlkVirt::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    std::uint64_t items = 0;
    for (;;) {
        std::uint64_t n = 0;
        std::optional<std::size_t> rs_blocked;
        while (const auto* r = drv_rs_.peek()) {
            auto it = tags_.find(r->id);
            if (it == tags_.end()) {
                (void)drv_rs_.pop(ctx);
                bump("unknown_tags");
                ++n;
                continue;
            }
            const auto [client, client_id] = it->second;
            if (cli_rs_[client].full()) {
                rs_blocked = client;
                break;
            }
            const auto resp = *drv_rs_.pop(ctx);
            tags_.erase(it);
            cli_rs_[client].push(ctx, BlockResponse{client_id, resp.status, resp.completed});
            ctx.charge_items(1);
            ++n;
        }
        for (std::size_t i = 0; i < parts_.size(); ++i) {
            ctx.charge_polls(1);
            while (const auto* q = cli_rq_[i].peek()) {
                auto r = *q;
                bool valid = true;
                if (r.op != BlockOp::barrier) {
                    const std::uint64_t bytes = std::uint64_t{r.count} * block_size_;
                    if (r.count == 0 || r.lba >= parts_[i].length ||
                        r.count > parts_[i].length - r.lba) {
                        valid = false;
                        bump("out_of_range");
                    } else if (bytes > windows_[i].slot_size ||
                               sanitize(BufferDescriptor{r.data.offset,
                                                         static_cast<std::uint32_t>(bytes), 0},
                                        windows_[i]) != SanitizeResult::ok) {
                        valid = false;
                        bump("invalid_descriptors");
                    }
                }
                if (!valid) {
                    if (cli_rs_[i].full()) break;
                    (void)cli_rq_[i].pop(ctx);
                    cli_rs_[i].push(ctx, BlockResponse{r.id, BlockStatus::out_of_range, ctx.now()});
                    ++n;
                    continue;
                }
                if (drv_rq_.full()) break;
                (void)cli_rq_[i].pop(ctx);
                const auto tag = next_tag_++;
                tags_[tag] = {i, r.id};
                r.id = tag;
                if (r.op != BlockOp::barrier) {
                    r.lba += parts_[i].start_lba;
                    r.data.offset += windows_[i].base;
                }
                drv_rq_.push(ctx, r);
                ctx.charge_items(1);
                ++n;
                ++items;
            }
        }
        if (n > 0) {
            continue;
        }
        bool more = false;
        if (rs_blocked) {
            if (!cli_rs_[*rs_blocked].request_signal_if_full()) more = true;
        } else if (!drv_rs_.request_signal_if_empty()) {
            more = true;
        }
        for (std::size_t i = 0; i < parts_.size(); ++i) {
            if (cli_rq_[i].peek() == nullptr) {
                if (!cli_rq_[i].request_signal_if_empty()) more = true;
            } else if (cli_rs_[i].full()) {
                if (!cli_rs_[i].request_signal_if_full()) more = true;
            }
        }
        if (drv_rq_.full() && !drv_rq_.request_signal_if_full()) more = true;
        if (!more) {
            break;
        }
    }
    ctx.record_batch(items);
}

// ----------------------------------------------------------------- BlkClient

BlkClient::BlkClient(std::string name, const nlohmann::json& params)
    : Component(std::move(name), "blk_client") {
    reject_unknown(params,
                   {"virt", "queue_depth", "requests", "read_fraction", "barrier_every", "pattern",
                    "blocks", "seed", "out_of_range_every"},
                   this->name());
    virt_ = params.value("virt", std::string("blk_virt"));
    queue_depth_ = params.value("queue_depth", 8u);
    requests_ = params.value("requests", std::uint64_t{1000});
    read_fraction_ = params.value("read_fraction", 0.5);
    barrier_every_ = params.value("barrier_every", std::uint64_t{0});
    const auto pattern = params.value("pattern", std::string("random"));
    if (pattern != "random" && pattern != "sequential") {
        throw ConfigError(this->name() + ": pattern must be random or sequential");
    }
    sequential_ = pattern == "sequential";
    blocks_ = params.value("blocks", 1u);
    out_of_range_every_ = params.value("out_of_range_every", std::uint64_t{0});
    rng_.seed(params.value("seed", std::uint64_t{1}) ^ fnv1a(this->name()));
    tag_ = fnv1a(this->name());
    if (queue_depth_ == 0 || blocks_ == 0) {
        throw ConfigError(this->name() + ": queue_depth and blocks must be positive");
    }
}

void BlkClient::attach(Binder& b) {
    data_ = b.view("data");
    rq_ = b.producer<BlockRequest>("rq");
    rs_ = b.consumer<BlockResponse>("rs");
    const auto slots = data_.window().slot_count();
    if (slots < queue_depth_) {
        throw WiringError(name() + ": data window has " + std::to_string(slots) +
                          " slots for queue depth " + std::to_string(queue_depth_));
    }
    for (std::uint32_t s = static_cast<std::uint32_t>(slots); s > 0; --s) {
        free_slots_.push_back(s - 1);
    }
}

void BlkClient::init(Context& ctx) {
    auto* virt = dynamic_cast<BlkVirt*>(&ctx.runtime().component(virt_));
    if (virt == nullptr) {
        throw WiringError(name() + ": '" + virt_ + "' is not a blk_virt");
    }
    info_ = virt->info_page(name());
    if (std::uint64_t{blocks_} * info_.block_size > data_.window().slot_size ||
        blocks_ > info_.capacity_blocks) {
        throw ConfigError(name() + ": request size does not fit");
    }
    issue(ctx);
}

void BlkClient::pattern(std::span<std::uint8_t> out, std::uint64_t client_tag, std::uint64_t lba,
                        std::uint64_t version) {
    std::uint64_t x = client_tag * 0x9e3779b97f4a7c15ull ^ lba * 0xc2b2ae3d27d4eb4full ^
                      version * 0x165667b19e3779f9ull;
    for (std::size_t j = 0; j < out.size(); ++j) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        out[j] = static_cast<std::uint8_t>(z ^ (z >> 31));
    }
}

std::optional<std::vector<std::uint8_t>> BlkClient::expected_block(std::uint64_t lba) const {
    if (unknown_.count(lba) != 0) {
        return std::nullopt;
    }
    std::vector<std::uint8_t> out(info_.block_size, 0);
    auto it = versions_.find(lba);
    if (it != versions_.end()) {
        pattern(out, tag_, lba, it->second);
    }
    return out;
}

bool BlkClient::conflicts(BlockOp op, std::uint64_t lba, std::uint32_t count) const {
    // overlapping write traffic in flight together may be reordered
    for (const auto& [id, o] : outstanding_) {
        // earlier epochs are already fenced off by a barrier
        if (o.op == BlockOp::barrier || o.probe || o.epoch != epoch_) continue;
        if (op == BlockOp::read && o.op == BlockOp::read) continue;
        if (lba < o.lba + o.count && o.lba < lba + count) {
            return true;
        }
    }
    return false;
}

void BlkClient::issue(Context& ctx) {
    auto room = [&] {
        return outstanding_.size() < queue_depth_ && issued_ < requests_ && !rq_.full();
    };
    auto push_barrier = [&] {
        BlockRequest r;
        r.id = next_id_++;
        r.op = BlockOp::barrier;
        r.submitted = ctx.now();
        Outstanding o;
        o.op = BlockOp::barrier;
        o.submitted = ctx.now();
        outstanding_[r.id] = o;
        ++epoch_;
        rq_.push(ctx, r);
        since_barrier_ = 0;
        bump("barriers");
    };
    while (room() && !free_slots_.empty()) {
        if (barrier_every_ != 0 && since_barrier_ >= barrier_every_) {
            push_barrier();
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const bool probe = out_of_range_every_ != 0 && (issued_ + 1) % out_of_range_every_ == 0;
        const BlockOp op = u(rng_) < read_fraction_ ? BlockOp::read : BlockOp::write;
        const auto count = blocks_;
        std::uint64_t lba = 0;
        if (probe) {
            lba = info_.capacity_blocks;
        } else if (sequential_) {
            if (seq_lba_ + count > info_.capacity_blocks) seq_lba_ = 0;
            lba = seq_lba_;
            seq_lba_ += count;
        } else {
            lba = rng_() % (info_.capacity_blocks - count + 1);
        }
        if (!probe && conflicts(op, lba, count)) {
            push_barrier();
            if (!room()) break;
        }
        const auto slot = free_slots_.back();
        free_slots_.pop_back();
        const auto slot_size = data_.window().slot_size;
        const auto bs = info_.block_size;
        Outstanding o;
        o.op = op;
        o.lba = lba;
        o.count = count;
        o.slot = slot;
        o.probe = probe;
        o.epoch = epoch_;
        o.submitted = ctx.now();
        if (!probe) {
            if (op == BlockOp::write) {
                const auto version = next_version_++;
                auto bytes = data_.write(std::uint64_t{slot} * slot_size, count * bs);
                for (std::uint32_t b = 0; b < count; ++b) {
                    pattern(bytes.subspan(std::size_t{b} * bs, bs), tag_, lba + b, version);
                    versions_[lba + b] = version;
                    unknown_.erase(lba + b);
                }
            } else {
                for (std::uint32_t b = 0; b < count; ++b) {
                    auto it = versions_.find(lba + b);
                    o.versions.push_back(unknown_.count(lba + b) != 0 ? kUnknownVersion
                                         : it == versions_.end()   ? 0
                                                                   : it->second);
                }
            }
        }
        BlockRequest r;
        r.id = next_id_++;
        r.op = op;
        r.lba = lba;
        r.count = count;
        r.data = BufferDescriptor{std::uint64_t{slot} * slot_size, count * bs, 0};
        r.submitted = ctx.now();
        outstanding_[r.id] = std::move(o);
        rq_.push(ctx, r);
        ++issued_;
        ++since_barrier_;
    }
}

void BlkClient::on_response(Context& ctx, const BlockResponse& r) {
    auto it = outstanding_.find(r.id);
    if (it == outstanding_.end()) {
        bump("unexpected_responses");
        return;
    }
    const auto o = std::move(it->second);
    outstanding_.erase(it);
    if (o.op == BlockOp::barrier) {
        return;
    }
    ++completed_;
    const auto bs = info_.block_size;
    latencies_.push_back({ctx.now(), ctx.now() - o.submitted, o.count * bs});
    free_slots_.push_back(o.slot);
    if (o.probe) {
        bump(r.status == BlockStatus::out_of_range ? "probes_rejected" : "probes_accepted");
        return;
    }
    if (r.status == BlockStatus::device_error) {
        bump("device_errors");
        if (o.op == BlockOp::write) {
            for (std::uint32_t b = 0; b < o.count; ++b) unknown_.insert(o.lba + b);
        }
        return;
    }
    if (r.status != BlockStatus::ok) {
        bump("unexpected_status");
        return;
    }
    if (o.op == BlockOp::read) {
        const auto slot_size = data_.window().slot_size;
        auto bytes = data_.read(std::uint64_t{o.slot} * slot_size, o.count * bs);
        std::vector<std::uint8_t> want(bs);
        for (std::uint32_t b = 0; b < o.count; ++b) {
            const auto v = o.versions[b];
            if (v == kUnknownVersion || unknown_.count(o.lba + b) != 0) continue;
            if (v == 0) {
                std::fill(want.begin(), want.end(), 0);
            } else {
                pattern(want, tag_, o.lba + b, v);
            }
            if (!std::equal(want.begin(), want.end(), bytes.begin() + std::ptrdiff_t{b} * bs)) {
                bump("verify_failures");
            } else {
                bump("verified_blocks");
            }
        }
    }
}

void BlkClient::notified(Context& ctx, ChannelId) {
    ctx.charge_invocation();
    std::uint64_t items = 0;
    for (;;) {
        std::uint64_t n = 0;
        while (auto r = rs_.pop(ctx)) {
            on_response(ctx, *r);
            ctx.charge_items(1);
            ++n;
            ++items;
        }
        const auto before = issued_;
        issue(ctx);
        n += issued_ - before;
        if (n > 0) {
            continue;
        }
        if (rs_.request_signal_if_empty()) {
            if (rq_.full()) {
                rq_.request_signal_if_full();
            }
            break;
        }
    }
    ctx.record_batch(items);
}

} // namespace modio
