#include "modio/region.hpp"

#include <bit>

namespace modio {

DataRegion::DataRegion(std::string name, std::uint32_t slot_size, std::uint64_t slot_count)
    : name_(std::move(name)), slot_size_(slot_size), slot_count_(slot_count) {
    if (slot_size == 0 || !std::has_single_bit(slot_size)) {
        throw ConfigError("region '" + name_ + "': slot size must be a power of two");
    }
    if (slot_count == 0) {
        throw ConfigError("region '" + name_ + "': slot count must be positive");
    }
    bytes_.assign(slot_size * slot_count, 0);
}

RegionWindow DataRegion::sub_window(std::uint64_t first, std::uint64_t count) const {
    if (first + count > slot_count_) {
        throw ConfigError("region '" + name_ + "': sub-region [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") exceeds " +
                          std::to_string(slot_count_) + " slots");
    }
    return {first * slot_size_, count * slot_size_, slot_size_};
}

std::span<std::uint8_t> DataRegion::slot_bytes(std::uint64_t offset, std::uint32_t length) {
    if (offset + length > bytes_.size()) {
        throw std::out_of_range("region '" + name_ + "': access past end");
    }
    return {bytes_.data() + offset, length};
}

std::span<const std::uint8_t> DataRegion::slot_bytes(std::uint64_t offset,
                                                     std::uint32_t length) const {
    if (offset + length > bytes_.size()) {
        throw std::out_of_range("region '" + name_ + "': access past end");
    }
    return {bytes_.data() + offset, length};
}

const char* to_string(SanitizeResult r) {
    switch (r) {
    case SanitizeResult::ok: return "ok";
    case SanitizeResult::out_of_range: return "out_of_range";
    case SanitizeResult::misaligned: return "misaligned";
    case SanitizeResult::oversize: return "oversize";
    }
    return "?";
}

SanitizeResult sanitize(const BufferDescriptor& d, const RegionWindow& w) {
    if (d.offset >= w.size) {
        return SanitizeResult::out_of_range;
    }
    // slot_size is a power of two
    if ((d.offset & (w.slot_size - 1)) != 0) {
        return SanitizeResult::misaligned;
    }
    if (d.length > w.slot_size || d.offset + d.length > w.size) {
        return SanitizeResult::oversize;
    }
    return SanitizeResult::ok;
}

void RegionView::check(std::uint64_t offset, std::uint32_t length, Access need) const {
    if (region_ == nullptr) {
        throw AccessViolation("access through an unmapped region view");
    }
    if (static_cast<int>(access_) < static_cast<int>(need)) {
        throw AccessViolation("region '" + region_->name() + "': access beyond mapping rights");
    }
    if (offset + length > window_.size) {
        throw AccessViolation("region '" + region_->name() + "': access outside mapped window");
    }
}

std::span<const std::uint8_t> RegionView::header(std::uint64_t offset) {
    check(offset, kHeaderBytes, Access::header);
    ++header_reads_;
    return region_->slot_bytes(window_.base + offset, kHeaderBytes);
}

std::span<const std::uint8_t> RegionView::read(std::uint64_t offset, std::uint32_t length) {
    check(offset, length, Access::read);
    bytes_read_ += length;
    return region_->slot_bytes(window_.base + offset, length);
}

std::span<std::uint8_t> RegionView::write(std::uint64_t offset, std::uint32_t length) {
    check(offset, length, Access::read_write);
    bytes_written_ += length;
    return region_->slot_bytes(window_.base + offset, length);
}

} // namespace modio
