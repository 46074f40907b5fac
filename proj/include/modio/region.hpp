#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "modio/queue.hpp"

namespace modio {

/// Contiguous run of slots inside a data region: either the whole region or
/// one client's sub-region. Offsets handed to the owner of a window are
/// relative to `base`.
struct RegionWindow {
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    std::uint32_t slot_size = 0;

    std::uint64_t slot_count() const { return slot_size == 0 ? 0 : size / slot_size; }
    bool contains_global(std::uint64_t global) const {
        return global >= base && global < base + size;
    }
};

/// Flat payload store divided into fixed-size slots.
class DataRegion {
public:
    DataRegion(std::string name, std::uint32_t slot_size, std::uint64_t slot_count);

    const std::string& name() const { return name_; }
    std::uint32_t slot_size() const { return slot_size_; }
    std::uint64_t slot_count() const { return slot_count_; }
    std::uint64_t size() const { return bytes_.size(); }
    RegionWindow window() const { return {0, size(), slot_size_}; }

    /// Window of `count` slots starting at slot `first`.
    RegionWindow sub_window(std::uint64_t first, std::uint64_t count) const;

    std::span<std::uint8_t> slot_bytes(std::uint64_t offset, std::uint32_t length);
    std::span<const std::uint8_t> slot_bytes(std::uint64_t offset, std::uint32_t length) const;

private:
    std::string name_;
    std::uint32_t slot_size_;
    std::uint64_t slot_count_;
    std::vector<std::uint8_t> bytes_;
};

enum class SanitizeResult { ok, out_of_range, misaligned, oversize };

const char* to_string(SanitizeResult r);

/// Check a window-relative descriptor against the window it claims to
/// reference. Called on every descriptor crossing a trust boundary.
SanitizeResult sanitize(const BufferDescriptor& d, const RegionWindow& w);

enum class Access { none, header, read, read_write };

/// Thrown when a component touches region bytes beyond its mapping rights.
class AccessViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A component's mapping of (part of) a data region. Counts every access so
/// tests can prove which components never look at payload.
class RegionView {
public:
    static constexpr std::uint32_t kHeaderBytes = 14;

    RegionView() = default;
    RegionView(DataRegion* region, RegionWindow window, Access access)
        : region_(region), window_(window), access_(access) {}

    bool mapped() const { return region_ != nullptr; }
    const RegionWindow& window() const { return window_; }
    Access access() const { return access_; }
    DataRegion* region() const { return region_; }

    /// First 14 bytes of the slot at window-relative `offset`.
    std::span<const std::uint8_t> header(std::uint64_t offset);
    std::span<const std::uint8_t> read(std::uint64_t offset, std::uint32_t length);
    std::span<std::uint8_t> write(std::uint64_t offset, std::uint32_t length);

    std::uint64_t header_reads() const { return header_reads_; }
    std::uint64_t payload_bytes_read() const { return bytes_read_; }
    std::uint64_t payload_bytes_written() const { return bytes_written_; }

private:
    void check(std::uint64_t offset, std::uint32_t length, Access need) const;

    DataRegion* region_ = nullptr;
    RegionWindow window_;
    Access access_ = Access::none;
    std::uint64_t header_reads_ = 0;
    std::uint64_t bytes_read_ = 0;
    std::uint64_t bytes_written_ = 0;
};

} // namespace modio
