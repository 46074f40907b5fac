#pragma once

#include <cstdint>

#include "modio/queue.hpp"
#include "modio/time.hpp"

namespace modio {

enum class BlockOp : std::uint8_t { read, write, barrier };
enum class BlockStatus : std::uint8_t { ok, out_of_range, device_error };

/// Storage request record carried by Rq queues. `data` is absent (zero) for
/// barriers.
struct BlockRequest {
    std::uint64_t id = 0;
    BlockOp op = BlockOp::read;
    std::uint64_t lba = 0;
    std::uint32_t count = 0;
    BufferDescriptor data;
    Time submitted;
};

/// Storage response record carried by Rs queues.
struct BlockResponse {
    std::uint64_t id = 0;
    BlockStatus status = BlockStatus::ok;
    Time completed;
};

} // namespace modio
