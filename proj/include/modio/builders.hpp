#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "modio/scenario.hpp"

namespace modio {

/// Network echo system: driver, Rx/Tx virtualisers, optional per-client
/// copiers, optional null forwarder on client 0's receive path, and echo
/// clients. Client i is named "client<i>".
struct EchoOptions {
    std::string name = "echo";
    std::size_t clients = 1;
    bool copier = true;
    bool null_fwd = false;
    /// Place the virtualisers on core 1 and clients on core 2 (else all on 0).
    bool multicore = false;
    /// Load on client 0; other clients idle unless `spread` is set.
    double rate_mbps = 100.0;
    bool spread = false;
    std::uint32_t frame_bytes = 1518;
    double duration_s = 1.0;
    double warmup_s = 0.1;
    std::int64_t surcharge_cycles = 0;
    std::uint64_t seed = 1;
    bool audit = false;
    std::string broadcast = "refcount";
    /// Add an ARP responder client ("arp") and route broadcasts to it.
    bool arp_client = false;
    double broadcast_mbps = 0.0;
    std::uint32_t tx_slots_per_client = 256;
};

Scenario echo_scenario(const EchoOptions& o);

/// Two echo clients: client0 at a steady rate, client1 ramping. TxVirt
/// watches client1 and, past the threshold, asks the swapper to install a
/// token bucket limiting client1.
struct SwapOptions {
    std::string name = "swap";
    double client0_mbps = 10.0;
    double client1_start_mbps = 100.0;
    double client1_end_mbps = 800.0;
    double ramp_start_s = 0.1;
    double ramp_end_s = 1.0;
    double threshold_mbps = 500.0;
    double limit_mbps = 200.0;
    double duration_s = 2.0;
    double warmup_s = 0.05;
    double sample_ms = 50.0;
    std::uint64_t seed = 1;
    bool audit = false;
};

Scenario swap_scenario(const SwapOptions& o);

/// Block driver, virtualiser and closed-loop clients ("blk0", ...), each
/// with its own partition and data sub-region.
struct StorageOptions {
    std::string name = "storage";
    std::size_t clients = 2;
    std::uint64_t blocks_per_client = 1024;
    std::uint64_t requests = 5000;
    std::uint32_t queue_depth = 16;
    double read_fraction = 0.5;
    std::uint64_t barrier_every = 16;
    std::uint32_t blocks_per_request = 1;
    std::uint32_t reorder_window = 8;
    bool enforce_barriers = true;
    std::uint64_t out_of_range_every = 0;
    std::string pattern = "random";
    double error_rate = 0.0;
    double duration_s = 2.0;
    std::uint64_t seed = 1;
};

Scenario storage_scenario(const StorageOptions& o);

std::string client_name(std::size_t i);

} // namespace modio
