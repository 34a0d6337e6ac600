#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace secstack {

// Knobs for the epoch-based reclamation domain.  Both can also be set
// through the environment (SECSTACK_RECLAIM_CAP, SECSTACK_RECLAIM_CADENCE)
// so benchmark runs can be tuned without recompiling.
struct ReclaimConfig {
  // Per-thread ceiling on retired-but-unfreed objects.  When a thread's
  // retire list reaches the cap it aggressively tries to advance the
  // epoch and collect before growing further.
  std::size_t retire_cap = 2048;
  // Attempt an epoch advance every `advance_cadence` retirements.
  std::size_t advance_cadence = 64;

  static ReclaimConfig from_env() {
    ReclaimConfig c;
    if (const char* s = std::getenv("SECSTACK_RECLAIM_CAP")) {
      const unsigned long v = std::strtoul(s, nullptr, 10);
      if (v > 0) c.retire_cap = v;
    }
    if (const char* s = std::getenv("SECSTACK_RECLAIM_CADENCE")) {
      const unsigned long v = std::strtoul(s, nullptr, 10);
      if (v > 0) c.advance_cadence = v;
    }
    return c;
  }
};

// Configuration for the sharded stack.  `num_threads` is the hard bound
// on registered threads; `num_aggregators` is the shard count K.  Each
// aggregator serves a contiguous block of ceil(N/K) thread ids, so a
// batch never sees more than that many announcements of one kind.
struct Config {
  std::uint32_t num_threads = 1;
  std::uint32_t num_aggregators = 2;
  // Delay the freezer waits before snapshotting the announcement
  // counters, giving concurrent operations time to join the batch.
  std::uint64_t freezer_backoff_ns = 1000;
  ReclaimConfig reclaim = ReclaimConfig::from_env();

  std::uint32_t slots_per_aggregator() const {
    return (num_threads + num_aggregators - 1) / num_aggregators;
  }

  void validate() const {
    if (num_threads == 0) throw std::invalid_argument("num_threads must be positive");
    if (num_aggregators == 0 || num_aggregators > num_threads)
      throw std::invalid_argument("num_aggregators must be in [1, num_threads] (got " +
                                  std::to_string(num_aggregators) + " for " +
                                  std::to_string(num_threads) + " threads)");
  }
};

}  // namespace secstack
