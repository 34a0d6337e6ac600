#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace secstack::bench {

enum class WorkOp : std::uint8_t { kPush, kPop, kPeek };

// A benchmark workload.  The mix percentages must sum to 100.
struct WorkloadSpec {
  std::uint32_t threads = 1;
  std::uint32_t push_pct = 50;
  std::uint32_t pop_pct = 50;
  std::uint32_t peek_pct = 0;
  std::uint32_t prefill = 0;
  double seconds = 5.0;
  std::uint64_t seed = 1;
  std::uint32_t repeats = 5;
  std::uint64_t work_ns = 0;  // simulated per-op think time
  bool pin = false;

  void validate() const {
    if (threads == 0) throw std::invalid_argument("threads must be positive");
    if (push_pct + pop_pct + peek_pct != 100)
      throw std::invalid_argument("op mix must sum to 100%");
    if (seconds <= 0) throw std::invalid_argument("duration must be positive");
    if (repeats == 0) throw std::invalid_argument("repeats must be positive");
  }
};

// Implementation selector plus the knobs that only exist for some
// implementations.
struct ImplSpec {
  std::string name = "sec";  // sec | treiber | eb
  std::uint32_t aggregators = 2;
  std::uint64_t backoff_ns = 1000;
};

namespace detail_rng {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail_rng

// Per-thread operation streams are pure functions of (seed, thread, index):
// no generator state is carried between operations, so any prefix can be
// recomputed anywhere and identical (seed, spec) pairs produce identical
// streams byte for byte.
inline std::uint64_t stream_word(std::uint64_t seed, std::uint32_t tid,
                                 std::uint64_t index) {
  return detail_rng::mix64(detail_rng::mix64(seed ^ (std::uint64_t{tid} << 32)) ^
                           index);
}

inline WorkOp op_at(const WorkloadSpec& spec, std::uint32_t tid,
                    std::uint64_t index) {
  const std::uint32_t pick = stream_word(spec.seed, tid, index) % 100;
  if (pick < spec.push_pct) return WorkOp::kPush;
  if (pick < spec.push_pct + spec.pop_pct) return WorkOp::kPop;
  return WorkOp::kPeek;
}

// Pushed values are unique across the run: the thread id in the high
// bits, the operation index in the low bits.  Conservation checks lean
// on this.
inline std::uint64_t value_at(std::uint32_t tid, std::uint64_t index) {
  return (std::uint64_t{tid} + 1) << 40 | index;
}

// Prefill values live in their own range so they can never collide with
// a thread's pushes.
inline std::uint64_t prefill_value(std::uint64_t index) {
  return std::uint64_t{1} << 63 | index;
}

// Text form of a stream prefix, one op per line ("push <v>" | "pop" |
// "peek").  Two invocations with the same spec and thread id must agree
// byte for byte; tests and the determinism gate rely on that.
inline std::string serialize_stream(const WorkloadSpec& spec, std::uint32_t tid,
                                    std::uint64_t count) {
  std::ostringstream out;
  for (std::uint64_t i = 0; i < count; ++i) {
    switch (op_at(spec, tid, i)) {
      case WorkOp::kPush:
        out << "push " << value_at(tid, i) << '\n';
        break;
      case WorkOp::kPop:
        out << "pop\n";
        break;
      case WorkOp::kPeek:
        out << "peek\n";
        break;
    }
  }
  return out.str();
}

}  // namespace secstack::bench
