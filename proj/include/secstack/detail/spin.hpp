#pragma once

#include <chrono>
#include <cstdint>
#include <thread>

namespace secstack::detail {

inline void cpu_pause() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_ia32_pause();
#elif defined(__aarch64__)
  asm volatile("yield" ::: "memory");
#else
  asm volatile("" ::: "memory");
#endif
}

// Bounded busy-spin, then cooperative yield.  Every wait loop in this
// library goes through one of these so progress does not depend on the
// partner thread holding a core: after kSpinLimit pause iterations each
// further wait() gives the scheduler a chance to run someone else.
class SpinWait {
 public:
  void wait() noexcept {
    if (spins_ < kSpinLimit) {
      ++spins_;
      cpu_pause();
    } else {
      std::this_thread::yield();
    }
  }

  void reset() noexcept { spins_ = 0; }

 private:
  static constexpr std::uint32_t kSpinLimit = 64;
  std::uint32_t spins_ = 0;
};

// Wait out roughly `ns` nanoseconds, yielding on every iteration.  Used
// for the freezer backoff window, whose whole purpose is to give other
// threads a chance to announce: yielding is the strongest way to hand
// them the CPU when cores are scarce, and it degrades to a cheap no-op
// when nothing else is runnable.
inline void backoff_spin(std::chrono::nanoseconds ns) {
  if (ns <= std::chrono::nanoseconds::zero()) return;
  const auto deadline = std::chrono::steady_clock::now() + ns;
  do {
    std::this_thread::yield();
  } while (std::chrono::steady_clock::now() < deadline);
}

}  // namespace secstack::detail
