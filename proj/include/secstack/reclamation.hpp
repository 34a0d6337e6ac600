#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "secstack/config.hpp"
#include "secstack/detail/check.hpp"
#include "secstack/detail/spin.hpp"

namespace secstack {

// Epoch-based memory reclamation.
//
// Each participating thread owns one slot.  While a thread is inside a
// Guard it announces the global epoch it observed; objects are retired
// into per-thread lists stamped with the epoch current at retire time and
// freed once the global epoch has moved two steps past that stamp.  The
// global epoch can only advance when every announced slot has caught up
// with it, so a stamp can never age two epochs while somebody still holds
// a reference obtained under a guard.
//
// The fence discipline follows the usual recipe: announcing is a relaxed
// store followed by a seq_cst fence, and the advance scan issues a seq_cst
// fence before reading the slots.  The two-epoch grace period absorbs the
// one announce/scan race that discipline still permits.
class EpochDomain {
  static constexpr std::uint64_t kIdle = ~std::uint64_t{0};

 public:
  explicit EpochDomain(std::size_t num_slots,
                       ReclaimConfig cfg = ReclaimConfig::from_env())
      : cfg_(cfg), slots_(num_slots), locals_(num_slots) {}

  EpochDomain(const EpochDomain&) = delete;
  EpochDomain& operator=(const EpochDomain&) = delete;

  ~EpochDomain() {
    // By contract nobody is inside a guard any more; everything still
    // pending can be freed unconditionally.
    for (auto& local : locals_) {
      for (auto& r : local.items) {
        r.deleter(r.object);
        freed_.fetch_add(1, std::memory_order_relaxed);
      }
      local.items.clear();
    }
  }

  // RAII epoch pin.  Guards are non-reentrant per slot: entering while the
  // same slot is already announced is a usage error, not a no-op.
  class Guard {
   public:
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;
    ~Guard() {
      if (slot_) slot_->store(kIdle, std::memory_order_release);
    }

   private:
    friend class EpochDomain;
    explicit Guard(std::atomic<std::uint64_t>* slot) : slot_(slot) {}
    std::atomic<std::uint64_t>* slot_;
  };

  Guard enter(std::size_t slot) {
    auto& s = slots_.at(slot).epoch;
    if (s.load(std::memory_order_relaxed) != kIdle)
      throw std::logic_error("epoch guard is not reentrant");
    s.store(global_.load(std::memory_order_relaxed), std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_seq_cst);
    return Guard(&s);
  }

  // Hand an unlinked object to the domain.  `slot` must be the calling
  // thread's own slot.  Safe to call with the guard still active; frees
  // are deferred until the grace period has passed either way.
  void retire(std::size_t slot, void* object, void (*deleter)(void*)) {
    Local& local = locals_.at(slot);
    local.items.push_back(
        {object, deleter, global_.load(std::memory_order_relaxed)});
    retired_.fetch_add(1, std::memory_order_relaxed);
    pending_.fetch_add(1, std::memory_order_relaxed);
    if (local.items.size() >= cfg_.retire_cap) {
      // At the cap: push hard on the epoch before growing further.  An
      // advance can still be blocked by a stalled guard (possibly our
      // own, if it spans epochs), so the loop is bounded.
      detail::SpinWait sw;
      for (int attempt = 0; attempt < 64; ++attempt) {
        try_advance();
        collect(slot);
        if (local.items.size() < cfg_.retire_cap) break;
        sw.wait();
      }
    } else if (++local.since_advance >= cfg_.advance_cadence) {
      local.since_advance = 0;
      try_advance();
      collect(slot);
    }
  }

  template <class U>
  void retire(std::size_t slot, U* p) {
    retire(slot, p, [](void* q) { delete static_cast<U*>(q); });
  }

  // Advance the global epoch by one if every announced slot has observed
  // the current value.  Returns true on success.
  bool try_advance() {
    std::uint64_t e = global_.load(std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_seq_cst);
    for (const auto& s : slots_) {
      const std::uint64_t v = s.epoch.load(std::memory_order_relaxed);
      if (v != kIdle && v != e) return false;
    }
    return global_.compare_exchange_strong(e, e + 1, std::memory_order_acq_rel,
                                           std::memory_order_relaxed);
  }

  // Free everything in `slot`'s retire list whose grace period has passed.
  void collect(std::size_t slot) {
    Local& local = locals_.at(slot);
    const std::uint64_t e = global_.load(std::memory_order_acquire);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < local.items.size(); ++i) {
      Retired& r = local.items[i];
      if (r.epoch + 2 <= e) {
        r.deleter(r.object);
        freed_.fetch_add(1, std::memory_order_relaxed);
        pending_.fetch_sub(1, std::memory_order_relaxed);
      } else {
        local.items[kept++] = r;
      }
    }
    local.items.resize(kept);
  }

  // Quiescent-state helper: with no guards active, advance until every
  // pending object has been freed.
  void drain() {
    for (std::size_t slot = 0; slot < locals_.size(); ++slot) collect(slot);
    while (pending_.load(std::memory_order_relaxed) > 0) {
      if (!try_advance()) break;  // an active guard would make this spin forever
      for (std::size_t slot = 0; slot < locals_.size(); ++slot) collect(slot);
    }
  }

  std::uint64_t epoch() const { return global_.load(std::memory_order_acquire); }
  std::uint64_t retired_total() const { return retired_.load(std::memory_order_relaxed); }
  std::uint64_t freed_total() const { return freed_.load(std::memory_order_relaxed); }
  std::uint64_t pending() const { return pending_.load(std::memory_order_relaxed); }
  const ReclaimConfig& config() const { return cfg_; }

 private:
  struct alignas(64) Slot {
    std::atomic<std::uint64_t> epoch{kIdle};
  };
  struct Retired {
    void* object;
    void (*deleter)(void*);
    std::uint64_t epoch;
  };
  struct alignas(64) Local {
    std::vector<Retired> items;
    std::size_t since_advance = 0;
  };

  ReclaimConfig cfg_;
  alignas(64) std::atomic<std::uint64_t> global_{0};
  std::vector<Slot> slots_;
  std::vector<Local> locals_;
  std::atomic<std::uint64_t> retired_{0};
  std::atomic<std::uint64_t> freed_{0};
  std::atomic<std::uint64_t> pending_{0};
};

}  // namespace secstack
