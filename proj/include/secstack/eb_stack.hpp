#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "secstack/detail/check.hpp"
#include "secstack/detail/registry.hpp"
#include "secstack/detail/spin.hpp"
#include "secstack/reclamation.hpp"

namespace secstack {

template <typename T>
struct EbStackProbe;

struct EbConfig {
  // Spin iterations a waiter parks in a collider slot before withdrawing.
  std::uint32_t window_spins = 256;
};

// Treiber stack with an elimination backoff layer: when the top CAS
// fails, the operation parks in a random slot of a collider array and
// waits a short window for an operation of the opposite type to exchange
// with directly, bypassing the top pointer entirely.
//
// A parked operation publishes a compact descriptor word
// [type | thread id | generation] rather than a pointer; the generation
// makes the withdraw/claim CASes immune to slot reuse, and the exchange
// cell behind the word is owned per thread, so the exchange path needs no
// reclamation of its own.  Each thread adapts the number of slots it uses
// to the traffic it observes.
template <typename T = std::uint64_t>
class EbStack {
  struct Node {
    T value;
    std::atomic<Node*> next{nullptr};
#if SECSTACK_ENABLE_CHECKS
    std::atomic<bool> retired{false};
#endif
    explicit Node(T v) : value(std::move(v)) {}
  };

  enum : std::uint32_t { kPending = 0, kMatched = 1 };

  struct alignas(64) Cell {
    std::atomic<std::uint32_t> state{kPending};
    T offered{};   // written by a push owner before parking
    T received{};  // written by a push matcher before setting kMatched
  };

  struct alignas(64) ColliderSlot {
    std::atomic<std::uint64_t> word{0};
  };

  // Descriptor word layout: bit 63 = type (1 for push), bits 62..32 =
  // thread id + 1 (so the empty slot is all zeros), bits 31..0 =
  // generation.
  static std::uint64_t make_word(bool is_push, std::uint32_t tid,
                                 std::uint32_t gen) {
    return (std::uint64_t{is_push} << 63) |
           (std::uint64_t{tid + 1} << 32) | gen;
  }
  static bool word_is_push(std::uint64_t w) { return w >> 63; }
  static std::uint32_t word_tid(std::uint64_t w) {
    return static_cast<std::uint32_t>((w << 1) >> 33) - 1;
  }

 public:
  explicit EbStack(std::uint32_t num_threads, EbConfig cfg = {})
      : cfg_(cfg),
        registry_(num_threads),
        domain_(num_threads),
        cells_(num_threads),
        collider_(num_threads) {}

  EbStack(const EbStack&) = delete;
  EbStack& operator=(const EbStack&) = delete;

  ~EbStack() {
    Node* n = top_.load(std::memory_order_relaxed);
    while (n) {
      Node* next = n->next.load(std::memory_order_relaxed);
      delete n;
      n = next;
    }
  }

  class Handle {
   public:
    Handle(Handle&& other) noexcept
        : stack_(std::exchange(other.stack_, nullptr)),
          tid_(other.tid_),
          gen_(other.gen_),
          range_(other.range_),
          rng_(other.rng_) {}
    Handle& operator=(Handle&&) = delete;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() {
      if (stack_) stack_->registry_.release(tid_);
    }
    std::uint32_t tid() const { return tid_; }

   private:
    friend class EbStack;
    Handle(EbStack* s, std::uint32_t tid)
        : stack_(s), tid_(tid), rng_(0x9e3779b97f4a7c15ull ^ (tid + 1)) {}
    EbStack* stack_;
    std::uint32_t tid_;
    std::uint32_t gen_ = 0;
    std::uint32_t range_ = 1;  // collider slots currently in use, adapted
    std::uint64_t rng_;
  };

  Handle register_thread(std::uint32_t tid) {
    registry_.acquire(tid);
    return Handle(this, tid);
  }

  void push(Handle& h, T value) {
    auto guard = domain_.enter(h.tid_);
    Node* node = new Node(value);
    Node* observed = top_.load(std::memory_order_relaxed);
    for (;;) {
      node->next.store(observed, std::memory_order_relaxed);
      if (top_.compare_exchange_weak(observed, node, std::memory_order_release,
                                     std::memory_order_relaxed))
        return;
      if (try_exchange_push(h, value)) {
        // Somebody's pop took the value directly; the node was never
        // published, so it is ours to delete.
        delete node;
        return;
      }
      observed = top_.load(std::memory_order_relaxed);
    }
  }

  std::optional<T> pop(Handle& h) {
    auto guard = domain_.enter(h.tid_);
    for (;;) {
      Node* observed = top_.load(std::memory_order_acquire);
      if (!observed) return std::nullopt;
      Node* next = observed->next.load(std::memory_order_relaxed);
      if (top_.compare_exchange_weak(observed, next, std::memory_order_acq_rel,
                                     std::memory_order_relaxed)) {
        T value = observed->value;
#if SECSTACK_ENABLE_CHECKS
        SECSTACK_CHECK(!observed->retired.exchange(true, std::memory_order_relaxed),
                       "node retired twice");
#endif
        domain_.retire(h.tid_, observed);
        return value;
      }
      if (auto v = try_exchange_pop(h)) return v;
    }
  }

  std::optional<T> peek(Handle& h) {
    auto guard = domain_.enter(h.tid_);
    Node* observed = top_.load(std::memory_order_acquire);
    if (!observed) return std::nullopt;
    return observed->value;
  }

  // Pre-concurrency setup only; see TreiberStack::prefill.
  void prefill(const std::vector<T>& values) {
    for (const T& v : values) {
      Node* node = new Node(v);
      node->next.store(top_.load(std::memory_order_relaxed),
                       std::memory_order_relaxed);
      top_.store(node, std::memory_order_release);
    }
  }

  std::vector<T> quiescent_snapshot() const {
    std::vector<T> out;
    for (Node* n = top_.load(std::memory_order_acquire); n;
         n = n->next.load(std::memory_order_relaxed))
      out.push_back(n->value);
    return out;
  }

  // Completed elimination pairs, for instrumentation.
  std::uint64_t exchange_count() const {
    return exchanges_.load(std::memory_order_relaxed);
  }

  EpochDomain& reclamation() { return domain_; }

 private:
  friend struct EbStackProbe<T>;

  // One elimination attempt.  Returns true if a pop consumed our value.
  bool try_exchange_push(Handle& h, const T& value) {
    Cell& cell = cells_[h.tid_];
    cell.offered = value;
    return attempt(h, &value, &cell).has_value();
  }

  // One elimination attempt.  Returns the value a push handed us, if any.
  std::optional<T> try_exchange_pop(Handle& h) {
    return attempt(h, nullptr, &cells_[h.tid_]);
  }

  // Shared park/claim state machine.  `offering` is the push's value, or
  // null for a pop.  For a push the returned optional is only a success
  // flag; for a pop it carries the exchanged value.
  std::optional<T> attempt(Handle& h, const T* offering, Cell* cell) {
    const bool is_push = offering != nullptr;
    const std::uint32_t r = next_random(h) % h.range_;
    ColliderSlot& slot = collider_[r];
    std::uint64_t seen = slot.word.load(std::memory_order_acquire);
    if (seen != 0) {
      grow_range(h);
      if (word_is_push(seen) == is_push) return std::nullopt;  // same type
      return claim(seen, offering, slot);
    }
    // Empty slot: park and wait out the window.
    cell->state.store(kPending, std::memory_order_relaxed);
    const std::uint64_t mine = make_word(is_push, h.tid_, ++h.gen_);
    if (!slot.word.compare_exchange_strong(seen, mine,
                                           std::memory_order_release,
                                           std::memory_order_relaxed)) {
      grow_range(h);
      return std::nullopt;
    }
    for (std::uint32_t i = 0; i < cfg_.window_spins; ++i) {
      if (cell->state.load(std::memory_order_acquire) == kMatched)
        return finish_owner(is_push, cell);
      detail::cpu_pause();
    }
    std::uint64_t expected = mine;
    if (slot.word.compare_exchange_strong(expected, 0,
                                          std::memory_order_acq_rel,
                                          std::memory_order_relaxed)) {
      shrink_range(h);  // nobody came
      return std::nullopt;
    }
    // Withdraw lost: a matcher owns the cell and will signal; this wait
    // always terminates.
    detail::SpinWait sw;
    while (cell->state.load(std::memory_order_acquire) != kMatched) sw.wait();
    return finish_owner(is_push, cell);
  }

  // Take over a parked operation of the opposite type.  After the claim
  // CAS the partner's cell is exclusively ours until we release kMatched;
  // the partner never touches it again until it has seen that store.
  std::optional<T> claim(std::uint64_t seen, const T* offering,
                         ColliderSlot& slot) {
    if (!slot.word.compare_exchange_strong(seen, 0, std::memory_order_acq_rel,
                                           std::memory_order_relaxed))
      return std::nullopt;  // someone else got there first
    Cell& partner = cells_[word_tid(seen)];
    std::optional<T> out;
    if (offering) {
      partner.received = *offering;  // hand our value to the parked pop
      out.emplace();
    } else {
      out = partner.offered;  // take the parked push's value
    }
    partner.state.store(kMatched, std::memory_order_release);
    exchanges_.fetch_add(1, std::memory_order_relaxed);
    return out;
  }

  std::optional<T> finish_owner(bool is_push, Cell* cell) {
    std::optional<T> out;
    if (is_push)
      out.emplace();  // value was taken; flag success
    else
      out = cell->received;
    return out;
  }

  void grow_range(Handle& h) {
    const std::uint32_t max = static_cast<std::uint32_t>(collider_.size());
    if (h.range_ < max) h.range_ = h.range_ * 2 < max ? h.range_ * 2 : max;
  }

  void shrink_range(Handle& h) {
    if (h.range_ > 1) h.range_ /= 2;
  }

  static std::uint64_t next_random(Handle& h) {
    // xorshift64; only used to scatter slot choices.
    std::uint64_t x = h.rng_;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    return h.rng_ = x;
  }

  EbConfig cfg_;
  detail::ThreadRegistry registry_;
  EpochDomain domain_;
  std::vector<Cell> cells_;
  std::vector<ColliderSlot> collider_;
  alignas(64) std::atomic<Node*> top_{nullptr};
  std::atomic<std::uint64_t> exchanges_{0};
};

}  // namespace secstack
