#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "secstack/config.hpp"
#include "secstack/detail/check.hpp"
#include "secstack/detail/registry.hpp"
#include "secstack/detail/spin.hpp"
#include "secstack/reclamation.hpp"

namespace secstack {

template <typename T>
struct SecStackProbe;

// Aggregate counters, accumulated once per frozen batch by the freezer.
struct SecStats {
  std::uint64_t batches = 0;       // batches frozen
  std::uint64_t ops_included = 0;  // announcements that made the freeze cut
  std::uint64_t eliminated = 0;    // ops paired off inside a batch
  std::uint64_t combined = 0;      // ops applied to the shared stack
  std::uint64_t batches_retired = 0;
  std::uint64_t invariant_violations = 0;
  // Reclamation mirror, for bounded-memory monitoring.
  std::uint64_t reclaim_retired = 0;
  std::uint64_t reclaim_freed = 0;
  std::uint64_t reclaim_pending = 0;
};

// A linearizable stack that shards announcement traffic across K
// aggregators.  Threads announce push/pop operations into their
// aggregator's current batch by fetch&increment on per-type counters; the
// first announcer of a batch freezes it (after a short backoff window
// that lets others pile in), at which point equal-numbered push/pop pairs
// eliminate against each other and the surplus of one type is applied to
// the shared Treiber-style stack by a single combiner with one CAS.
//
// Values are copied out of nodes (never moved): a node unlinked by a
// combiner can still be examined by a concurrent peek that read the old
// top pointer, so consuming reads must not mutate.  T must be copyable.
template <typename T = std::uint64_t>
class SecStack {
  struct Node {
    T value;
    std::atomic<Node*> next{nullptr};
#if SECSTACK_ENABLE_CHECKS
    std::atomic<bool> retired{false};
#endif
    explicit Node(T v) : value(std::move(v)) {}
  };

  struct Batch {
    // Announcement counters, hammered by every thread of the shard.
    alignas(64) std::atomic<std::uint64_t> push_count{0};
    alignas(64) std::atomic<std::uint64_t> pop_count{0};
    alignas(64) std::atomic<bool> freezer_decided{false};
    alignas(64) std::atomic<bool> batch_applied{false};
    // Snapshots written by the freezer before it publishes the
    // replacement batch; read by everyone after observing that publish.
    std::uint64_t push_count_at_freeze = 0;
    std::uint64_t pop_count_at_freeze = 0;
    // Head of the chain a pop-combiner removed, for offset reads.
    // Written before batch_applied is released.
    Node* sub_stack_top = nullptr;
    std::unique_ptr<std::atomic<Node*>[]> slots;
#if SECSTACK_ENABLE_CHECKS
    std::atomic<std::uint32_t> freezer_entries{0};
    std::atomic<std::uint32_t> combiner_entries{0};
    std::atomic<bool> retired{false};
#endif
    explicit Batch(std::uint32_t capacity)
        : slots(new std::atomic<Node*>[capacity]) {
      for (std::uint32_t i = 0; i < capacity; ++i)
        slots[i].store(nullptr, std::memory_order_relaxed);
    }
  };

  struct alignas(64) Aggregator {
    std::atomic<Batch*> batch{nullptr};
  };

 public:
  explicit SecStack(Config cfg)
      : cfg_(validated(std::move(cfg))),
        slots_per_agg_(cfg_.slots_per_aggregator()),
        registry_(cfg_.num_threads),
        domain_(cfg_.num_threads, cfg_.reclaim),
        aggs_(cfg_.num_aggregators) {
    for (auto& agg : aggs_)
      agg.batch.store(new Batch(slots_per_agg_), std::memory_order_relaxed);
  }

  SecStack(const SecStack&) = delete;
  SecStack& operator=(const SecStack&) = delete;

  ~SecStack() {
    for (auto& agg : aggs_) delete agg.batch.load(std::memory_order_relaxed);
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
          agg_(other.agg_) {}
    Handle& operator=(Handle&&) = delete;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() {
      if (stack_) stack_->registry_.release(tid_);
    }
    std::uint32_t tid() const { return tid_; }

   private:
    friend class SecStack;
    friend struct SecStackProbe<T>;
    Handle(SecStack* s, std::uint32_t tid, std::uint32_t agg)
        : stack_(s), tid_(tid), agg_(agg) {}
    SecStack* stack_;
    std::uint32_t tid_;
    std::uint32_t agg_;  // tid / slots_per_aggregator
  };

  // Thread ids partition into contiguous blocks of ceil(N/K): ids
  // [0, P) go to aggregator 0, [P, 2P) to aggregator 1, and so on.
  Handle register_thread(std::uint32_t tid) {
    registry_.acquire(tid);
    return Handle(this, tid, tid / slots_per_agg_);
  }

  void push(Handle& h, T value) {
    auto guard = domain_.enter(h.tid_);
    Aggregator& agg = aggs_[h.agg_];
    Node* node = new Node(std::move(value));
    for (;;) {
      Batch* b = agg.batch.load(std::memory_order_acquire);
      const std::uint64_t seq =
          b->push_count.fetch_add(1, std::memory_order_relaxed);
      SECSTACK_CHECK(seq < slots_per_agg_, "push announcement out of range");
      b->slots[seq].store(node, std::memory_order_release);
      freezing_block(agg, b, seq, h.tid_);
      if (seq >= b->push_count_at_freeze) continue;  // missed the cut; retry
      if (seq < b->pop_count_at_freeze) return;      // eliminated: pop #seq consumes it
      if (seq == b->pop_count_at_freeze) {
        enter_combiner(b);
        push_to_stack(b, seq);
        b->batch_applied.store(true, std::memory_order_release);
        retire_batch(h, b);
      } else {
        wait_applied(b);
      }
      return;
    }
  }

  std::optional<T> pop(Handle& h) {
    auto guard = domain_.enter(h.tid_);
    Aggregator& agg = aggs_[h.agg_];
    for (;;) {
      Batch* b = agg.batch.load(std::memory_order_acquire);
      const std::uint64_t seq =
          b->pop_count.fetch_add(1, std::memory_order_relaxed);
      freezing_block(agg, b, seq, h.tid_);
      if (seq >= b->pop_count_at_freeze) continue;  // missed the cut; retry
      if (seq < b->push_count_at_freeze) {
        // Eliminated: take the value of push #seq and own its node.
        detail::SpinWait sw;
        Node* n;
        while (!(n = b->slots[seq].load(std::memory_order_acquire))) sw.wait();
        T value = n->value;
        retire_node(h, n);
        return value;
      }
      if (seq == b->push_count_at_freeze) {
        enter_combiner(b);
        pop_from_stack(b, seq);
        b->batch_applied.store(true, std::memory_order_release);
        Node* n = get_value(b, 0);
        std::optional<T> out;
        if (n) {
          out = n->value;
          retire_node(h, n);
        }
        retire_batch(h, b);
        return out;
      }
      wait_applied(b);
      Node* n = get_value(b, seq - b->push_count_at_freeze);
      if (!n) return std::nullopt;
      T value = n->value;
      retire_node(h, n);
      return value;
    }
  }

  std::optional<T> peek(Handle& h) {
    auto guard = domain_.enter(h.tid_);
    Node* observed = top_.load(std::memory_order_acquire);
    if (!observed) return std::nullopt;
    return observed->value;
  }

  // Pre-concurrency setup only: pushes `values` in order, so the last
  // element ends up on top.  Must not race with any other operation.
  void prefill(const std::vector<T>& values) {
    for (const T& v : values) {
      Node* node = new Node(v);
      node->next.store(top_.load(std::memory_order_relaxed),
                       std::memory_order_relaxed);
      top_.store(node, std::memory_order_release);
    }
  }

  // Caller guarantees no concurrent operations.  Returns values from top
  // to bottom.
  std::vector<T> quiescent_snapshot() const {
    std::vector<T> out;
    for (Node* n = top_.load(std::memory_order_acquire); n;
         n = n->next.load(std::memory_order_relaxed))
      out.push_back(n->value);
    return out;
  }

  SecStats stats() const {
    SecStats s;
    s.batches = batches_.load(std::memory_order_relaxed);
    s.ops_included = included_.load(std::memory_order_relaxed);
    s.eliminated = eliminated_.load(std::memory_order_relaxed);
    s.combined = combined_.load(std::memory_order_relaxed);
    s.batches_retired = batches_retired_.load(std::memory_order_relaxed);
    s.invariant_violations = violations_.load(std::memory_order_relaxed);
    s.reclaim_retired = domain_.retired_total();
    s.reclaim_freed = domain_.freed_total();
    s.reclaim_pending = domain_.pending();
    return s;
  }

  const Config& config() const { return cfg_; }
  EpochDomain& reclamation() { return domain_; }

 private:
  friend struct SecStackProbe<T>;

  // Rejects invalid configurations before any field computes with them
  // (slots_per_aggregator divides by the shard count).
  static Config validated(Config cfg) {
    cfg.validate();
    return cfg;
  }

  // Decide the batch's freezer.  The first announcer of either type (its
  // sequence number is 0) contends on the test&set; the winner freezes
  // the batch, everyone else waits until the replacement batch is
  // published.  On return the batch is frozen and its snapshots are
  // readable.
  void freezing_block(Aggregator& agg, Batch* b, std::uint64_t seq,
                      std::uint32_t slot) {
    if (seq == 0 &&
        !b->freezer_decided.exchange(true, std::memory_order_acq_rel)) {
#if SECSTACK_ENABLE_CHECKS
      if (b->freezer_entries.fetch_add(1, std::memory_order_relaxed) != 0)
        violations_.fetch_add(1, std::memory_order_relaxed);
#endif
      freeze_batch(agg, b, slot);
      return;
    }
    detail::SpinWait sw;
    while (agg.batch.load(std::memory_order_acquire) == b) sw.wait();
  }

  // Freezer-only.  Waits out the backoff window so concurrent operations
  // can announce, snapshots the counters, and installs a fresh batch.
  // The release store of the new batch is what publishes the snapshots.
  void freeze_batch(Aggregator& agg, Batch* b, std::uint32_t slot) {
    detail::backoff_spin(std::chrono::nanoseconds(cfg_.freezer_backoff_ns));
    const std::uint64_t pop_f = b->pop_count.load(std::memory_order_relaxed);
    b->pop_count_at_freeze = pop_f;
    const std::uint64_t push_f = b->push_count.load(std::memory_order_relaxed);
    b->push_count_at_freeze = push_f;
    agg.batch.store(new Batch(slots_per_agg_), std::memory_order_release);
#if SECSTACK_ENABLE_STATS
    const std::uint64_t lo = push_f < pop_f ? push_f : pop_f;
    const std::uint64_t hi = push_f < pop_f ? pop_f : push_f;
    batches_.fetch_add(1, std::memory_order_relaxed);
    included_.fetch_add(push_f + pop_f, std::memory_order_relaxed);
    eliminated_.fetch_add(2 * lo, std::memory_order_relaxed);
    combined_.fetch_add(hi - lo, std::memory_order_relaxed);
#endif
    // Fully eliminated batches have no combiner; the freezer retires.
    if (push_f == pop_f) retire_batch_at(b, slot);
  }

  // Splice all non-eliminated pushes onto the stack with one CAS.  The
  // combiner holds sequence number equal to pop_count_at_freeze; higher
  // sequence numbers stack on top of it in order, so the largest ends up
  // topmost.
  void push_to_stack(Batch* b, std::uint64_t combiner_seq) {
    Node* bottom = b->slots[combiner_seq].load(std::memory_order_relaxed);
    Node* top = bottom;
    for (std::uint64_t i = combiner_seq + 1; i < b->push_count_at_freeze; ++i) {
      detail::SpinWait sw;
      Node* n;
      while (!(n = b->slots[i].load(std::memory_order_acquire))) sw.wait();
      n->next.store(top, std::memory_order_relaxed);
      top = n;
    }
    Node* observed = top_.load(std::memory_order_relaxed);
    detail::SpinWait sw;
    for (;;) {
      bottom->next.store(observed, std::memory_order_relaxed);
      if (top_.compare_exchange_weak(observed, top, std::memory_order_release,
                                     std::memory_order_relaxed))
        return;
      sw.wait();
    }
  }

  // Remove one node per non-eliminated pop (fewer if the stack runs out)
  // with one CAS, and publish the removed chain for offset reads.  The
  // walk restarts from the freshly observed top after a failed CAS.
  void pop_from_stack(Batch* b, std::uint64_t combiner_seq) {
    const std::uint64_t want = b->pop_count_at_freeze - combiner_seq;
    Node* observed = top_.load(std::memory_order_acquire);
    detail::SpinWait sw;
    for (;;) {
      Node* new_top = observed;
      for (std::uint64_t walked = 0; walked < want && new_top; ++walked)
        new_top = new_top->next.load(std::memory_order_relaxed);
      if (top_.compare_exchange_weak(observed, new_top,
                                     std::memory_order_acq_rel,
                                     std::memory_order_acquire)) {
        b->sub_stack_top = observed;
        return;
      }
      sw.wait();
    }
  }

  // Walk `offset` links into the removed chain.  Null means the stack ran
  // out before reaching this pop's node: the operation reports empty.
  Node* get_value(Batch* b, std::uint64_t offset) {
    Node* n = b->sub_stack_top;
    for (std::uint64_t i = 0; i < offset && n; ++i)
      n = n->next.load(std::memory_order_relaxed);
    return n;
  }

  void wait_applied(Batch* b) {
    detail::SpinWait sw;
    while (!b->batch_applied.load(std::memory_order_acquire)) sw.wait();
  }

  void enter_combiner(Batch* b) {
#if SECSTACK_ENABLE_CHECKS
    if (b->combiner_entries.fetch_add(1, std::memory_order_relaxed) != 0)
      violations_.fetch_add(1, std::memory_order_relaxed);
#else
    (void)b;
#endif
  }

  void retire_node(Handle& h, Node* n) {
#if SECSTACK_ENABLE_CHECKS
    SECSTACK_CHECK(!n->retired.exchange(true, std::memory_order_relaxed),
                   "node retired twice");
#endif
    domain_.retire(h.tid_, n);
  }

  void retire_batch(Handle& h, Batch* b) { retire_batch_at(b, h.tid_); }

  void retire_batch_at(Batch* b, std::uint32_t slot) {
#if SECSTACK_ENABLE_CHECKS
    const std::uint32_t expected_combiners =
        b->push_count_at_freeze != b->pop_count_at_freeze ? 1 : 0;
    if (b->freezer_entries.load(std::memory_order_relaxed) != 1 ||
        b->combiner_entries.load(std::memory_order_relaxed) !=
            expected_combiners)
      violations_.fetch_add(1, std::memory_order_relaxed);
    SECSTACK_CHECK(!b->retired.exchange(true, std::memory_order_relaxed),
                   "batch retired twice");
#endif
    batches_retired_.fetch_add(1, std::memory_order_relaxed);
    domain_.retire(slot, b);
  }

  Config cfg_;
  std::uint32_t slots_per_agg_;
  detail::ThreadRegistry registry_;
  EpochDomain domain_;
  std::vector<Aggregator> aggs_;
  alignas(64) std::atomic<Node*> top_{nullptr};

  std::atomic<std::uint64_t> batches_{0};
  std::atomic<std::uint64_t> included_{0};
  std::atomic<std::uint64_t> eliminated_{0};
  std::atomic<std::uint64_t> combined_{0};
  std::atomic<std::uint64_t> batches_retired_{0};
  std::atomic<std::uint64_t> violations_{0};
};

}  // namespace secstack
