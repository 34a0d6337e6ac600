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

// The classic lock-free stack: a single top pointer updated by CAS.
// Baseline for the sharded stack, sharing the same registration and
// reclamation machinery so comparisons measure the algorithm, not the
// plumbing.  Epoch guards around pop/peek rule out both use-after-free
// and the CAS ABA (a node's address cannot be reused while any thread
// that could still compare against it holds a guard).
template <typename T = std::uint64_t>
class TreiberStack {
  struct Node {
    T value;
    std::atomic<Node*> next{nullptr};
#if SECSTACK_ENABLE_CHECKS
    std::atomic<bool> retired{false};
#endif
    explicit Node(T v) : value(std::move(v)) {}
  };

 public:
  explicit TreiberStack(std::uint32_t num_threads)
      : registry_(num_threads), domain_(num_threads) {}

  TreiberStack(const TreiberStack&) = delete;
  TreiberStack& operator=(const TreiberStack&) = delete;

  ~TreiberStack() {
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
        : stack_(std::exchange(other.stack_, nullptr)), tid_(other.tid_) {}
    Handle& operator=(Handle&&) = delete;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() {
      if (stack_) stack_->registry_.release(tid_);
    }
    std::uint32_t tid() const { return tid_; }

   private:
    friend class TreiberStack;
    Handle(TreiberStack* s, std::uint32_t tid) : stack_(s), tid_(tid) {}
    TreiberStack* stack_;
    std::uint32_t tid_;
  };

  Handle register_thread(std::uint32_t tid) {
    registry_.acquire(tid);
    return Handle(this, tid);
  }

  void push(Handle& h, T value) {
    auto guard = domain_.enter(h.tid());
    Node* node = new Node(std::move(value));
    Node* observed = top_.load(std::memory_order_relaxed);
    detail::SpinWait sw;
    for (;;) {
      node->next.store(observed, std::memory_order_relaxed);
      if (top_.compare_exchange_weak(observed, node, std::memory_order_release,
                                     std::memory_order_relaxed))
        return;
      sw.wait();
    }
  }

  std::optional<T> pop(Handle& h) {
    auto guard = domain_.enter(h.tid());
    detail::SpinWait sw;
    for (;;) {
      Node* observed = top_.load(std::memory_order_acquire);
      if (!observed) return std::nullopt;
      Node* next = observed->next.load(std::memory_order_relaxed);
      if (top_.compare_exchange_weak(observed, next, std::memory_order_acq_rel,
                                     std::memory_order_relaxed)) {
        T value = std::move(observed->value);
#if SECSTACK_ENABLE_CHECKS
        SECSTACK_CHECK(!observed->retired.exchange(true, std::memory_order_relaxed),
                       "node retired twice");
#endif
        domain_.retire(h.tid(), observed);
        return value;
      }
      sw.wait();
    }
  }

  std::optional<T> peek(Handle& h) {
    auto guard = domain_.enter(h.tid());
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

  EpochDomain& reclamation() { return domain_; }

 private:
  alignas(64) std::atomic<Node*> top_{nullptr};
  detail::ThreadRegistry registry_;
  EpochDomain domain_;
};

}  // namespace secstack
