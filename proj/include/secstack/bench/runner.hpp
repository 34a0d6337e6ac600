#pragma once

#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "secstack/bench/workload.hpp"
#include "secstack/detail/spin.hpp"
#include "secstack/eb_stack.hpp"
#include "secstack/sec_stack.hpp"
#include "secstack/treiber_stack.hpp"

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

namespace secstack::bench {

// One repeat's worth of results.  Optional metrics are only present for
// implementations that expose the underlying instrumentation; emitters
// leave them out rather than writing zeros.
struct RunRow {
  std::string impl;
  std::uint32_t threads = 0;
  std::optional<std::uint32_t> aggregators;
  std::uint32_t push_pct = 0;
  std::uint32_t pop_pct = 0;
  std::uint32_t peek_pct = 0;
  std::uint32_t prefill = 0;
  double seconds = 0;
  std::uint64_t seed = 0;
  std::uint32_t repeat = 0;
  double throughput_mops = 0;
  std::uint64_t total_ops = 0;
  std::optional<double> batching_degree;
  std::optional<double> elim_pct;
  std::optional<double> comb_pct;
};

struct RunResult {
  std::string run_id;
  std::vector<RunRow> rows;
  double mean_mops = 0;
  double var_mops = 0;  // population variance across repeats
};

namespace detail_run {

inline void pin_to_cpu(std::uint32_t index) {
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  const unsigned ncpu = std::max(1u, std::thread::hardware_concurrency());
  CPU_SET(index % ncpu, &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
#else
  (void)index;
#endif
}

inline void simulate_work(std::uint64_t ns) {
  if (ns == 0) return;
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::nanoseconds(ns);
  while (std::chrono::steady_clock::now() < deadline) detail::cpu_pause();
}

// Identifies a (spec, impl) combination; repeats of the same combination
// share it.  Deliberately deterministic so identical invocations emit
// identical reports.
inline std::string make_run_id(const WorkloadSpec& spec, const ImplSpec& impl,
                               std::optional<std::uint32_t> aggregators) {
  std::ostringstream id;
  id << impl.name << "-t" << spec.threads;
  if (aggregators) id << "-K" << *aggregators;
  id << "-m" << spec.push_pct << '.' << spec.pop_pct << '.' << spec.peek_pct
     << "-p" << spec.prefill << "-d" << spec.seconds << "-s" << spec.seed;
  return id.str();
}

// Drive one timed round against a fresh stack.  Returns ops completed per
// thread plus the measured wall time of the window.
template <class Stack>
std::uint64_t one_round(Stack& stack, const WorkloadSpec& spec,
                        double& wall_seconds) {
  std::vector<std::uint64_t> prefill;
  prefill.reserve(spec.prefill);
  for (std::uint32_t i = 0; i < spec.prefill; ++i)
    prefill.push_back(prefill_value(i));
  stack.prefill(prefill);

  std::barrier gate(static_cast<std::ptrdiff_t>(spec.threads) + 1);
  std::atomic<bool> stop{false};
  std::vector<std::uint64_t> done(spec.threads, 0);
  std::vector<std::thread> workers;
  for (std::uint32_t t = 0; t < spec.threads; ++t) {
    workers.emplace_back([&, t] {
      if (spec.pin) pin_to_cpu(t);
      auto handle = stack.register_thread(t);
      gate.arrive_and_wait();
      std::uint64_t i = 0;
      while (!stop.load(std::memory_order_relaxed)) {
        switch (op_at(spec, t, i)) {
          case WorkOp::kPush:
            stack.push(handle, value_at(t, i));
            break;
          case WorkOp::kPop:
            stack.pop(handle);
            break;
          case WorkOp::kPeek:
            stack.peek(handle);
            break;
        }
        ++i;
        simulate_work(spec.work_ns);
      }
      done[t] = i;
    });
  }
  gate.arrive_and_wait();
  const auto t0 = std::chrono::steady_clock::now();
  std::this_thread::sleep_for(std::chrono::duration<double>(spec.seconds));
  stop.store(true, std::memory_order_relaxed);
  const auto t1 = std::chrono::steady_clock::now();
  for (auto& w : workers) w.join();
  wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  std::uint64_t total = 0;
  for (std::uint64_t d : done) total += d;
  return total;
}

template <class MakeStack>
RunResult run_rounds(const WorkloadSpec& spec, const ImplSpec& impl,
                     std::optional<std::uint32_t> aggregators,
                     MakeStack make_stack) {
  RunResult result;
  result.run_id = make_run_id(spec, impl, aggregators);
  for (std::uint32_t rep = 0; rep < spec.repeats; ++rep) {
    auto stack = make_stack();
    double wall = 0;
    const std::uint64_t ops = one_round(*stack, spec, wall);
    RunRow row;
    row.impl = impl.name;
    row.threads = spec.threads;
    row.aggregators = aggregators;
    row.push_pct = spec.push_pct;
    row.pop_pct = spec.pop_pct;
    row.peek_pct = spec.peek_pct;
    row.prefill = spec.prefill;
    row.seconds = spec.seconds;
    row.seed = spec.seed;
    row.repeat = rep;
    row.total_ops = ops;
    row.throughput_mops = wall > 0 ? ops / wall / 1e6 : 0;
    if constexpr (requires { stack->stats(); }) {
      const SecStats s = stack->stats();
      if (s.batches > 0 && s.ops_included > 0) {
        row.batching_degree = double(s.ops_included) / double(s.batches);
        row.elim_pct = 100.0 * double(s.eliminated) / double(s.ops_included);
        row.comb_pct = 100.0 * double(s.combined) / double(s.ops_included);
      }
    }
    result.rows.push_back(row);
  }
  double sum = 0;
  for (const RunRow& r : result.rows) sum += r.throughput_mops;
  result.mean_mops = sum / result.rows.size();
  double acc = 0;
  for (const RunRow& r : result.rows) {
    const double d = r.throughput_mops - result.mean_mops;
    acc += d * d;
  }
  result.var_mops = acc / result.rows.size();
  return result;
}

}  // namespace detail_run

// Run `spec.repeats` timed rounds of the workload against the chosen
// implementation, each on a fresh stack.  A shard count above the thread
// count cannot be honored (aggregators map onto thread-id blocks) and is
// clamped with a warning.
inline RunResult run(const WorkloadSpec& spec, const ImplSpec& impl) {
  spec.validate();
  if (impl.name == "sec") {
    std::uint32_t k = impl.aggregators;
    if (k > spec.threads) {
      std::cerr << "warning: aggregators " << k << " exceeds threads "
                << spec.threads << "; clamping to " << spec.threads << "\n";
      k = spec.threads;
    }
    if (k == 0) k = 1;
    Config cfg;
    cfg.num_threads = spec.threads;
    cfg.num_aggregators = k;
    cfg.freezer_backoff_ns = impl.backoff_ns;
    return detail_run::run_rounds(spec, impl, k, [cfg] {
      return std::make_unique<SecStack<std::uint64_t>>(cfg);
    });
  }
  if (impl.name == "treiber") {
    const std::uint32_t n = spec.threads;
    return detail_run::run_rounds(spec, impl, std::nullopt, [n] {
      return std::make_unique<TreiberStack<std::uint64_t>>(n);
    });
  }
  if (impl.name == "eb") {
    const std::uint32_t n = spec.threads;
    return detail_run::run_rounds(spec, impl, std::nullopt, [n] {
      return std::make_unique<EbStack<std::uint64_t>>(n);
    });
  }
  throw std::invalid_argument("unknown implementation: " + impl.name);
}

// Run the same workload at several shard counts.
inline std::vector<RunResult> sweep_aggregators(
    const WorkloadSpec& spec, const ImplSpec& base,
    const std::vector<std::uint32_t>& shard_counts) {
  std::vector<RunResult> out;
  for (std::uint32_t k : shard_counts) {
    ImplSpec impl = base;
    impl.name = "sec";
    impl.aggregators = k;
    out.push_back(run(spec, impl));
  }
  return out;
}

}  // namespace secstack::bench
