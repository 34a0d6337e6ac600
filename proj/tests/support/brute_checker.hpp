#pragma once

// Reference linearizability decision by exhaustive permutation, for
// cross-checking the search-based checker on small histories.  Usable up
// to ~8 operations (8! = 40320 candidate orders).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "secstack/lincheck.hpp"

namespace secstack::lincheck::brute {

// True when `order` respects real-time precedence: an operation that
// responded before another was invoked must come first.
inline bool respects_precedence(const std::vector<Operation>& ops,
                                const std::vector<std::size_t>& order) {
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = i + 1; j < order.size(); ++j)
      if (ops[order[j]].response_ts < ops[order[i]].invoke_ts) return false;
  return true;
}

// True when replaying `order` from the prefill reproduces every recorded
// result.
inline bool simulates(const std::vector<Operation>& ops,
                      const std::vector<std::uint64_t>& prefill,
                      const std::vector<std::size_t>& order) {
  std::vector<std::uint64_t> state = prefill;
  for (std::size_t idx : order) {
    const Operation& op = ops[idx];
    const auto got = sequential_apply(state, op.kind, op.arg);
    if (op.kind != OpKind::kPush && got != op.result) return false;
  }
  return true;
}

inline bool check(const History& h) {
  const std::vector<Operation> ops = pair_events(h);
  std::vector<std::size_t> order(ops.size());
  std::iota(order.begin(), order.end(), 0);
  do {
    if (respects_precedence(ops, order) && simulates(ops, h.prefill, order))
      return true;
  } while (std::next_permutation(order.begin(), order.end()));
  return false;
}

}  // namespace secstack::lincheck::brute
