#pragma once

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cstdint>
#include <cstring>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "secstack/detail/spin.hpp"
#include "secstack/sec_stack.hpp"

namespace secstack::lincheck {

enum class OpKind : std::uint8_t { kPush, kPop, kPeek };
enum class EventKind : std::uint8_t { kInvoke, kResponse };

// One invocation or response.  Timestamps come from a shared counter
// bumped immediately before an operation starts and immediately after it
// returns, so they are unique within a history and ordering two of them
// implies the corresponding real-time ordering of the operations.
struct Event {
  std::uint64_t timestamp = 0;
  std::uint32_t thread = 0;
  EventKind kind = EventKind::kInvoke;
  OpKind op = OpKind::kPush;
  std::uint64_t arg = 0;  // push invocations: the pushed value
  // Pop/peek responses: the observed value, or nullopt for empty.
  std::optional<std::uint64_t> result;
};

// A recorded run: the stack's initial content (bottom to top) plus the
// merged event stream, sorted by timestamp.
struct History {
  std::vector<std::uint64_t> prefill;
  std::vector<Event> events;
};

// A paired invoke/response.
struct Operation {
  std::uint32_t thread = 0;
  OpKind kind = OpKind::kPush;
  std::uint64_t arg = 0;
  std::optional<std::uint64_t> result;
  std::uint64_t invoke_ts = 0;
  std::uint64_t response_ts = 0;
};

// Apply one operation to a sequential stack state (bottom to top).
// Returns the operation's result: the value for pop/peek, nullopt for an
// empty pop/peek, and nullopt for push (which has no result).
inline std::optional<std::uint64_t> sequential_apply(
    std::vector<std::uint64_t>& state, OpKind op, std::uint64_t arg = 0) {
  switch (op) {
    case OpKind::kPush:
      state.push_back(arg);
      return std::nullopt;
    case OpKind::kPop: {
      if (state.empty()) return std::nullopt;
      const std::uint64_t v = state.back();
      state.pop_back();
      return v;
    }
    case OpKind::kPeek:
      if (state.empty()) return std::nullopt;
      return state.back();
  }
  return std::nullopt;
}

// Zip a history's events into operations.  Throws std::invalid_argument
// on malformed input: events of one thread must strictly alternate
// invoke/response of the same operation kind, and every invocation needs
// a response (the recorder never emits dangling invokes; anything else is
// not checkable).
inline std::vector<Operation> pair_events(const History& h) {
  std::vector<Operation> ops;
  std::vector<std::optional<std::size_t>> open;  // per thread: index into ops
  for (const Event& e : h.events) {
    if (e.thread >= open.size()) open.resize(e.thread + 1);
    auto& slot = open[e.thread];
    if (e.kind == EventKind::kInvoke) {
      if (slot) throw std::invalid_argument("invoke while operation open");
      Operation op;
      op.thread = e.thread;
      op.kind = e.op;
      op.arg = e.arg;
      op.invoke_ts = e.timestamp;
      slot = ops.size();
      ops.push_back(op);
    } else {
      if (!slot) throw std::invalid_argument("response without invoke");
      Operation& op = ops[*slot];
      if (op.kind != e.op)
        throw std::invalid_argument("response kind does not match invoke");
      op.result = e.result;
      op.response_ts = e.timestamp;
      slot.reset();
    }
  }
  for (const auto& slot : open)
    if (slot) throw std::invalid_argument("incomplete history: dangling invoke");
  return ops;
}

struct CheckResult {
  bool accepted = false;
  // When accepted: operation indices (into pair_events order) in a legal
  // linear order.  When rejected: how far the search got, for diagnostics.
  std::vector<std::size_t> linearization;
  std::size_t best_prefix = 0;
};

namespace detail_check {

class Searcher {
 public:
  Searcher(const std::vector<Operation>& ops, std::vector<std::uint64_t> init)
      : ops_(ops), stack_(std::move(init)) {}

  bool run(CheckResult& out) {
    if (dfs(0)) {
      out.linearization = order_;
      return true;
    }
    out.best_prefix = best_;
    return false;
  }

 private:
  // Depth-first search over linear extensions.  A state is the set of
  // already-linearized operations plus the resulting stack content;
  // identical states have identical futures, so dead ones are memoized.
  bool dfs(std::uint32_t mask) {
    if (mask == (std::uint32_t{1} << ops_.size()) - 1) return true;
    if (!dead_.insert(key(mask)).second) return false;
    std::uint64_t min_response = ~std::uint64_t{0};
    for (std::size_t i = 0; i < ops_.size(); ++i)
      if (!(mask & (std::uint32_t{1} << i)))
        min_response = std::min(min_response, ops_[i].response_ts);
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (mask & (std::uint32_t{1} << i)) continue;
      const Operation& op = ops_[i];
      // Real-time order: an operation may linearize next only if no
      // still-pending operation finished before it started.
      if (op.invoke_ts >= min_response) continue;
      if (!try_apply(op)) continue;
      order_.push_back(i);
      best_ = std::max(best_, order_.size());
      if (dfs(mask | (std::uint32_t{1} << i))) return true;
      order_.pop_back();
      undo(op);
    }
    return false;
  }

  bool try_apply(const Operation& op) {
    switch (op.kind) {
      case OpKind::kPush:
        stack_.push_back(op.arg);
        return true;
      case OpKind::kPop:
        if (stack_.empty()) return !op.result.has_value();
        if (op.result != std::optional<std::uint64_t>(stack_.back()))
          return false;
        stack_.pop_back();
        return true;
      case OpKind::kPeek:
        if (stack_.empty()) return !op.result.has_value();
        return op.result == std::optional<std::uint64_t>(stack_.back());
    }
    return false;
  }

  void undo(const Operation& op) {
    switch (op.kind) {
      case OpKind::kPush:
        stack_.pop_back();
        break;
      case OpKind::kPop:
        if (op.result) stack_.push_back(*op.result);
        break;
      case OpKind::kPeek:
        break;
    }
  }

  std::string key(std::uint32_t mask) const {
    std::string k(4 + stack_.size() * 8, '\0');
    std::memcpy(k.data(), &mask, 4);
    std::memcpy(k.data() + 4, stack_.data(), stack_.size() * 8);
    return k;
  }

  const std::vector<Operation>& ops_;
  std::vector<std::uint64_t> stack_;
  std::vector<std::size_t> order_;
  std::unordered_set<std::string> dead_;
  std::size_t best_ = 0;
};

}  // namespace detail_check

inline constexpr std::size_t kMaxCheckOps = 20;

// Decide whether the history is linearizable as a stack, starting from
// its prefill.  Throws std::length_error past kMaxCheckOps (the search is
// exponential) and std::invalid_argument for malformed histories.
inline CheckResult check_linearizable(const History& h) {
  const std::vector<Operation> ops = pair_events(h);
  if (ops.size() > kMaxCheckOps)
    throw std::length_error("history too large to check");
  detail_check::Searcher searcher(ops, h.prefill);
  CheckResult result;
  result.accepted = searcher.run(result);
  return result;
}

// ---- Recording ----

struct RecordSpec {
  std::uint32_t threads = 2;     // 1..4
  std::uint32_t total_ops = 8;   // across all threads, <= 14
  std::uint32_t prefill = 0;
  std::uint64_t seed = 1;
  std::uint32_t push_pct = 40;
  std::uint32_t pop_pct = 40;  // remainder peeks

  void validate() const {
    if (threads < 1 || threads > 4)
      throw std::invalid_argument("record supports 1..4 threads");
    if (total_ops == 0 || total_ops > 14)
      throw std::invalid_argument("record supports 1..14 operations");
    if (push_pct + pop_pct > 100)
      throw std::invalid_argument("op mix exceeds 100%");
  }
};

namespace detail_check {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail_check

// Run a small concurrent workload against `stack` and record it.  The
// stack must be freshly constructed with capacity for spec.threads; its
// prefill must equal `prefill` (bottom to top).  Thread t performs a
// deterministic op sequence derived from the seed, with pseudo-random
// pauses in between so repeated runs explore different interleavings.
template <class Stack>
History record_with(Stack& stack, const RecordSpec& spec,
                    std::vector<std::uint64_t> prefill) {
  spec.validate();
  History history;
  history.prefill = std::move(prefill);

  // Split total_ops across threads as evenly as possible.
  std::vector<std::uint32_t> quota(spec.threads,
                                   spec.total_ops / spec.threads);
  for (std::uint32_t i = 0; i < spec.total_ops % spec.threads; ++i)
    ++quota[i];

  std::atomic<std::uint64_t> clock{0};
  std::vector<std::vector<Event>> logs(spec.threads);
  std::barrier gate(static_cast<std::ptrdiff_t>(spec.threads));
  std::vector<std::thread> workers;
  for (std::uint32_t t = 0; t < spec.threads; ++t) {
    workers.emplace_back([&, t] {
      auto handle = stack.register_thread(t);
      auto& log = logs[t];
      log.reserve(quota[t] * 2);
      gate.arrive_and_wait();
      for (std::uint32_t i = 0; i < quota[t]; ++i) {
        const std::uint64_t r =
            detail_check::mix64(spec.seed ^ (std::uint64_t{t} << 32) ^ i);
        const std::uint32_t pick = r % 100;
        Event inv;
        inv.thread = t;
        inv.kind = EventKind::kInvoke;
        Event res;
        res.thread = t;
        res.kind = EventKind::kResponse;
        if (pick < spec.push_pct) {
          inv.op = res.op = OpKind::kPush;
          inv.arg = (std::uint64_t{t + 1} << 32) | i;
          inv.timestamp = clock.fetch_add(1);
          stack.push(handle, inv.arg);
          res.timestamp = clock.fetch_add(1);
        } else if (pick < spec.push_pct + spec.pop_pct) {
          inv.op = res.op = OpKind::kPop;
          inv.timestamp = clock.fetch_add(1);
          res.result = stack.pop(handle);
          res.timestamp = clock.fetch_add(1);
        } else {
          inv.op = res.op = OpKind::kPeek;
          inv.timestamp = clock.fetch_add(1);
          res.result = stack.peek(handle);
          res.timestamp = clock.fetch_add(1);
        }
        log.push_back(inv);
        log.push_back(res);
        // Pseudo-random pause so interleavings vary run to run.
        const std::uint64_t jitter = (r >> 32) % 4;
        if (jitter == 0)
          std::this_thread::yield();
        else
          for (std::uint64_t k = 0; k < jitter * 40; ++k) detail::cpu_pause();
      }
    });
  }
  for (auto& w : workers) w.join();

  for (auto& log : logs)
    history.events.insert(history.events.end(), log.begin(), log.end());
  std::sort(history.events.begin(), history.events.end(),
            [](const Event& a, const Event& b) {
              return a.timestamp < b.timestamp;
            });
  return history;
}

// Record against a fresh sharded stack (two aggregators when the thread
// count allows).
inline History record(const RecordSpec& spec) {
  spec.validate();
  Config cfg;
  cfg.num_threads = spec.threads;
  cfg.num_aggregators = spec.threads >= 2 ? 2 : 1;
  SecStack<std::uint64_t> stack(cfg);
  std::vector<std::uint64_t> prefill;
  for (std::uint32_t i = 0; i < spec.prefill; ++i)
    prefill.push_back((std::uint64_t{0xFEED} << 32) | i);
  stack.prefill(prefill);
  return record_with(stack, spec, std::move(prefill));
}

// ---- Serialization ----
//
// One event per line:
//   t=<ts> thr=<id> <inv|res> <push v|pop|peek> [-> <result|empty>]
// Push invocations carry the value inline; pop/peek responses carry the
// observed result after the arrow; push responses are bare acks.

inline std::string serialize(const History& h) {
  std::ostringstream out;
  for (const Event& e : h.events) {
    out << "t=" << e.timestamp << " thr=" << e.thread << ' '
        << (e.kind == EventKind::kInvoke ? "inv" : "res") << ' ';
    switch (e.op) {
      case OpKind::kPush:
        out << "push";
        if (e.kind == EventKind::kInvoke) out << ' ' << e.arg;
        break;
      case OpKind::kPop:
        out << "pop";
        break;
      case OpKind::kPeek:
        out << "peek";
        break;
    }
    if (e.kind == EventKind::kResponse && e.op != OpKind::kPush) {
      out << " -> ";
      if (e.result)
        out << *e.result;
      else
        out << "empty";
    }
    out << '\n';
  }
  return out.str();
}

inline History parse(const std::string& text) {
  History h;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("history line " + std::to_string(lineno) +
                                ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    Event e;
    if (!(ls >> tok) || tok.rfind("t=", 0) != 0) fail("expected t=<ts>");
    e.timestamp = std::stoull(tok.substr(2));
    if (!(ls >> tok) || tok.rfind("thr=", 0) != 0) fail("expected thr=<id>");
    e.thread = static_cast<std::uint32_t>(std::stoul(tok.substr(4)));
    if (!(ls >> tok)) fail("expected inv|res");
    if (tok == "inv")
      e.kind = EventKind::kInvoke;
    else if (tok == "res")
      e.kind = EventKind::kResponse;
    else
      fail("expected inv|res");
    if (!(ls >> tok)) fail("expected op");
    if (tok == "push") {
      e.op = OpKind::kPush;
      if (e.kind == EventKind::kInvoke) {
        if (!(ls >> tok)) fail("push invoke needs a value");
        e.arg = std::stoull(tok);
      }
    } else if (tok == "pop") {
      e.op = OpKind::kPop;
    } else if (tok == "peek") {
      e.op = OpKind::kPeek;
    } else {
      fail("unknown op " + tok);
    }
    if (e.kind == EventKind::kResponse && e.op != OpKind::kPush) {
      if (!(ls >> tok) || tok != "->") fail("expected ->");
      if (!(ls >> tok)) fail("expected result");
      if (tok != "empty") e.result = std::stoull(tok);
    }
    if (ls >> tok) fail("trailing token " + tok);
    h.events.push_back(e);
  }
  return h;
}

}  // namespace secstack::lincheck
