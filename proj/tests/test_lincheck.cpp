#include "secstack/lincheck.hpp"

#include <gtest/gtest.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "support/brute_checker.hpp"

namespace {

using namespace secstack::lincheck;

Event make_event(std::uint64_t ts, std::uint32_t thr, EventKind k, OpKind op,
                 std::uint64_t arg = 0,
                 std::optional<std::uint64_t> result = std::nullopt) {
  Event e;
  e.timestamp = ts;
  e.thread = thr;
  e.kind = k;
  e.op = op;
  e.arg = arg;
  e.result = result;
  return e;
}

Event inv_push(std::uint64_t ts, std::uint32_t thr, std::uint64_t v) {
  return make_event(ts, thr, EventKind::kInvoke, OpKind::kPush, v);
}
Event res_push(std::uint64_t ts, std::uint32_t thr) {
  return make_event(ts, thr, EventKind::kResponse, OpKind::kPush);
}
Event inv_pop(std::uint64_t ts, std::uint32_t thr) {
  return make_event(ts, thr, EventKind::kInvoke, OpKind::kPop);
}
Event res_pop(std::uint64_t ts, std::uint32_t thr,
              std::optional<std::uint64_t> r) {
  return make_event(ts, thr, EventKind::kResponse, OpKind::kPop, 0, r);
}
Event inv_peek(std::uint64_t ts, std::uint32_t thr) {
  return make_event(ts, thr, EventKind::kInvoke, OpKind::kPeek);
}
Event res_peek(std::uint64_t ts, std::uint32_t thr,
               std::optional<std::uint64_t> r) {
  return make_event(ts, thr, EventKind::kResponse, OpKind::kPeek, 0, r);
}

History make_history(std::vector<Event> events,
                     std::vector<std::uint64_t> prefill = {}) {
  History h;
  h.prefill = std::move(prefill);
  h.events = std::move(events);
  return h;
}

bool same_event(const Event& a, const Event& b) {
  return a.timestamp == b.timestamp && a.thread == b.thread &&
         a.kind == b.kind && a.op == b.op && a.arg == b.arg &&
         a.result == b.result;
}

TEST(SequentialApply, StackSemantics) {
  std::vector<std::uint64_t> state;
  EXPECT_EQ(sequential_apply(state, OpKind::kPop), std::nullopt);
  EXPECT_EQ(sequential_apply(state, OpKind::kPeek), std::nullopt);
  sequential_apply(state, OpKind::kPush, 1);
  sequential_apply(state, OpKind::kPush, 2);
  EXPECT_EQ(state, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(sequential_apply(state, OpKind::kPeek), 2u);
  EXPECT_EQ(sequential_apply(state, OpKind::kPop), 2u);
  EXPECT_EQ(sequential_apply(state, OpKind::kPop), 1u);
  EXPECT_EQ(sequential_apply(state, OpKind::kPop), std::nullopt);
}

TEST(PairEvents, BuildsOperationsInInvocationOrder) {
  const History h = make_history({
      inv_push(1, 0, 7),
      inv_pop(2, 1),
      res_push(3, 0),
      res_pop(4, 1, 7),
  });
  const auto ops = pair_events(h);
  ASSERT_EQ(ops.size(), 2u);
  EXPECT_EQ(ops[0].kind, OpKind::kPush);
  EXPECT_EQ(ops[0].arg, 7u);
  EXPECT_EQ(ops[0].invoke_ts, 1u);
  EXPECT_EQ(ops[0].response_ts, 3u);
  EXPECT_EQ(ops[1].kind, OpKind::kPop);
  EXPECT_EQ(ops[1].result, 7u);
}

TEST(PairEvents, RejectsMalformedHistories) {
  EXPECT_THROW(pair_events(make_history({
                   inv_push(1, 0, 1),
                   inv_push(2, 0, 2),
               })),
               std::invalid_argument);
  EXPECT_THROW(pair_events(make_history({res_pop(1, 0, std::nullopt)})),
               std::invalid_argument);
  EXPECT_THROW(pair_events(make_history({
                   inv_push(1, 0, 1),
                   res_pop(2, 0, std::nullopt),
               })),
               std::invalid_argument);
  EXPECT_THROW(pair_events(make_history({inv_push(1, 0, 1)})),
               std::invalid_argument);
}

TEST(Checker, AcceptsEmptyHistory) {
  EXPECT_TRUE(check_linearizable(make_history({})).accepted);
}

TEST(Checker, AcceptsOverlappingPushPopPair) {
  // The pop overlaps the push, so it may linearize after it and observe
  // the value even though the push has not responded yet.
  const History h = make_history({
      inv_push(1, 0, 5),
      inv_pop(2, 1),
      res_pop(3, 1, 5),
      res_push(4, 0),
  });
  const auto r = check_linearizable(h);
  EXPECT_TRUE(r.accepted);
  const auto ops = pair_events(h);
  ASSERT_EQ(r.linearization.size(), ops.size());
  EXPECT_TRUE(brute::respects_precedence(ops, r.linearization));
  EXPECT_TRUE(brute::simulates(ops, h.prefill, r.linearization));
}

TEST(Checker, RejectsValueFromNowhere) {
  const History h = make_history({
      inv_push(1, 0, 5),
      res_push(2, 0),
      inv_pop(3, 1),
      res_pop(4, 1, 7),
  });
  const auto r = check_linearizable(h);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.best_prefix, 1u);  // the push linearizes, the pop never can
}

TEST(Checker, RejectsLifoViolation) {
  // Two completed pushes in strict sequence; a later pop must see the
  // second one first.
  const History h = make_history({
      inv_push(1, 0, 1),
      res_push(2, 0),
      inv_push(3, 0, 2),
      res_push(4, 0),
      inv_pop(5, 1),
      res_pop(6, 1, 1),
  });
  EXPECT_FALSE(check_linearizable(h).accepted);
}

TEST(Checker, RejectsEmptyPopWhenValueWasCommitted) {
  // A completed push strictly precedes the pop; empty is impossible.
  const History h = make_history({
      inv_push(1, 0, 5),
      res_push(2, 0),
      inv_pop(3, 1),
      res_pop(4, 1, std::nullopt),
  });
  EXPECT_FALSE(check_linearizable(h).accepted);
}

TEST(Checker, AcceptsEmptyPopRacingWithAnother) {
  // Two pops race for one prefilled value: one wins it, the loser may
  // linearize after and legitimately report empty.
  const History h = make_history(
      {
          inv_pop(1, 0),
          inv_pop(2, 1),
          res_pop(3, 0, std::nullopt),
          res_pop(4, 1, 10),
      },
      {10});
  EXPECT_TRUE(check_linearizable(h).accepted);
}

TEST(Checker, PrefillIsTheInitialState) {
  const History drained = make_history(
      {
          inv_pop(1, 0),
          res_pop(2, 0, 11),
          inv_pop(3, 0),
          res_pop(4, 0, 10),
      },
      {10, 11});  // bottom to top
  EXPECT_TRUE(check_linearizable(drained).accepted);

  const History ignored = make_history(
      {
          inv_pop(1, 0),
          res_pop(2, 0, std::nullopt),
      },
      {10});
  EXPECT_FALSE(check_linearizable(ignored).accepted);
}

TEST(Checker, PeekObservesWithoutConsuming) {
  const History h = make_history({
      inv_push(1, 0, 3),
      res_push(2, 0),
      inv_peek(3, 1),
      res_peek(4, 1, 3),
      inv_pop(5, 1),
      res_pop(6, 1, 3),
  });
  EXPECT_TRUE(check_linearizable(h).accepted);

  const History wrong = make_history({
      inv_push(1, 0, 3),
      res_push(2, 0),
      inv_peek(3, 1),
      res_peek(4, 1, std::nullopt),
  });
  EXPECT_FALSE(check_linearizable(wrong).accepted);
}

TEST(Checker, RefusesOversizedHistories) {
  std::vector<Event> events;
  for (std::uint64_t i = 0; i < 21; ++i) {
    events.push_back(inv_push(2 * i + 1, 0, i));
    events.push_back(res_push(2 * i + 2, 0));
  }
  EXPECT_THROW(check_linearizable(make_history(std::move(events))),
               std::length_error);
}

TEST(Checker, MutatedResultsAreRejected) {
  // Record genuine histories, then corrupt one pop/peek response to a
  // value that was never pushed and never prefilled.  No linearization
  // can produce it.
  std::uint32_t mutated = 0;
  for (std::uint64_t seed = 1; seed <= 60 && mutated < 25; ++seed) {
    RecordSpec spec;
    spec.threads = 2 + seed % 2;
    spec.total_ops = 6 + seed % 3;
    spec.prefill = seed % 3;
    spec.seed = seed * 1009;
    History h = record(spec);
    ASSERT_TRUE(check_linearizable(h).accepted) << serialize(h);
    bool did = false;
    for (auto& e : h.events) {
      if (e.kind == EventKind::kResponse && e.op != OpKind::kPush) {
        e.result = 0xDEADBEEFull;
        did = true;
        break;
      }
    }
    if (!did) continue;
    ++mutated;
    EXPECT_FALSE(check_linearizable(h).accepted)
        << "seed " << seed << " accepted a corrupted history:\n"
        << serialize(h);
  }
  EXPECT_GE(mutated, 25u);
}

TEST(Checker, AgreesWithBruteForceOnRecordedHistories) {
  std::uint32_t accepted = 0;
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    RecordSpec spec;
    spec.threads = 2 + seed % 3;
    spec.total_ops = 4 + seed % 5;  // 4..8: within permutation reach
    spec.prefill = seed % 3;
    spec.seed = seed * 7919;
    const History h = record(spec);
    const auto ops = pair_events(h);
    const auto r = check_linearizable(h);
    const bool expect = brute::check(h);
    ASSERT_EQ(r.accepted, expect) << "seed " << seed << ":\n" << serialize(h);
    if (r.accepted) {
      ++accepted;
      ASSERT_EQ(r.linearization.size(), ops.size());
      EXPECT_TRUE(brute::respects_precedence(ops, r.linearization));
      EXPECT_TRUE(brute::simulates(ops, h.prefill, r.linearization));
    }
  }
  // Recorded histories come from a real stack; every one must be
  // accepted.  The brute-force comparison above is the cross-check.
  EXPECT_EQ(accepted, 300u);
}

TEST(Checker, AgreesWithBruteForceOnMutatedHistories) {
  std::uint32_t compared = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    RecordSpec spec;
    spec.threads = 2 + seed % 3;
    spec.total_ops = 4 + seed % 5;
    spec.prefill = seed % 2;
    spec.seed = seed * 104729;
    History h = record(spec);
    // Shuffle results between responses (or blank one) so some mutants
    // stay linearizable and some do not; the brute checker is the judge.
    std::vector<Event*> responses;
    for (auto& e : h.events)
      if (e.kind == EventKind::kResponse && e.op != OpKind::kPush)
        responses.push_back(&e);
    if (responses.empty()) continue;
    Event* victim = responses[seed % responses.size()];
    switch (seed % 3) {
      case 0:
        victim->result = std::nullopt;
        break;
      case 1:
        victim->result = 77770000 + seed;
        break;
      case 2:
        victim->result =
            responses[(seed / 3) % responses.size()]->result;
        if (!victim->result) victim->result = 77770000 + seed;
        break;
    }
    ++compared;
    EXPECT_EQ(check_linearizable(h).accepted, brute::check(h))
        << "seed " << seed << ":\n"
        << serialize(h);
  }
  EXPECT_GE(compared, 150u);
}

TEST(Recorder, ProducesWellFormedHistories) {
  RecordSpec spec;
  spec.threads = 3;
  spec.total_ops = 12;
  spec.prefill = 2;
  spec.seed = 42;
  const History h = record(spec);
  EXPECT_EQ(h.prefill.size(), 2u);
  EXPECT_EQ(h.events.size(), 2 * spec.total_ops);
  for (std::size_t i = 1; i < h.events.size(); ++i)
    EXPECT_LT(h.events[i - 1].timestamp, h.events[i].timestamp);
  EXPECT_EQ(pair_events(h).size(), spec.total_ops);  // throws if malformed
}

TEST(Recorder, ValidatesSpecs) {
  RecordSpec spec;
  spec.threads = 0;
  EXPECT_THROW(record(spec), std::invalid_argument);
  spec.threads = 5;
  EXPECT_THROW(record(spec), std::invalid_argument);
  spec.threads = 2;
  spec.total_ops = 0;
  EXPECT_THROW(record(spec), std::invalid_argument);
  spec.total_ops = 15;
  EXPECT_THROW(record(spec), std::invalid_argument);
  spec.total_ops = 8;
  spec.push_pct = 70;
  spec.pop_pct = 40;
  EXPECT_THROW(record(spec), std::invalid_argument);
}

TEST(Serialization, EmitsTheDocumentedLineFormat) {
  const History h = make_history({
      inv_push(1, 0, 5),
      res_push(2, 0),
      inv_pop(3, 1),
      res_pop(4, 1, 5),
      inv_peek(5, 0),
      res_peek(6, 0, std::nullopt),
  });
  EXPECT_EQ(serialize(h),
            "t=1 thr=0 inv push 5\n"
            "t=2 thr=0 res push\n"
            "t=3 thr=1 inv pop\n"
            "t=4 thr=1 res pop -> 5\n"
            "t=5 thr=0 inv peek\n"
            "t=6 thr=0 res peek -> empty\n");
}

TEST(Serialization, RoundTripsThroughParse) {
  RecordSpec spec;
  spec.threads = 3;
  spec.total_ops = 10;
  spec.prefill = 1;
  spec.seed = 7;
  const History h = record(spec);
  History back = parse(serialize(h));
  back.prefill = h.prefill;  // the line format carries events only
  ASSERT_EQ(back.events.size(), h.events.size());
  for (std::size_t i = 0; i < h.events.size(); ++i)
    EXPECT_TRUE(same_event(back.events[i], h.events[i])) << "event " << i;
  EXPECT_EQ(check_linearizable(back).accepted,
            check_linearizable(h).accepted);
}

TEST(Serialization, ParseRejectsMalformedLines) {
  EXPECT_THROW(parse("x=1 thr=0 inv pop\n"), std::invalid_argument);
  EXPECT_THROW(parse("t=1 x=0 inv pop\n"), std::invalid_argument);
  EXPECT_THROW(parse("t=1 thr=0 bogus pop\n"), std::invalid_argument);
  EXPECT_THROW(parse("t=1 thr=0 inv jump\n"), std::invalid_argument);
  EXPECT_THROW(parse("t=1 thr=0 inv push\n"), std::invalid_argument);
  EXPECT_THROW(parse("t=1 thr=0 res pop\n"), std::invalid_argument);
  EXPECT_THROW(parse("t=1 thr=0 res pop -> \n"), std::invalid_argument);
  EXPECT_THROW(parse("t=1 thr=0 res pop -> 5 extra\n"), std::invalid_argument);
  EXPECT_TRUE(parse("").events.empty());
}

}  // namespace
