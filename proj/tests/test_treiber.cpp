#include "secstack/treiber_stack.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <barrier>
#include <thread>
#include <vector>

#include "secstack/lincheck.hpp"

namespace {

using Stack = secstack::TreiberStack<std::uint64_t>;

TEST(Treiber, LifoOrder) {
  Stack s(1);
  auto h = s.register_thread(0);
  for (std::uint64_t v = 1; v <= 5; ++v) s.push(h, v);
  for (std::uint64_t v = 5; v >= 1; --v) EXPECT_EQ(s.pop(h), v);
  EXPECT_EQ(s.pop(h), std::nullopt);
}

TEST(Treiber, PeekDoesNotConsume) {
  Stack s(1);
  auto h = s.register_thread(0);
  EXPECT_EQ(s.peek(h), std::nullopt);
  s.push(h, 42);
  EXPECT_EQ(s.peek(h), 42u);
  EXPECT_EQ(s.peek(h), 42u);
  EXPECT_EQ(s.pop(h), 42u);
}

TEST(Treiber, PrefillLastElementOnTop) {
  Stack s(1);
  s.prefill({1, 2, 3});
  EXPECT_EQ(s.quiescent_snapshot(), (std::vector<std::uint64_t>{3, 2, 1}));
}

TEST(Treiber, RegistrationErrors) {
  Stack s(2);
  auto h0 = s.register_thread(0);
  EXPECT_THROW(s.register_thread(0), std::invalid_argument);
  EXPECT_THROW(s.register_thread(2), std::out_of_range);
  {
    auto h1 = s.register_thread(1);
  }
  EXPECT_NO_THROW(s.register_thread(1));  // released by handle destruction
}

TEST(Treiber, ConcurrentConservation) {
  constexpr std::uint32_t kThreads = 4;
  constexpr std::uint64_t kOps = 20000;
  Stack s(kThreads);
  std::vector<std::vector<std::uint64_t>> popped(kThreads);
  std::barrier gate(kThreads);
  std::vector<std::thread> workers;
  for (std::uint32_t t = 0; t < kThreads; ++t) {
    workers.emplace_back([&, t] {
      auto h = s.register_thread(t);
      gate.arrive_and_wait();
      for (std::uint64_t i = 0; i < kOps; ++i) {
        if ((i ^ t) & 1) {
          s.push(h, (std::uint64_t{t + 1} << 32) | i);
        } else if (auto v = s.pop(h)) {
          popped[t].push_back(*v);
        }
      }
    });
  }
  for (auto& w : workers) w.join();

  std::vector<std::uint64_t> seen;
  for (auto& p : popped) seen.insert(seen.end(), p.begin(), p.end());
  const auto rest = s.quiescent_snapshot();
  seen.insert(seen.end(), rest.begin(), rest.end());
  std::sort(seen.begin(), seen.end());
  EXPECT_TRUE(std::adjacent_find(seen.begin(), seen.end()) == seen.end())
      << "a value was popped twice or left duplicated";
  // Every pushed value is accounted for: popped exactly once or still in
  // the stack.
  std::uint64_t pushed = 0;
  for (std::uint32_t t = 0; t < kThreads; ++t)
    for (std::uint64_t i = 0; i < kOps; ++i)
      if ((i ^ t) & 1) ++pushed;
  EXPECT_EQ(seen.size(), pushed);
}

TEST(Treiber, SmallHistoriesLinearizable) {
  using namespace secstack::lincheck;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    RecordSpec spec;
    spec.threads = 2 + seed % 3;
    spec.total_ops = 8 + seed % 5;
    spec.prefill = seed % 3;
    spec.seed = seed * 77;
    Stack stack(spec.threads);
    std::vector<std::uint64_t> prefill;
    for (std::uint32_t i = 0; i < spec.prefill; ++i)
      prefill.push_back(900 + i);
    stack.prefill(prefill);
    History h = record_with(stack, spec, prefill);
    EXPECT_TRUE(check_linearizable(h).accepted)
        << "seed " << seed << ":\n"
        << serialize(h);
  }
}

}  // namespace
