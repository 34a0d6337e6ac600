#pragma once

#include <cstdio>
#include <cstdlib>

// Internal invariant checks.  These guard conditions the algorithms rely
// on (no double retire, elimination slots in range, ...) and abort loudly
// when violated.  They are cheap enough to keep on by default; configure
// with -DSECSTACK_ENABLE_CHECKS=0 for a pure benchmarking build.
#ifndef SECSTACK_ENABLE_CHECKS
#define SECSTACK_ENABLE_CHECKS 1
#endif

// Per-batch instrumentation (batch sizes, elimination/combining tallies).
// On by default; benchmark builds can drop it with -DSECSTACK_ENABLE_STATS=0.
#ifndef SECSTACK_ENABLE_STATS
#define SECSTACK_ENABLE_STATS 1
#endif

#if SECSTACK_ENABLE_CHECKS
#define SECSTACK_CHECK(cond, msg)                                            \
  do {                                                                       \
    if (!(cond)) {                                                           \
      std::fprintf(stderr, "secstack check failed: %s (%s:%d)\n", msg,       \
                   __FILE__, __LINE__);                                      \
      std::abort();                                                          \
    }                                                                        \
  } while (0)
#else
#define SECSTACK_CHECK(cond, msg) \
  do {                            \
  } while (0)
#endif
