// Benchmark and validation driver for the stack implementations.
//
// Typical uses:
//   secbench --impl sec --threads 8 --aggregators 2 --push 50 --pop 50
//   secbench --impl treiber --threads 1,2,4,8 --seconds 0.5 --out sweep.csv
//   secbench --impl sec --threads 4 --lincheck 200
//
// With a list of thread counts and --out, a gnuplot-ready .dat series is
// written next to the table.  JSON output mirrors the CSV columns with
// repeats grouped by runId.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "secstack/bench/report.hpp"
#include "secstack/bench/runner.hpp"
#include "secstack/lincheck.hpp"

namespace {

std::vector<std::uint32_t> parse_list(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(static_cast<std::uint32_t>(std::stoul(item)));
  if (out.empty()) throw CLI::ValidationError("expected a number or comma list");
  return out;
}

int run_lincheck(const std::string& impl, std::uint32_t threads,
                 std::uint32_t count, std::uint64_t seed) {
  using namespace secstack::lincheck;
  const std::uint32_t use_threads = std::min(threads, 4u);
  std::uint32_t rejected = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t r = secstack::bench::detail_rng::mix64(seed ^ i);
    RecordSpec spec;
    spec.threads = std::max(1u, use_threads);
    spec.total_ops = 6 + r % 9;   // 6..14
    spec.prefill = (r >> 8) % 4;  // 0..3
    spec.seed = seed ^ (std::uint64_t{i} << 32);

    History history;
    std::vector<std::uint64_t> prefill;
    for (std::uint32_t p = 0; p < spec.prefill; ++p)
      prefill.push_back((std::uint64_t{0xFEED} << 32) | p);
    if (impl == "sec") {
      history = record(spec);
    } else if (impl == "treiber") {
      secstack::TreiberStack<std::uint64_t> stack(spec.threads);
      stack.prefill(prefill);
      history = record_with(stack, spec, prefill);
    } else {
      secstack::EbStack<std::uint64_t> stack(spec.threads);
      stack.prefill(prefill);
      history = record_with(stack, spec, prefill);
    }
    const CheckResult res = check_linearizable(history);
    if (!res.accepted) {
      ++rejected;
      std::cerr << "rejected history (seed " << spec.seed << "):\n"
                << serialize(history);
    }
  }
  std::cout << "lincheck: " << count - rejected << "/" << count
            << " histories linearizable\n";
  return rejected == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concurrent stack benchmark harness"};

  std::string impl = "sec";
  std::string threads_arg = "1";
  std::string aggregators_arg = "2";
  secstack::bench::WorkloadSpec spec;
  secstack::bench::ImplSpec impl_spec;
  std::string format = "csv";
  std::string out_path;
  std::uint32_t lincheck_count = 0;

  app.add_option("--impl", impl, "Implementation: sec | treiber | eb")
      ->check(CLI::IsMember({"sec", "treiber", "eb"}));
  app.add_option("--threads", threads_arg,
                 "Worker threads (single value or comma list for a sweep)");
  app.add_option("--aggregators", aggregators_arg,
                 "Shard count K for sec (single value or comma list)");
  app.add_option("--backoff-ns", impl_spec.backoff_ns,
                 "Freezer backoff window in nanoseconds (sec only)");
  app.add_option("--push", spec.push_pct, "Push percentage");
  app.add_option("--pop", spec.pop_pct, "Pop percentage");
  app.add_option("--peek", spec.peek_pct, "Peek percentage");
  app.add_option("--prefill", spec.prefill, "Elements pushed before the run");
  app.add_option("--seconds", spec.seconds, "Duration of one repeat");
  app.add_option("--repeats", spec.repeats, "Timed repeats per configuration");
  app.add_option("--seed", spec.seed, "Workload stream seed");
  app.add_option("--work-ns", spec.work_ns, "Simulated think time between ops");
  app.add_flag("--pin", spec.pin, "Pin worker threads to CPUs round-robin");
  app.add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", out_path, "Write results to this file (default stdout)");
  app.add_option("--lincheck", lincheck_count,
                 "Instead of benchmarking, record and check this many small "
                 "histories");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::vector<std::uint32_t> thread_counts = parse_list(threads_arg);
    const std::vector<std::uint32_t> shard_counts = parse_list(aggregators_arg);

    if (lincheck_count > 0)
      return run_lincheck(impl, thread_counts.front(), lincheck_count,
                          spec.seed);

    impl_spec.name = impl;
    impl_spec.aggregators = shard_counts.front();

    std::vector<secstack::bench::RunResult> results;
    for (std::uint32_t t : thread_counts) {
      secstack::bench::WorkloadSpec point = spec;
      point.threads = t;
      if (impl == "sec" && shard_counts.size() > 1) {
        auto sweep =
            secstack::bench::sweep_aggregators(point, impl_spec, shard_counts);
        results.insert(results.end(), sweep.begin(), sweep.end());
      } else {
        results.push_back(secstack::bench::run(point, impl_spec));
      }
    }

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) {
        std::cerr << "cannot open " << out_path << " for writing\n";
        return 1;
      }
    }
    std::ostream& out = out_path.empty() ? std::cout : file;
    if (format == "csv")
      secstack::bench::write_csv(out, results);
    else
      out << secstack::bench::to_json(results).dump(2) << '\n';

    // Thread sweeps additionally get a plottable series per run group.
    if (thread_counts.size() > 1 && !out_path.empty()) {
      std::ofstream dat(out_path + ".dat");
      std::vector<std::pair<std::uint32_t, double>> points;
      for (const auto& result : results)
        if (!result.rows.empty())
          points.emplace_back(result.rows.front().threads, result.mean_mops);
      secstack::bench::write_series(dat, impl + " throughput", points);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
