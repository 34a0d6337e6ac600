#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "secstack/bench/runner.hpp"

namespace secstack::bench {

// Column schema for CSV output.  Frozen: downstream tooling keys on it.
inline const char* csv_header() {
  return "impl,threads,K,pushPct,popPct,peekPct,prefill,seconds,seed,repeat,"
         "throughputMops,batchingDegree,elimPct,combPct";
}

namespace detail_report {

inline std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace detail_report

// One CSV line per repeat.  Metrics an implementation does not provide
// are left empty, not zeroed.
inline void write_csv(std::ostream& out, const std::vector<RunResult>& results,
                      bool with_header = true) {
  if (with_header) out << csv_header() << '\n';
  for (const RunResult& result : results) {
    for (const RunRow& r : result.rows) {
      out << r.impl << ',' << r.threads << ',';
      if (r.aggregators) out << *r.aggregators;
      out << ',' << r.push_pct << ',' << r.pop_pct << ',' << r.peek_pct << ','
          << r.prefill << ',' << detail_report::fmt(r.seconds, "%g") << ','
          << r.seed << ',' << r.repeat << ','
          << detail_report::fmt(r.throughput_mops, "%.6f") << ',';
      if (r.batching_degree)
        out << detail_report::fmt(*r.batching_degree, "%.4f");
      out << ',';
      if (r.elim_pct) out << detail_report::fmt(*r.elim_pct, "%.4f");
      out << ',';
      if (r.comb_pct) out << detail_report::fmt(*r.comb_pct, "%.4f");
      out << '\n';
    }
  }
}

// JSON mirror of the CSV: one object per run id, repeats grouped under
// "rows", absent metrics omitted rather than null.
inline nlohmann::json to_json(const std::vector<RunResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const RunResult& result : results) {
    nlohmann::json rows = nlohmann::json::array();
    for (const RunRow& r : result.rows) {
      nlohmann::json row{{"impl", r.impl},
                         {"threads", r.threads},
                         {"pushPct", r.push_pct},
                         {"popPct", r.pop_pct},
                         {"peekPct", r.peek_pct},
                         {"prefill", r.prefill},
                         {"seconds", r.seconds},
                         {"seed", r.seed},
                         {"repeat", r.repeat},
                         {"throughputMops", r.throughput_mops},
                         {"totalOps", r.total_ops}};
      if (r.aggregators) row["K"] = *r.aggregators;
      if (r.batching_degree) row["batchingDegree"] = *r.batching_degree;
      if (r.elim_pct) row["elimPct"] = *r.elim_pct;
      if (r.comb_pct) row["combPct"] = *r.comb_pct;
      rows.push_back(std::move(row));
    }
    arr.push_back(nlohmann::json{{"runId", result.run_id},
                                 {"meanThroughputMops", result.mean_mops},
                                 {"varianceMops", result.var_mops},
                                 {"rows", std::move(rows)}});
  }
  return arr;
}

inline std::vector<RunResult> results_from_json(const nlohmann::json& arr) {
  std::vector<RunResult> out;
  for (const auto& item : arr) {
    RunResult result;
    result.run_id = item.at("runId").get<std::string>();
    result.mean_mops = item.at("meanThroughputMops").get<double>();
    result.var_mops = item.at("varianceMops").get<double>();
    for (const auto& jr : item.at("rows")) {
      RunRow r;
      r.impl = jr.at("impl").get<std::string>();
      r.threads = jr.at("threads").get<std::uint32_t>();
      if (jr.contains("K")) r.aggregators = jr.at("K").get<std::uint32_t>();
      r.push_pct = jr.at("pushPct").get<std::uint32_t>();
      r.pop_pct = jr.at("popPct").get<std::uint32_t>();
      r.peek_pct = jr.at("peekPct").get<std::uint32_t>();
      r.prefill = jr.at("prefill").get<std::uint32_t>();
      r.seconds = jr.at("seconds").get<double>();
      r.seed = jr.at("seed").get<std::uint64_t>();
      r.repeat = jr.at("repeat").get<std::uint32_t>();
      r.throughput_mops = jr.at("throughputMops").get<double>();
      r.total_ops = jr.at("totalOps").get<std::uint64_t>();
      if (jr.contains("batchingDegree"))
        r.batching_degree = jr.at("batchingDegree").get<double>();
      if (jr.contains("elimPct")) r.elim_pct = jr.at("elimPct").get<double>();
      if (jr.contains("combPct")) r.comb_pct = jr.at("combPct").get<double>();
      result.rows.push_back(std::move(r));
    }
    out.push_back(std::move(result));
  }
  return out;
}

// A gnuplot-ready two-column series: mean throughput against thread
// count, one block per series title (plottable with `plot "f.dat" index
// N using 1:2 with linespoints`).
inline void write_series(std::ostream& out, const std::string& title,
                         const std::vector<std::pair<std::uint32_t, double>>& points) {
  out << "# " << title << "\n# threads throughputMops\n";
  for (const auto& [threads, mops] : points)
    out << threads << ' ' << detail_report::fmt(mops, "%.6f") << '\n';
  out << "\n\n";
}

}  // namespace secstack::bench
