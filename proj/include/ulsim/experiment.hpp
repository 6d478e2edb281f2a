#pragma once

// Multi-seed experiment orchestration behind the `run` and `settling`
// commands: per-run traces, per-variant averaged traces, the final-time
// comparison report and settling times versus the adaptation period.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "config.hpp"
#include "engine.hpp"
#include "stats.hpp"

namespace ulsim {

struct ExperimentSpec {
  ScenarioConfig scenario;
  std::vector<FitnessKind> variants{FitnessKind::F2, FitnessKind::F4};
  int runs = 25;
  std::uint64_t base_seed = 1;
  std::filesystem::path out_dir = ".";
  int jobs = 1;

  void validate() const {
    if (runs < 1) throw std::invalid_argument("runs must be >= 1");
    if (variants.empty()) throw std::invalid_argument("at least one fitness variant is required");
    if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    scenario.validate();
  }
};

/// Runs independent tasks on up to `jobs` threads. Results are addressed by
/// index, so scheduling order never shows in the output.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Traces for every (variant, run) pair; runs[v][i] used seed base_seed + i.
struct ExperimentResult {
  std::vector<FitnessKind> variants;
  std::vector<std::vector<RunTrace>> runs;
};

inline ScenarioConfig scenario_for(const ExperimentSpec& spec, FitnessKind kind, int run_index) {
  ScenarioConfig cfg = spec.scenario;
  cfg.adaptation.kind = kind;
  cfg.seed = spec.base_seed + static_cast<std::uint64_t>(run_index);
  return cfg;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult res;
  res.variants = spec.variants;
  res.runs.assign(spec.variants.size(), std::vector<RunTrace>(static_cast<std::size_t>(spec.runs)));
  const std::size_t per_variant = static_cast<std::size_t>(spec.runs);
  parallel_for(spec.variants.size() * per_variant, spec.jobs, [&](std::size_t task) {
    const std::size_t v = task / per_variant;
    const std::size_t i = task % per_variant;
    res.runs[v][i] = run(scenario_for(spec, spec.variants[v], static_cast<int>(i)));
  });
  return res;
}

/// Pointwise mean and standard deviation across runs of each trace column.
struct AveragedTrace {
  std::vector<std::vector<double>> mean;  // [row][column], kTraceHeader order
  std::vector<std::vector<double>> sd;    // n-1 denominator; 0 for one run
};

inline AveragedTrace average_traces(const std::vector<RunTrace>& runs) {
  if (runs.empty()) throw std::invalid_argument("average_traces: no runs");
  const std::size_t rows = runs.front().samples.size();
  for (const auto& r : runs)
    if (r.samples.size() != rows) throw std::invalid_argument("average_traces: runs have different lengths");
  AveragedTrace avg;
  for (std::size_t row = 0; row < rows; ++row) {
    std::vector<std::vector<double>> cols;
    for (const auto& r : runs) {
      const auto values = trace_row(r.samples[row]);
      if (cols.empty()) cols.resize(values.size());
      for (std::size_t c = 0; c < values.size(); ++c) cols[c].push_back(values[c]);
    }
    std::vector<double> m, s;
    for (const auto& col : cols) {
      double mean = 0.0;
      for (double x : col) mean += x;
      mean /= static_cast<double>(col.size());
      m.push_back(mean);
      s.push_back(col.size() > 1 ? stats::summary(col).sd : 0.0);
    }
    avg.mean.push_back(std::move(m));
    avg.sd.push_back(std::move(s));
  }
  return avg;
}

inline std::vector<std::string> trace_columns() {
  std::vector<std::string> cols;
  std::string header = kTraceHeader;
  std::stringstream ss(header);
  for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
  return cols;
}

/// Same leading columns as a run trace, then <column>_runsd for each
/// non-time column.
inline void write_averaged_csv(std::ostream& os, const AveragedTrace& avg) {
  const auto cols = trace_columns();
  os << kTraceHeader;
  for (std::size_t c = 1; c < cols.size(); ++c) os << ',' << cols[c] << "_runsd";
  os << '\n';
  for (std::size_t row = 0; row < avg.mean.size(); ++row) {
    for (std::size_t c = 0; c < avg.mean[row].size(); ++c) os << (c ? "," : "") << format_number(avg.mean[row][c]);
    for (std::size_t c = 1; c < avg.sd[row].size(); ++c) os << ',' << format_number(avg.sd[row][c]);
    os << '\n';
  }
}

/// Final-sample values of one trace column, one per run.
inline std::vector<double> final_values(const std::vector<RunTrace>& runs, std::size_t column) {
  std::vector<double> out;
  for (const auto& r : runs) {
    if (r.samples.empty()) throw std::invalid_argument("final_values: empty trace");
    out.push_back(trace_row(r.samples.back())[column]);
  }
  return out;
}

struct ReportRow {
  std::string variable;
  double mu_a = 0, sigma_a = 0, mu_b = 0, sigma_b = 0;
  stats::Interval i95_a, i95_b;
  double p_value = 0;
};

inline constexpr const char* kReportHeader =
    "variable,mu_a,sigma_a,mu_b,sigma_b,i95_a_lo,i95_a_hi,i95_b_lo,i95_b_hi,p_value";

inline ReportRow compare(std::string variable, const std::vector<double>& a, const std::vector<double>& b,
                         stats::Alternative alt = stats::Alternative::TwoSided) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  ReportRow row;
  row.variable = std::move(variable);
  auto fill = [](const std::vector<double>& s, double& mu, double& sigma, stats::Interval& iv) {
    if (s.size() >= 2) {
      const auto sm = stats::summary(s);
      mu = sm.mean;
      sigma = sm.sd;
      iv = stats::i95(sm.mean, sm.sd, static_cast<int>(s.size()));
    } else {
      mu = s.empty() ? nan : s.front();
      sigma = nan;
      iv = {nan, nan};
    }
  };
  fill(a, row.mu_a, row.sigma_a, row.i95_a);
  fill(b, row.mu_b, row.sigma_b, row.i95_b);
  row.p_value = stats::wilcoxon_rank_sum(a, b, alt);
  return row;
}

/// Final-time comparison for every pair of variants. Variables are named
/// "<column> (<A> vs <B>)".
inline std::vector<ReportRow> build_report(const ExperimentResult& res) {
  static const std::pair<const char*, std::size_t> kVariables[] = {
      {"qhr_mean", 1}, {"qhr_std", 2}, {"m0_mean", 3}, {"m1_mean", 5}, {"m2_mean", 7},
      {"e_mean", 9},   {"s_mean", 10}, {"c_mean", 11}, {"h_mean", 13}};
  std::vector<ReportRow> rows;
  for (std::size_t a = 0; a < res.variants.size(); ++a) {
    for (std::size_t b = a + 1; b < res.variants.size(); ++b) {
      const std::string pair =
          " (" + std::string(to_string(res.variants[a])) + " vs " + std::string(to_string(res.variants[b])) + ")";
      for (const auto& [name, col] : kVariables)
        rows.push_back(compare(name + pair, final_values(res.runs[a], col), final_values(res.runs[b], col)));
    }
  }
  return rows;
}

inline void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << kReportHeader << '\n';
  for (const auto& r : rows) {
    os << r.variable;
    for (double v : {r.mu_a, r.sigma_a, r.mu_b, r.sigma_b, r.i95_a.lo, r.i95_a.hi, r.i95_b.lo, r.i95_b.hi,
                     r.p_value})
      os << ',' << format_number(v);
    os << '\n';
  }
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  body(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
}

}  // namespace detail

/// Writes <variant>_seed<i>.csv per run, <variant>_avg.csv per variant and
/// report.csv. Returns the experiment result for further use.
inline ExperimentResult cmd_run(const ExperimentSpec& spec) {
  spec.validate();
  detail::ensure_dir(spec.out_dir);
  ExperimentResult res = run_experiment(spec);
  for (std::size_t v = 0; v < res.variants.size(); ++v) {
    const std::string name(to_string(res.variants[v]));
    for (std::size_t i = 0; i < res.runs[v].size(); ++i)
      detail::write_file(spec.out_dir / (name + "_seed" + std::to_string(i) + ".csv"),
                         [&](std::ostream& os) { write_trace_csv(os, res.runs[v][i]); });
    const AveragedTrace avg = average_traces(res.runs[v]);
    detail::write_file(spec.out_dir / (name + "_avg.csv"), [&](std::ostream& os) { write_averaged_csv(os, avg); });
  }
  const auto report = build_report(res);
  detail::write_file(spec.out_dir / "report.csv", [&](std::ostream& os) { write_report_csv(os, report); });
  return res;
}

struct SettlingRow {
  FitnessKind variant = FitnessKind::F2;
  double ta = 0.0;
  double settling = 0.0;              // on the run-averaged global QHR
  std::vector<double> per_run;        // per seed, same order as the runs
  int audit_failures = 0;
};

/// (t, global QHR) pairs of one trace.
inline std::vector<std::pair<double, double>> qhr_series(const RunTrace& r) {
  std::vector<std::pair<double, double>> s;
  for (const auto& m : r.samples) s.emplace_back(m.t, m.qhr.mean);
  return s;
}

/// Static-load settling time of the global QHR for each (variant, Ta).
inline std::vector<SettlingRow> run_settling(const ExperimentSpec& spec, const std::vector<double>& tas) {
  spec.validate();
  if (tas.empty()) throw std::invalid_argument("settling: empty Ta list");
  for (double ta : tas)
    if (!(ta > 0.0)) throw std::invalid_argument("settling: Ta must be > 0");

  std::vector<SettlingRow> rows;
  for (FitnessKind v : spec.variants)
    for (double ta : tas) rows.push_back({v, ta, 0.0, {}});

  const std::size_t per_row = static_cast<std::size_t>(spec.runs);
  std::vector<std::vector<RunTrace>> traces(rows.size(), std::vector<RunTrace>(per_row));
  parallel_for(rows.size() * per_row, spec.jobs, [&](std::size_t task) {
    const std::size_t r = task / per_row;
    const std::size_t i = task % per_row;
    ScenarioConfig cfg = scenario_for(spec, rows[r].variant, static_cast<int>(i));
    cfg.load = LoadProfile::Static;
    cfg.adaptation.period = rows[r].ta;
    traces[r][i] = run(cfg);
  });

  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& tr : traces[r]) {
      rows[r].per_run.push_back(stats::settling_time(qhr_series(tr)));
      rows[r].audit_failures += tr.audit.ok ? 0 : 1;
    }
    const AveragedTrace avg = average_traces(traces[r]);
    std::vector<std::pair<double, double>> series;
    for (const auto& row : avg.mean) series.emplace_back(row[0], row[1]);
    rows[r].settling = stats::settling_time(series);
  }
  return rows;
}

inline void write_settling_csv(std::ostream& os, const std::vector<SettlingRow>& rows) {
  os << "variant,ta,t_s\n";
  for (const auto& r : rows)
    os << to_string(r.variant) << ',' << format_number(r.ta) << ',' << format_number(r.settling) << '\n';
}

inline std::vector<SettlingRow> cmd_settling(const ExperimentSpec& spec, const std::vector<double>& tas) {
  spec.validate();
  detail::ensure_dir(spec.out_dir);
  auto rows = run_settling(spec, tas);
  detail::write_file(spec.out_dir / "settling.csv", [&](std::ostream& os) { write_settling_csv(os, rows); });
  return rows;
}

}  // namespace ulsim
