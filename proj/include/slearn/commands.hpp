#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "slearn/bayes.hpp"
#include "slearn/domain.hpp"
#include "slearn/engine.hpp"
#include "slearn/error.hpp"
#include "slearn/metrics.hpp"
#include "slearn/predictors.hpp"
#include "slearn/traceio.hpp"

namespace slearn::cli {

struct RunManifest {
  std::string trace_path;
  std::optional<std::string> history_path;
  std::vector<Policy> policies{Policy::SLearn};  // simulate uses the first
  std::optional<Policy> target;                   // compare: defaults to the first policy
  SchedulerConfig config;
  double history_split = 0.5;
  std::string out_dir = ".";
};

struct PreparedRun {
  std::vector<Job> evaluated;
  std::vector<Job> history_jobs;
};

/// Splits the trace chronologically: the leading fraction becomes history,
/// the rest is simulated. An explicit history trace replaces the split.
inline PreparedRun prepare_run(std::vector<Job> trace, std::optional<std::vector<Job>> history, double split) {
  if (!(split >= 0.0 && split < 1.0)) throw Error(ErrorKind::InvalidConfig, "history split must be in [0,1)");
  PreparedRun run;
  if (history) {
    run.history_jobs = std::move(*history);
    run.evaluated = std::move(trace);
    return run;
  }
  const auto k = static_cast<std::size_t>(std::floor(split * static_cast<double>(trace.size())));
  run.history_jobs.assign(std::make_move_iterator(trace.begin()), std::make_move_iterator(trace.begin() + k));
  run.evaluated.assign(std::make_move_iterator(trace.begin() + k), std::make_move_iterator(trace.end()));
  return run;
}

inline HistoryStore history_for(const PreparedRun& run, const SchedulerConfig& cfg) {
  const Millis cutoff = run.evaluated.empty() ? std::numeric_limits<Millis>::max() : run.evaluated.front().arrival_ms;
  return build_history(run.history_jobs, cutoff, cfg.history_error_decay, cfg.history_window_days);
}

inline SimResult simulate_prepared(const PreparedRun& run, Policy policy, const SchedulerConfig& cfg) {
  if (uses_history(policy) && run.history_jobs.empty()) {
    throw Error(ErrorKind::NoHistory,
                fmt::format("policy {} needs history: pass --history <trace> or a --history-split in (0,1)",
                            to_string(policy)));
  }
  HistoryStore history = uses_history(policy) ? history_for(run, cfg) : HistoryStore(cfg.history_error_decay);
  return slearn::run(run.evaluated, policy, cfg, std::move(history));
}

inline PreparedRun load_run(const RunManifest& m) {
  std::optional<std::vector<Job>> history;
  if (m.history_path) history = parse_trace(*m.history_path);
  return prepare_run(parse_trace(m.trace_path), std::move(history), m.history_split);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + p.string());
  return out;
}

}  // namespace detail

inline void write_run_outputs(const SimResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto jobs = detail::open_out(dir / "jobs.csv");
  metrics::write_jobs_csv(jobs, r);
  auto errors = detail::open_out(dir / "errors.csv");
  const auto errs = metrics::prediction_errors(r);
  metrics::write_errors_csv(errors, errs);
}

/// Runs one policy and writes jobs.csv, errors.csv and summary.csv.
inline SimResult cmd_simulate(const RunManifest& m) {
  if (m.policies.empty()) throw Error(ErrorKind::InvalidConfig, "no policy given");
  m.config.validate();
  const auto run = load_run(m);
  SimResult r = simulate_prepared(run, m.policies.front(), m.config);
  const std::filesystem::path dir(m.out_dir);
  write_run_outputs(r, dir);
  const std::array<metrics::SummaryRow, 1> rows{metrics::summarize(r)};
  auto summary = detail::open_out(dir / "summary.csv");
  metrics::write_summary_csv(summary, rows);
  return r;
}

/// Runs every policy on the same evaluated jobs and writes the target's
/// speedup over each baseline.
inline std::vector<SimResult> cmd_compare(const RunManifest& m) {
  if (m.policies.size() < 2) throw Error(ErrorKind::InvalidConfig, "compare needs at least two policies");
  m.config.validate();
  const Policy target = m.target.value_or(m.policies.front());
  if (std::find(m.policies.begin(), m.policies.end(), target) == m.policies.end()) {
    throw Error(ErrorKind::InvalidConfig, "target policy must be one of the compared policies");
  }
  const auto run = load_run(m);

  std::vector<std::future<SimResult>> pending;
  for (Policy p : m.policies) {
    pending.push_back(std::async(std::launch::async, [&run, &m, p] { return simulate_prepared(run, p, m.config); }));
  }
  std::vector<SimResult> results;
  for (auto& f : pending) results.push_back(f.get());

  const std::filesystem::path dir(m.out_dir);
  std::filesystem::create_directories(dir);
  const std::size_t t = static_cast<std::size_t>(std::find(m.policies.begin(), m.policies.end(), target) -
                                                 m.policies.begin());
  std::vector<metrics::SummaryRow> rows;
  for (std::size_t i = 0; i < results.size(); ++i) {
    write_run_outputs(results[i], dir / to_string(results[i].policy));
    auto row = metrics::summarize(results[i]);
    row.speedup = metrics::jct_speedup(results[i], results[t]);
    if (i != t) {
      auto out = detail::open_out(dir / fmt::format("speedups_{}.csv", to_string(results[i].policy)));
      metrics::write_speedups_csv(out, *row.speedup);
    }
    rows.push_back(std::move(row));
  }
  auto summary = detail::open_out(dir / "summary.csv");
  metrics::write_summary_csv(summary, rows);
  return results;
}

inline std::vector<metrics::CovRow> cmd_analyze(const std::string& trace_path, const std::array<int, 3>& windows,
                                                double ratio, const std::string& out_path) {
  const auto rows = metrics::analyze_trace(parse_trace(trace_path), windows, ratio);
  auto out = detail::open_out(out_path);
  metrics::write_cov_csv(out, rows, windows);
  return rows;
}

inline std::vector<Job> cmd_gen(const SynthSpec& spec, const std::string& out_path) {
  auto jobs = gen_synthetic(spec);
  write_trace(jobs, out_path);
  return jobs;
}

inline std::vector<Job> cmd_gen_dag(const std::string& base_path, std::uint64_t seed, const std::string& out_path) {
  auto dags = gen_dag_trace(parse_trace(base_path), seed);
  write_trace(dags, out_path);
  return dags;
}

inline bayes::Posterior cmd_bayes(const bayes::GaussianPrior& prior, const bayes::TaskNoise& noise,
                                  const std::vector<double>& samples, std::ostream& out) {
  const auto post = bayes::sampling_posterior(prior, noise, samples);
  out << "mean " << metrics::csv_number(post.mean) << '\n';
  out << "variance " << metrics::csv_number(post.variance) << '\n';
  if (prior.informative()) {
    const auto hist = bayes::history_estimate(prior);
    out << "history_mean " << metrics::csv_number(hist.mean) << '\n';
    out << "history_variance " << metrics::csv_number(hist.variance) << '\n';
    if (!samples.empty()) {
      out << "regime " << bayes::to_string(bayes::regime_advantage(prior, noise, static_cast<int>(samples.size())))
          << '\n';
    }
  }
  return post;
}

/// Exit code for a library error: 2 for bad input or configuration, 3 otherwise.
inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ParseError:
    case ErrorKind::InvalidDuration:
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidJob:
    case ErrorKind::UnsortedTrace:
    case ErrorKind::DuplicateJob:
    case ErrorKind::NoHistory:
    case ErrorKind::InfinitePriorVariance:
    case ErrorKind::NoInformation:
      return 2;
    default:
      return 3;
  }
}

}  // namespace slearn::cli
