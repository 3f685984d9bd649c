#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "slearn/domain.hpp"
#include "slearn/error.hpp"
#include "slearn/history_store.hpp"
#include "slearn/predictors.hpp"
#include "slearn/scheduler.hpp"
#include "slearn/traceio.hpp"

namespace slearn::metrics {

// ---------------------------------------------------------------------------
// Prediction error

inline constexpr double kSignedErrorCap = 1000.0;

struct ErrorRecord {
  std::string job_id;
  double signed_pct = 0.0;  // capped at +1000
  double abs_pct = 0.0;
};

inline ErrorRecord prediction_error(double est_total, double actual_total, std::string job_id = {}) {
  if (!(actual_total > 0.0)) throw Error(ErrorKind::InvalidActual, "actual runtime must be positive");
  const double pct = (est_total - actual_total) / actual_total * 100.0;
  return {std::move(job_id), std::min(kSignedErrorCap, pct), std::abs(pct)};
}

/// Errors of every job that received an estimate.
inline std::vector<ErrorRecord> prediction_errors(const SimResult& result) {
  std::vector<ErrorRecord> out;
  for (const auto& j : result.jobs) {
    if (j.estimate) out.push_back(prediction_error(j.estimate->total_ms, static_cast<double>(j.total_work_ms), j.id));
  }
  return out;
}

/// Sorted (value, cumulative fraction) pairs.
inline std::vector<std::pair<double, double>> cdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  return out;
}

// ---------------------------------------------------------------------------
// JCT speedup

struct SpeedupReport {
  std::vector<std::pair<std::string, double>> per_job;  // JCT_baseline / JCT_target, trace order
  double mean_jct_speedup = 1.0;                         // meanJCT_baseline / meanJCT_target
  double p50 = 1.0;
  double p90 = 1.0;
};

inline double mean_jct(const SimResult& r) {
  if (r.jobs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& j : r.jobs) sum += static_cast<double>(j.jct_ms);
  return sum / static_cast<double>(r.jobs.size());
}

inline SpeedupReport jct_speedup(const SimResult& baseline, const SimResult& target) {
  std::unordered_map<std::string_view, const JobRecord*> by_id;
  for (const auto& j : target.jobs) by_id.emplace(j.id, &j);
  if (by_id.size() != baseline.jobs.size()) throw Error(ErrorKind::JobSetMismatch, "job counts differ");
  SpeedupReport rep;
  std::vector<double> ratios;
  for (const auto& b : baseline.jobs) {
    auto it = by_id.find(b.id);
    if (it == by_id.end()) throw Error(ErrorKind::JobSetMismatch, "job " + b.id + " missing from target");
    const double r = static_cast<double>(b.jct_ms) / static_cast<double>(it->second->jct_ms);
    rep.per_job.emplace_back(b.id, r);
    ratios.push_back(r);
  }
  const double target_mean = mean_jct(target);
  rep.mean_jct_speedup = target_mean > 0.0 ? mean_jct(baseline) / target_mean : 1.0;
  if (!ratios.empty()) {
    rep.p50 = percentile(ratios, 50.0);
    rep.p90 = percentile(ratios, 90.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Variability across time and space

/// Population coefficient of variation.
inline double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::Undefined, "CoV of empty sample");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return std::sqrt(var) / mean;
}

struct CovTimeReport {
  std::map<Feature, double> per_feature;
  double min_cov = 0.0;
  Feature argmin = Feature::Application;
};

/// For each feature, the CoV of mean task runtimes of similar jobs completed
/// in [now - window, now); features with fewer than two matches are skipped.
inline CovTimeReport cov_time(const HistoryStore& store, const JobFeatures& target, Millis now_ms, int window_days) {
  const HistoryQuery q{now_ms, window_days};
  CovTimeReport rep;
  std::optional<double> best;
  for (Feature f : kAllFeatures) {
    const auto recs = store.matches(f, feature_value(target, f), q.window_start(), now_ms);
    if (recs.size() < 2) continue;
    std::vector<double> avgs;
    for (const auto* r : recs) avgs.push_back(r->avg_task_runtime_ms);
    const double c = coefficient_of_variation(avgs);
    rep.per_feature[f] = c;
    if (!best || c < *best) {
      best = c;
      rep.argmin = f;
    }
  }
  if (!best) throw Error(ErrorKind::InsufficientHistory, "no feature has two or more similar jobs");
  rep.min_cov = *best;
  return rep;
}

/// Task-duration spread scaled to the error of a mean over ratio*n samples:
/// sigma / (sqrt(ratio * n) * mu).
inline double cov_space(std::span<const Millis> task_durations, double sampling_ratio = 0.03) {
  if (task_durations.size() < 2) throw Error(ErrorKind::Undefined, "single-task jobs have no spatial variation");
  if (!(sampling_ratio > 0.0 && sampling_ratio <= 1.0)) throw Error(ErrorKind::InvalidConfig, "ratio must be in (0,1]");
  std::vector<double> v(task_durations.begin(), task_durations.end());
  const double n = static_cast<double>(v.size());
  return coefficient_of_variation(v) / std::sqrt(sampling_ratio * n);
}

struct CovRow {
  std::string job_id;
  std::array<std::optional<double>, 3> cov_time;  // one per window
  std::optional<double> cov_space;
};

/// Per-job variability over a trace. A job's history is every job that
/// finished (arrival + longest task) before it arrived.
inline std::vector<CovRow> analyze_trace(const std::vector<Job>& jobs, const std::array<int, 3>& windows_days,
                                         double sampling_ratio) {
  std::vector<HistoryRecord> done;
  for (const Job& j : jobs) {
    const auto mx = *std::max_element(j.task_durations_ms.begin(), j.task_durations_ms.end());
    done.push_back(history_record_for(j.features, j.task_durations_ms, j.arrival_ms + mx));
  }
  std::stable_sort(done.begin(), done.end(),
                   [](const auto& a, const auto& b) { return a.completion_time_ms < b.completion_time_ms; });
  HistoryStore store;
  std::size_t next = 0;
  std::vector<CovRow> rows;
  for (const Job& j : jobs) {
    while (next < done.size() && done[next].completion_time_ms < j.arrival_ms) store.record_completion(done[next++], {});
    CovRow row;
    row.job_id = j.id;
    for (std::size_t w = 0; w < windows_days.size(); ++w) {
      try {
        row.cov_time[w] = cov_time(store, j.features, j.arrival_ms, windows_days[w]).min_cov;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientHistory) throw;
      }
    }
    if (j.task_durations_ms.size() >= 2) row.cov_space = cov_space(j.task_durations_ms, sampling_ratio);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Per-job timing

/// Mean task start delay divided by the job's true mean task length.
inline double normalized_waiting_time(const JobRecord& job) {
  if (job.task_starts_ms.empty()) throw Error(ErrorKind::InvalidJob, job.id + " has no tasks");
  double wait = 0.0;
  for (Millis s : job.task_starts_ms) wait += static_cast<double>(s - job.arrival_ms);
  wait /= static_cast<double>(job.task_starts_ms.size());
  return wait / job.true_mean_task_ms();
}

enum class ResistanceAt { Arrival, EstimateReady };

/// Higher-priority work facing a job at an instant, in whole-cluster ms:
/// remaining time of running tasks plus unstarted work of jobs in
/// higher-priority queues or ahead of it in its own queue, over machine count.
/// The state is taken just before the dispatch at that instant.
inline double resistance(const SimResult& result, std::string_view job_id, ResistanceAt at) {
  const JobRecord* target = result.find(job_id);
  if (!target) throw Error(ErrorKind::InvalidJob, std::string(job_id) + " not in result");
  Millis t = target->arrival_ms;
  if (at == ResistanceAt::EstimateReady && target->estimate_ready_ms) t = *target->estimate_ready_ms;
  const int my_queue = target->queue_at(t);
  const auto my_key = std::pair(target->arrival_ms, std::string_view(target->id));

  double work = 0.0;
  for (const auto& other : result.jobs) {
    if (&other == target || other.arrival_ms > t || other.finish_ms() <= t) continue;
    const int q = other.queue_at(t);
    const bool ahead = q >= 0 && my_queue >= 0 &&
                       (q < my_queue || (q == my_queue && std::pair(other.arrival_ms, std::string_view(other.id)) < my_key));
    for (std::size_t i = 0; i < other.task_starts_ms.size(); ++i) {
      const Millis s = other.task_starts_ms[i], f = other.task_finishes_ms[i];
      if (s < t && f > t) {
        work += static_cast<double>(f - t);
      } else if (s >= t && ahead) {
        work += static_cast<double>(f - s);
      }
    }
  }
  return work / static_cast<double>(result.config.machines);
}

// ---------------------------------------------------------------------------
// Queue placement audits

inline bool is_wide(const JobRecord& j, std::size_t thin_limit) { return !is_thin(j.width, thin_limit); }

inline double correct_queue_fraction(const SimResult& result, const SchedulerConfig& cfg) {
  std::size_t n = 0, correct = 0;
  for (const auto& j : result.jobs) {
    if (!j.estimate || !is_wide(j, cfg.thin_limit)) continue;
    ++n;
    if (queue_index_for(j.estimate->total_ms, cfg) == queue_index_for(static_cast<double>(j.total_work_ms), cfg)) {
      ++correct;
    }
  }
  return n == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(n);
}

enum class Bin { Bin1 = 1, Bin2 = 2, Bin3 = 3, Bin4 = 4 };

/// Bin1 thin+small, Bin2 wide+small, Bin3 thin+large, Bin4 wide+large.
inline Bin bin_of(std::size_t width, Millis total_ms, std::size_t thin_limit = 3, Millis size_threshold_ms = 1'000'000) {
  const bool thin = is_thin(width, thin_limit);
  const bool small = total_ms < size_threshold_ms;
  if (small) return thin ? Bin::Bin1 : Bin::Bin2;
  return thin ? Bin::Bin3 : Bin::Bin4;
}

inline Bin bin_of(const Job& job, std::size_t thin_limit = 3, Millis size_threshold_ms = 1'000'000) {
  return bin_of(job_width(job), job.total_work_ms(), thin_limit, size_threshold_ms);
}

inline std::array<std::size_t, 4> bin_counts(const SimResult& r, std::size_t thin_limit) {
  std::array<std::size_t, 4> counts{};
  for (const auto& j : r.jobs) ++counts[static_cast<std::size_t>(bin_of(j.width, j.total_work_ms, thin_limit)) - 1];
  return counts;
}

struct MisplacementReport {
  std::size_t wide_jobs = 0;
  double overestimated_pct = 0.0;
  double underestimated_pct = 0.0;
  double misplaced_over_pct = 0.0;   // estimated queue lower priority than actual
  double misplaced_under_pct = 0.0;  // estimated queue higher priority than actual
  double mean_positive_error = 0.0;
  double p50_positive_error = 0.0;
  double mean_negative_error = 0.0;
  double p50_negative_error = 0.0;
};

inline MisplacementReport misplacement_report(const SimResult& result, const SchedulerConfig& cfg) {
  MisplacementReport rep;
  std::vector<double> pos, neg;
  std::size_t mis_over = 0, mis_under = 0;
  for (const auto& j : result.jobs) {
    if (!j.estimate || !is_wide(j, cfg.thin_limit)) continue;
    ++rep.wide_jobs;
    const double actual = static_cast<double>(j.total_work_ms);
    const auto err = prediction_error(j.estimate->total_ms, actual);
    if (err.signed_pct > 0.0) pos.push_back(err.signed_pct);
    if (err.signed_pct < 0.0) neg.push_back(err.signed_pct);
    const auto q_est = queue_index_for(j.estimate->total_ms, cfg), q_act = queue_index_for(actual, cfg);
    if (q_est > q_act) ++mis_over;
    if (q_est < q_act) ++mis_under;
  }
  if (rep.wide_jobs == 0) return rep;
  const double n = static_cast<double>(rep.wide_jobs);
  rep.overestimated_pct = 100.0 * static_cast<double>(pos.size()) / n;
  rep.underestimated_pct = 100.0 * static_cast<double>(neg.size()) / n;
  rep.misplaced_over_pct = 100.0 * static_cast<double>(mis_over) / n;
  rep.misplaced_under_pct = 100.0 * static_cast<double>(mis_under) / n;
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  rep.mean_positive_error = mean_of(pos);
  rep.mean_negative_error = mean_of(neg);
  if (!pos.empty()) rep.p50_positive_error = median(pos);
  if (!neg.empty()) rep.p50_negative_error = median(neg);
  return rep;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string csv_number(double v) { return fmt::format("{}", v); }

inline std::string csv_optional(const std::optional<double>& v) { return v ? csv_number(*v) : std::string{}; }

inline void write_speedups_csv(std::ostream& out, const SpeedupReport& rep) {
  out << "job_id,ratio\n";
  for (const auto& [id, r] : rep.per_job) out << id << ',' << csv_number(r) << '\n';
}

inline void write_errors_csv(std::ostream& out, std::span<const ErrorRecord> errors) {
  out << "job_id,signed_pct,abs_pct\n";
  for (const auto& e : errors) out << e.job_id << ',' << csv_number(e.signed_pct) << ',' << csv_number(e.abs_pct) << '\n';
}

inline void write_cov_csv(std::ostream& out, std::span<const CovRow> rows, const std::array<int, 3>& windows) {
  out << fmt::format("job_id,cov_time_w{},cov_time_w{},cov_time_w{},cov_space\n", windows[0], windows[1], windows[2]);
  for (const auto& r : rows) {
    out << r.job_id << ',' << csv_optional(r.cov_time[0]) << ',' << csv_optional(r.cov_time[1]) << ','
        << csv_optional(r.cov_time[2]) << ',' << csv_optional(r.cov_space) << '\n';
  }
}

inline void write_jobs_csv(std::ostream& out, const SimResult& r) {
  out << "job_id,arrival_ms,width,total_work_ms,jct_ms,queue_assigned,estimate_total_ms,estimate_ready_ms,"
         "sampling_ratio,pilots\n";
  for (const auto& j : r.jobs) {
    const auto pilots = std::count(j.pilot.begin(), j.pilot.end(), true);
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", j.id, j.arrival_ms, j.width, j.total_work_ms, j.jct_ms,
                       j.queue_assigned, j.estimate ? csv_number(j.estimate->total_ms) : "",
                       j.estimate_ready_ms ? std::to_string(*j.estimate_ready_ms) : "",
                       csv_optional(j.sampling_ratio), pilots);
  }
}

struct SummaryRow {
  std::string policy;
  std::size_t jobs = 0;
  double mean_jct_ms = 0.0;
  double p50_jct_ms = 0.0;
  double p90_jct_ms = 0.0;
  std::optional<SpeedupReport> speedup;  // target over this run
  double correct_queue_pct = 100.0;
  std::array<std::size_t, 4> bins{};
};

inline SummaryRow summarize(const SimResult& r) {
  SummaryRow row;
  row.policy = to_string(r.policy);
  row.jobs = r.jobs.size();
  std::vector<double> jcts;
  for (const auto& j : r.jobs) jcts.push_back(static_cast<double>(j.jct_ms));
  row.mean_jct_ms = mean_jct(r);
  row.p50_jct_ms = percentile(jcts, 50.0);
  row.p90_jct_ms = percentile(jcts, 90.0);
  row.correct_queue_pct = 100.0 * correct_queue_fraction(r, r.config);
  row.bins = bin_counts(r, r.config.thin_limit);
  return row;
}

inline void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "policy,jobs,mean_jct_ms,p50_jct_ms,p90_jct_ms,mean_speedup,p50_speedup,p90_speedup,correct_queue_pct,"
         "bin1,bin2,bin3,bin4\n";
  for (const auto& r : rows) {
    std::string sp = ",,";
    if (r.speedup) {
      sp = fmt::format("{},{},{}", csv_number(r.speedup->mean_jct_speedup), csv_number(r.speedup->p50),
                       csv_number(r.speedup->p90));
    }
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.policy, r.jobs, csv_number(r.mean_jct_ms),
                       csv_number(r.p50_jct_ms), csv_number(r.p90_jct_ms), sp, csv_number(r.correct_queue_pct),
                       r.bins[0], r.bins[1], r.bins[2], r.bins[3]);
  }
}

}  // namespace slearn::metrics
