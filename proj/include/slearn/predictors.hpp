#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slearn/adaptive_sampler.hpp"
#include "slearn/domain.hpp"
#include "slearn/error.hpp"
#include "slearn/history_store.hpp"
#include "slearn/rng.hpp"

namespace slearn {

// ---------------------------------------------------------------------------
// Sampling-based prediction

/// max(1, ceil(ratio * width)), never more than width.
inline std::size_t pilot_count(std::size_t width, double ratio) {
  if (width == 0) throw Error(ErrorKind::InvalidJob, "width must be >= 1");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorKind::InvalidConfig, "ratio must be in (0,1]");
  // 0.03 * 100 is 3.0000000000000004 in binary; the slack keeps it at 3.
  const double nominal = ratio * static_cast<double>(width);
  const auto count = static_cast<std::size_t>(std::ceil(nominal - 1e-9));
  return std::clamp<std::size_t>(count, 1, width);
}

/// Uniformly random subset of [0, width) of the given size, sorted.
inline std::vector<std::size_t> select_pilots(std::size_t width, std::size_t count, Rng& rng) {
  if (count == 0 || count > width) {
    throw Error(ErrorKind::InvalidPilotCount,
                "pilot count " + std::to_string(count) + " not in [1, " + std::to_string(width) + "]");
  }
  std::vector<std::size_t> idx(width);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, width - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Empirical mean of the pilots scaled by the job width; the largest pilot
/// doubles as the max-task-length prediction.
inline Prediction slearn_estimate(std::span<const double> sampled_durations_ms, std::size_t width) {
  if (sampled_durations_ms.empty()) throw Error(ErrorKind::NoSamples, "no pilot durations");
  if (width < sampled_durations_ms.size()) throw Error(ErrorKind::InvalidJob, "more samples than tasks");
  const double mean = std::accumulate(sampled_durations_ms.begin(), sampled_durations_ms.end(), 0.0) /
                      static_cast<double>(sampled_durations_ms.size());
  const double mx = *std::max_element(sampled_durations_ms.begin(), sampled_durations_ms.end());
  return {mean, mean * static_cast<double>(width), mx, PredictionSource::Sampling};
}

inline Prediction oracle_predict(const Job& job) {
  const double total = static_cast<double>(job.total_work_ms());
  const auto mx = *std::max_element(job.task_durations_ms.begin(), job.task_durations_ms.end());
  return {total / static_cast<double>(job.task_durations_ms.size()), total, static_cast<double>(mx),
          PredictionSource::Oracle};
}

// ---------------------------------------------------------------------------
// History-based prediction

struct HistogramBin {
  double value_ms;
  double prob;
};

/// Point estimate minimizing sum p_i (c - a_i)^2 / a_i^2, i.e. squared error
/// weighted inversely by runtime squared. Closed form:
/// c* = (sum p_i / a_i) / (sum p_i / a_i^2).
inline double utility_point_estimate(std::span<const HistogramBin> histogram) {
  if (histogram.empty()) throw Error(ErrorKind::EmptyDistribution, "empty runtime histogram");
  double num = 0.0, den = 0.0, mass = 0.0;
  for (const auto& [a, p] : histogram) {
    if (!(a > 0.0)) throw Error(ErrorKind::InvalidJob, "histogram values must be positive");
    if (p < 0.0) throw Error(ErrorKind::InvalidJob, "negative probability");
    num += p / a;
    den += p / (a * a);
    mass += p;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw Error(ErrorKind::InvalidJob, "histogram mass must be 1");
  return num / den;
}

/// Midpoint of the two central values for even lengths.
inline double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyDistribution, "median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

enum class HistoryEstimator { Utility, Median };

struct HistoryQuery {
  Millis now_ms = 0;
  int window_days = 14;

  Millis window_start() const { return now_ms - static_cast<Millis>(window_days) * kMillisPerDay; }
};

namespace detail {

inline double estimate_from(const std::vector<const HistoryRecord*>& recs, HistoryEstimator how) {
  if (how == HistoryEstimator::Median) {
    std::vector<double> avgs;
    avgs.reserve(recs.size());
    for (const auto* r : recs) avgs.push_back(r->avg_task_runtime_ms);
    return median(std::move(avgs));
  }
  std::vector<HistogramBin> hist;
  hist.reserve(recs.size());
  const double p = 1.0 / static_cast<double>(recs.size());
  for (const auto* r : recs) hist.push_back({r->avg_task_runtime_ms, p});
  return utility_point_estimate(hist);
}

}  // namespace detail

/// What each feature with matching history would predict for the mean task
/// runtime of a job with these features.
inline FeaturePredictions feature_predictions(const HistoryStore& store, const JobFeatures& features,
                                              const HistoryQuery& q,
                                              HistoryEstimator how = HistoryEstimator::Utility) {
  FeaturePredictions out;
  for (Feature f : kAllFeatures) {
    auto recs = store.matches(f, feature_value(features, f), q.window_start(), q.now_ms);
    if (!recs.empty()) out[f] = detail::estimate_from(recs, how);
  }
  return out;
}

/// Feature-selected history prediction for a job (or DAG stage) of the given
/// width: the matching feature with the lowest rolling error wins.
inline Prediction history_predict(const HistoryStore& store, const JobFeatures& features, std::size_t width,
                                  const HistoryQuery& q, HistoryEstimator how) {
  std::optional<Feature> chosen;
  std::vector<const HistoryRecord*> chosen_recs;
  for (Feature f : kAllFeatures) {
    auto recs = store.matches(f, feature_value(features, f), q.window_start(), q.now_ms);
    if (recs.empty()) continue;
    if (!chosen || store.rolling_error(f) < store.rolling_error(*chosen)) {
      chosen = f;
      chosen_recs = std::move(recs);
    }
  }
  if (!chosen) throw Error(ErrorKind::NoHistory, "no feature has matching history in the window");
  const double mean = detail::estimate_from(chosen_recs, how);
  double mx = 0.0;
  for (const auto* r : chosen_recs) mx = std::max(mx, r->max_task_runtime_ms);
  return {mean, mean * static_cast<double>(width), mx,
          how == HistoryEstimator::Utility ? PredictionSource::History : PredictionSource::PointEstimate};
}

inline Prediction three_sigma_predict(const HistoryStore& store, const Job& job, Millis now_ms, int window_days) {
  return history_predict(store, job.features, job_width(job), {now_ms, window_days}, HistoryEstimator::Utility);
}

inline Prediction point_estimate_predict(const HistoryStore& store, const Job& job, Millis now_ms, int window_days) {
  return history_predict(store, job.features, job_width(job), {now_ms, window_days}, HistoryEstimator::Median);
}

/// history_predict with the cold-start fallback: the global median of past
/// mean task runtimes, or q0_hi per task when nothing has completed yet.
inline Prediction history_predict_or_fallback(const HistoryStore& store, const JobFeatures& features,
                                              std::size_t width, const HistoryQuery& q, HistoryEstimator how,
                                              double cold_start_mean_ms) {
  try {
    return history_predict(store, features, width, q, how);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoHistory) throw;
  }
  const double mean = store.median_avg_task_runtime().value_or(cold_start_mean_ms);
  return {mean, mean * static_cast<double>(width), mean,
          how == HistoryEstimator::Utility ? PredictionSource::History : PredictionSource::PointEstimate};
}

/// Appends a completed job (or stage) and updates every feature's rolling
/// error with what that feature would have predicted just beforehand.
inline void record_completion_online(HistoryStore& store, const HistoryRecord& record, int window_days) {
  const auto preds = feature_predictions(store, record.features, {record.completion_time_ms, window_days});
  store.record_completion(record, preds);
}

inline HistoryRecord history_record_for(const JobFeatures& features, std::span<const Millis> durations,
                                        Millis completion_ms) {
  const double total = static_cast<double>(std::accumulate(durations.begin(), durations.end(), Millis{0}));
  const double mx = static_cast<double>(*std::max_element(durations.begin(), durations.end()));
  return {completion_ms, total / static_cast<double>(durations.size()), mx, total, features};
}

/// Turns already-run jobs into a history store. Each stage is assumed to
/// finish one longest-task after its predecessor (full parallelism), clipped
/// to `cutoff_ms` so later online completions stay monotone.
inline HistoryStore build_history(std::span<const Job> jobs, Millis cutoff_ms, double error_decay, int window_days) {
  std::vector<HistoryRecord> recs;
  for (const Job& job : jobs) {
    const auto bounds = job.stage_bounds();
    Millis t = job.arrival_ms;
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
      std::span<const Millis> stage(job.task_durations_ms.data() + bounds[s], bounds[s + 1] - bounds[s]);
      t += *std::max_element(stage.begin(), stage.end());
      recs.push_back(history_record_for(job.features, stage, std::min(t, cutoff_ms)));
    }
  }
  std::stable_sort(recs.begin(), recs.end(),
                   [](const auto& a, const auto& b) { return a.completion_time_ms < b.completion_time_ms; });
  HistoryStore store(error_decay);
  for (const auto& r : recs) record_completion_online(store, r, window_days);
  return store;
}

// ---------------------------------------------------------------------------
// DAG jobs

/// Sampled first-stage total d_s corrects history estimates of the remaining
/// stages by the ratio d_s / d_h.
inline double slearn_dag_estimate(double d_s, double d_h, std::span<const double> remaining_history_estimates) {
  if (!(d_h > 0.0)) throw Error(ErrorKind::DegenerateHistory, "first-stage history estimate must be positive");
  const double rest = std::accumulate(remaining_history_estimates.begin(), remaining_history_estimates.end(), 0.0);
  return d_s + (d_s / d_h) * rest;
}

inline double three_sigma_dag_estimate(std::span<const double> stage_estimates) {
  if (stage_estimates.empty()) throw Error(ErrorKind::EmptyDag, "no stage estimates");
  return std::accumulate(stage_estimates.begin(), stage_estimates.end(), 0.0);
}

}  // namespace slearn
