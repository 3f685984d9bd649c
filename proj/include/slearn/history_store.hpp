#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "slearn/domain.hpp"
#include "slearn/error.hpp"

namespace slearn {

/// Job features used to find "similar" past jobs. Resources is the composite
/// "cpu:mem" value.
enum class Feature : std::size_t { Application, JobName, User, SubmitDay, SubmitHour, Resources };

inline constexpr std::size_t kFeatureCount = 6;
inline constexpr std::array<Feature, kFeatureCount> kAllFeatures{
    Feature::Application, Feature::JobName, Feature::User,
    Feature::SubmitDay,   Feature::SubmitHour, Feature::Resources};

constexpr const char* to_string(Feature f) {
  switch (f) {
    case Feature::Application: return "application";
    case Feature::JobName: return "job_name";
    case Feature::User: return "user";
    case Feature::SubmitDay: return "submit_day";
    case Feature::SubmitHour: return "submit_hour";
    case Feature::Resources: return "resources";
  }
  return "?";
}

inline std::string feature_value(const JobFeatures& f, Feature which) {
  switch (which) {
    case Feature::Application: return f.application;
    case Feature::JobName: return f.job_name;
    case Feature::User: return f.user;
    case Feature::SubmitDay: return std::to_string(f.submit_day);
    case Feature::SubmitHour: return std::to_string(f.submit_hour);
    case Feature::Resources: return fmt::format("{}:{}", f.cpu_req, f.mem_req);
  }
  return {};
}

struct HistoryRecord {
  Millis completion_time_ms = 0;
  double avg_task_runtime_ms = 0.0;
  double max_task_runtime_ms = 0.0;
  double total_runtime_ms = 0.0;
  JobFeatures features;
};

/// Per-feature predicted mean task runtime, used to update rolling errors.
using FeaturePredictions = std::map<Feature, double>;

/// Completed-job statistics indexed by every feature value, plus an
/// exponentially weighted MAPE per feature.
class HistoryStore {
 public:
  explicit HistoryStore(double error_decay = 0.2) : decay_(error_decay) {
    if (!(decay_ > 0.0 && decay_ <= 1.0)) throw Error(ErrorKind::InvalidConfig, "error decay must be in (0,1]");
  }

  void record_completion(const HistoryRecord& record, const FeaturePredictions& predicted_by_feature) {
    if (!(record.avg_task_runtime_ms > 0.0) || record.max_task_runtime_ms < record.avg_task_runtime_ms) {
      throw Error(ErrorKind::InvalidJob, "history record needs max >= avg > 0");
    }
    if (!records_.empty() && record.completion_time_ms < records_.back().completion_time_ms) {
      throw Error(ErrorKind::NonMonotoneHistory,
                  fmt::format("completion {} precedes last record {}", record.completion_time_ms,
                              records_.back().completion_time_ms));
    }
    const std::size_t idx = records_.size();
    records_.push_back(record);
    for (Feature f : kAllFeatures) {
      index_[static_cast<std::size_t>(f)][feature_value(record.features, f)].push_back(idx);
    }
    for (const auto& [f, pred] : predicted_by_feature) {
      double& err = errors_[static_cast<std::size_t>(f)];
      const double actual = record.avg_task_runtime_ms;
      err = (1.0 - decay_) * err + decay_ * std::abs(pred - actual) / actual;
    }
    sorted_avgs_.insert(std::upper_bound(sorted_avgs_.begin(), sorted_avgs_.end(), record.avg_task_runtime_ms),
                        record.avg_task_runtime_ms);
  }

  /// Records sharing the feature value whose completion lies in [from, to).
  std::vector<const HistoryRecord*> matches(Feature f, const std::string& value, Millis from, Millis to) const {
    std::vector<const HistoryRecord*> out;
    const auto& idx = index_[static_cast<std::size_t>(f)];
    auto it = idx.find(value);
    if (it == idx.end()) return out;
    const auto& list = it->second;
    auto lo = std::lower_bound(list.begin(), list.end(), from,
                               [&](std::size_t i, Millis t) { return records_[i].completion_time_ms < t; });
    for (; lo != list.end() && records_[*lo].completion_time_ms < to; ++lo) out.push_back(&records_[*lo]);
    return out;
  }

  std::size_t index_size(Feature f, const std::string& value) const {
    const auto& idx = index_[static_cast<std::size_t>(f)];
    auto it = idx.find(value);
    return it == idx.end() ? 0 : it->second.size();
  }

  double rolling_error(Feature f) const { return errors_[static_cast<std::size_t>(f)]; }
  void set_rolling_error(Feature f, double err) { errors_[static_cast<std::size_t>(f)] = err; }
  double error_decay() const { return decay_; }

  std::span<const HistoryRecord> records() const { return records_; }
  bool empty() const { return records_.empty(); }

  std::optional<double> median_avg_task_runtime() const {
    if (sorted_avgs_.empty()) return std::nullopt;
    const std::size_t n = sorted_avgs_.size();
    return n % 2 == 1 ? sorted_avgs_[n / 2] : 0.5 * (sorted_avgs_[n / 2 - 1] + sorted_avgs_[n / 2]);
  }

 private:
  double decay_;
  std::vector<HistoryRecord> records_;
  std::array<std::unordered_map<std::string, std::vector<std::size_t>>, kFeatureCount> index_;
  std::array<double, kFeatureCount> errors_{};
  std::vector<double> sorted_avgs_;
};

}  // namespace slearn
