#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <optional>
#include <vector>

#include "slearn/domain.hpp"
#include "slearn/error.hpp"

namespace slearn {

/// Picks the pilot sampling ratio for each new wide job from the ratio that
/// recently gave the lowest JCT normalized by job runtime.
///
/// Warmup assigns 2%, 3% and 4% to T jobs each. When the job at index 3T is
/// assigned, 1% is scheduled for T jobs if 2% scored better than 3%, and then
/// 5% for T jobs if 4% scored better than 3%. Afterwards every job gets the
/// ratio with the lowest running score (ties go to the smaller ratio).
class AdaptiveSampler {
 public:
  enum class Phase { Warmup, Explore, Steady };

  static constexpr std::array<double, 5> kRatios{0.01, 0.02, 0.03, 0.04, 0.05};

  explicit AdaptiveSampler(std::size_t window_T = 100) : T_(window_T) {
    if (T_ == 0) throw Error(ErrorKind::InvalidConfig, "T must be >= 1");
  }

  double next_ratio() {
    const std::size_t i = assigned_++;
    if (i < 3 * T_) {
      static constexpr std::array<double, 3> kWarmup{0.02, 0.03, 0.04};
      return kWarmup[i / T_];
    }
    if (i == 3 * T_) {
      const auto s2 = score(0.02), s3 = score(0.03), s4 = score(0.04);
      if (s2 && s3 && *s2 < *s3) explore_plan_.push_back(0.01);
      if (s4 && s3 && *s4 < *s3) explore_plan_.push_back(0.05);
    }
    const std::size_t k = i - 3 * T_;
    if (k < explore_plan_.size() * T_) return explore_plan_[k / T_];

    std::optional<double> best;
    double best_ratio = 0.03;
    for (std::size_t r = 0; r < kRatios.size(); ++r) {
      if (buffers_[r].empty()) continue;
      const double s = mean(buffers_[r]);
      if (!best || s < *best) {
        best = s;
        best_ratio = kRatios[r];
      }
    }
    return best_ratio;
  }

  /// Records a finished job's JCT normalized by its total runtime.
  void score_update(double ratio, Millis jct_ms, double total_job_runtime_ms) {
    if (!(total_job_runtime_ms > 0.0)) throw Error(ErrorKind::InvalidConfig, "job runtime must be positive");
    push_normalized(ratio, static_cast<double>(jct_ms) / total_job_runtime_ms);
  }

  void push_normalized(double ratio, double normalized_jct) {
    auto& buf = buffers_[slot(ratio)];
    buf.push_back(normalized_jct);
    while (buf.size() > T_) buf.pop_front();
  }

  std::optional<double> score(double ratio) const {
    const auto& buf = buffers_[slot(ratio)];
    if (buf.empty()) return std::nullopt;
    return mean(buf);
  }

  std::size_t buffer_size(double ratio) const { return buffers_[slot(ratio)].size(); }

  Phase phase() const {
    if (assigned_ < 3 * T_) return Phase::Warmup;
    if (assigned_ <= 3 * T_ || assigned_ - 3 * T_ < explore_plan_.size() * T_) return Phase::Explore;
    return Phase::Steady;
  }

  std::size_t jobs_assigned() const { return assigned_; }
  std::size_t window() const { return T_; }

 private:
  static std::size_t slot(double ratio) {
    for (std::size_t r = 0; r < kRatios.size(); ++r) {
      if (std::abs(kRatios[r] - ratio) < 1e-12) return r;
    }
    throw Error(ErrorKind::InvalidConfig, "ratio not in the sampler grid");
  }

  static double mean(const std::deque<double>& d) {
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  }

  std::size_t T_;
  std::size_t assigned_ = 0;
  std::vector<double> explore_plan_;
  std::array<std::deque<double>, kRatios.size()> buffers_;
};

}  // namespace slearn
