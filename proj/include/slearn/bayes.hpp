#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "slearn/error.hpp"

// Stylized Gaussian model of a job's mean task length x: prior
// x ~ N(mu, sigma0^2) (job-wise variation) and task lengths
// y_i | x ~ N(x, sigma1^2) (task-wise variation).

namespace slearn::bayes {

inline constexpr double kNoPrior = std::numeric_limits<double>::infinity();

struct GaussianPrior {
  double mu = 0.0;
  double sigma0_sq = kNoPrior;

  bool informative() const { return std::isfinite(sigma0_sq); }
};

struct TaskNoise {
  double sigma1_sq = 1.0;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

struct Grid {
  double lo = -20.0;
  double hi = 20.0;
  double step = 1e-4;
};

enum class Regime { SamplingBetter, HistoryBetter, Tie };

namespace detail {

inline void check_prior(const GaussianPrior& prior) {
  if (!(prior.sigma0_sq > 0.0)) throw Error(ErrorKind::InvalidConfig, "sigma0_sq must be positive");
}

inline void check_noise(const TaskNoise& noise) {
  if (!(noise.sigma1_sq > 0.0) || !std::isfinite(noise.sigma1_sq)) {
    throw Error(ErrorKind::InvalidConfig, "sigma1_sq must be positive and finite");
  }
}

}  // namespace detail

/// Without samples the best predictor is the prior mean, and its error
/// variance is the job-wise variance.
inline Posterior history_estimate(const GaussianPrior& prior) {
  detail::check_prior(prior);
  if (!prior.informative()) {
    throw Error(ErrorKind::InfinitePriorVariance, "history-based estimate needs a finite prior variance");
  }
  return {prior.mu, prior.sigma0_sq};
}

/// Closed-form conjugate posterior of x given the sampled task lengths.
/// An infinite prior variance gives (sample mean, sigma1^2 / m).
inline Posterior sampling_posterior(const GaussianPrior& prior, const TaskNoise& noise,
                                    std::span<const double> samples) {
  detail::check_prior(prior);
  detail::check_noise(noise);
  const double m = static_cast<double>(samples.size());
  const double sum = std::accumulate(samples.begin(), samples.end(), 0.0);
  if (!prior.informative()) {
    if (samples.empty()) throw Error(ErrorKind::NoInformation, "no samples and no prior");
    return {sum / m, noise.sigma1_sq / m};
  }
  const double precision = m / noise.sigma1_sq + 1.0 / prior.sigma0_sq;
  const double mean = (sum / noise.sigma1_sq + prior.mu / prior.sigma0_sq) / precision;
  return {mean, 1.0 / precision};
}

/// Direct numerical evaluation of P(x|y) ∝ P(y|x) P(x) on a uniform grid with
/// the trapezoidal rule. Independent of the conjugate algebra above except for
/// the grid-coverage precondition check.
inline Posterior posterior_quadrature_oracle(const GaussianPrior& prior, const TaskNoise& noise,
                                             std::span<const double> samples, const Grid& grid) {
  detail::check_prior(prior);
  detail::check_noise(noise);
  if (!prior.informative()) {
    throw Error(ErrorKind::InfinitePriorVariance, "quadrature oracle needs a finite prior variance");
  }
  if (!(grid.step > 0.0) || !(grid.hi > grid.lo)) throw Error(ErrorKind::InvalidConfig, "bad grid");

  const Posterior expected = sampling_posterior(prior, noise, samples);
  const double sd = std::sqrt(expected.variance);
  if (expected.mean < grid.lo + 4.0 * sd || expected.mean > grid.hi - 4.0 * sd) {
    throw Error(ErrorKind::GridTooNarrow, "grid does not cover +-4 posterior standard deviations");
  }

  const auto n = static_cast<std::size_t>(std::floor((grid.hi - grid.lo) / grid.step + 1e-9)) + 1;
  auto x_at = [&](std::size_t i) { return grid.lo + static_cast<double>(i) * grid.step; };
  auto log_joint = [&](double x) {
    double lp = -(x - prior.mu) * (x - prior.mu) / (2.0 * prior.sigma0_sq);
    for (double y : samples) lp -= (y - x) * (y - x) / (2.0 * noise.sigma1_sq);
    return lp;
  };

  std::vector<double> density(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    density[i] = log_joint(x_at(i));
    peak = std::max(peak, density[i]);
  }
  for (double& d : density) d = std::exp(d - peak);

  auto trapezoid = [&](auto&& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
      acc += w * f(i);
    }
    return acc * grid.step;
  };

  const double z = trapezoid([&](std::size_t i) { return density[i]; });
  const double mean = trapezoid([&](std::size_t i) { return x_at(i) * density[i]; }) / z;
  const double var = trapezoid([&](std::size_t i) {
    const double d = x_at(i) - mean;
    return d * d * density[i];
  }) / z;
  return {mean, var};
}

/// Sampling wins when the job-wise variance exceeds the variance of an
/// m-sample mean.
inline Regime regime_advantage(const GaussianPrior& prior, const TaskNoise& noise, int m) {
  detail::check_prior(prior);
  detail::check_noise(noise);
  if (!prior.informative()) throw Error(ErrorKind::InfinitePriorVariance, "regime comparison needs a finite prior");
  if (m < 1) throw Error(ErrorKind::InvalidConfig, "m must be >= 1");
  const double sample_var = noise.sigma1_sq / static_cast<double>(m);
  if (prior.sigma0_sq > sample_var) return Regime::SamplingBetter;
  if (prior.sigma0_sq < sample_var) return Regime::HistoryBetter;
  return Regime::Tie;
}

constexpr const char* to_string(Regime r) {
  switch (r) {
    case Regime::SamplingBetter: return "sampling-better";
    case Regime::HistoryBetter: return "history-better";
    case Regime::Tie: return "tie";
  }
  return "?";
}

}  // namespace slearn::bayes
