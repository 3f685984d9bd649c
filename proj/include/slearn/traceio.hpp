#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "slearn/domain.hpp"
#include "slearn/error.hpp"
#include "slearn/rng.hpp"

namespace slearn {

// ---------------------------------------------------------------------------
// JSON-lines traces: one job object per line.

inline nlohmann::ordered_json job_to_json(const Job& job) {
  nlohmann::ordered_json j;
  j["job_id"] = job.id;
  j["arrival_ms"] = job.arrival_ms;
  j["task_durations_ms"] = job.task_durations_ms;
  const auto& f = job.features;
  j["features"] = {{"application", f.application}, {"job_name", f.job_name},     {"user", f.user},
                   {"submit_day", f.submit_day},   {"submit_hour", f.submit_hour}, {"cpu_req", f.cpu_req},
                   {"mem_req", f.mem_req}};
  if (job.stages) j["stages"] = *job.stages;
  return j;
}

inline Job job_from_json(const nlohmann::json& j) {
  Job job;
  job.id = j.at("job_id").get<std::string>();
  job.arrival_ms = j.at("arrival_ms").get<Millis>();
  job.task_durations_ms = j.at("task_durations_ms").get<std::vector<Millis>>();
  const auto& f = j.at("features");
  job.features.application = f.at("application").get<std::string>();
  job.features.job_name = f.at("job_name").get<std::string>();
  job.features.user = f.at("user").get<std::string>();
  job.features.submit_day = f.at("submit_day").get<int>();
  job.features.submit_hour = f.at("submit_hour").get<int>();
  job.features.cpu_req = f.at("cpu_req").get<double>();
  job.features.mem_req = f.at("mem_req").get<double>();
  if (auto it = j.find("stages"); it != j.end() && !it->is_null()) {
    job.stages = it->get<std::vector<std::vector<Millis>>>();
  }
  return job;
}

inline void sort_by_arrival(std::vector<Job>& jobs) {
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return std::pair(a.arrival_ms, std::string_view(a.id)) < std::pair(b.arrival_ms, std::string_view(b.id));
  });
}

inline std::vector<Job> read_trace(std::istream& in) {
  std::vector<Job> jobs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Job job;
    try {
      job = job_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, fmt::format("line {}: {}", line_no, e.what()));
    }
    try {
      job.validate();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InvalidDuration) {
        throw Error(ErrorKind::InvalidDuration, fmt::format("line {}: {}", line_no, e.what()));
      }
      throw Error(ErrorKind::ParseError, fmt::format("line {}: {}", line_no, e.what()));
    }
    jobs.push_back(std::move(job));
  }
  sort_by_arrival(jobs);
  return jobs;
}

inline std::vector<Job> parse_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  return read_trace(in);
}

inline void write_trace(std::ostream& out, const std::vector<Job>& jobs) {
  for (const Job& job : jobs) out << job_to_json(job).dump() << '\n';
}

inline void write_trace(const std::vector<Job>& jobs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path);
  write_trace(out, jobs);
}

/// Drops jobs wider than max_width, preserving order.
inline std::vector<Job> cap_width(std::vector<Job> jobs, std::size_t max_width) {
  if (max_width == 0) throw Error(ErrorKind::InvalidConfig, "max_width must be >= 1");
  std::erase_if(jobs, [&](const Job& j) { return j.task_durations_ms.size() > max_width; });
  return jobs;
}

// ---------------------------------------------------------------------------
// Synthetic workloads

enum class WidthLaw { Uniform, LogNormal };

struct SynthSpec {
  std::size_t n_jobs = 100;
  double arrival_rate_per_s = 0.01;  // Poisson; ignored when explicit_arrivals_ms is set
  std::vector<Millis> explicit_arrivals_ms;
  std::size_t width_min = 1;
  std::size_t width_max = 100;
  WidthLaw width_law = WidthLaw::Uniform;
  double width_log_mu = 3.0;  // lognormal parameters of the width draw
  double width_log_sigma = 1.0;
  double mu_ms = 1e5;
  double sigma0_ms = 1e4;  // job-wise std
  double sigma1_ms = 1e3;  // task-wise std
  std::size_t n_apps = 10;
  std::size_t n_users = 10;
  std::size_t n_names = 20;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
    if (!(mu_ms > 0.0)) fail("mu_ms must be positive");
    if (sigma0_ms < 0.0 || sigma1_ms < 0.0) fail("sigmas must be >= 0");
    if (width_min == 0 || width_max < width_min) fail("need 1 <= width_min <= width_max");
    if (explicit_arrivals_ms.empty() && !(arrival_rate_per_s > 0.0)) fail("arrival rate must be positive");
    if (!explicit_arrivals_ms.empty() && explicit_arrivals_ms.size() != n_jobs) fail("arrival list size != n_jobs");
    if (n_apps == 0 || n_users == 0 || n_names == 0) fail("feature pools must be non-empty");
  }
};

namespace detail {

/// Normal draw conditioned on being positive (redraw, not clamp).
inline double positive_normal(Rng& rng, double mean, double sd) {
  if (sd == 0.0) return mean;
  std::normal_distribution<double> dist(mean, sd);
  for (;;) {
    const double v = dist(rng);
    if (v > 0.0) return v;
  }
}

}  // namespace detail

/// Job mean task length x ~ N(mu, sigma0^2) and task lengths ~ N(x, sigma1^2),
/// both truncated to positive values by rejection.
inline std::vector<Job> gen_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, "generate");
  std::exponential_distribution<double> gap(spec.arrival_rate_per_s / 1000.0);
  std::uniform_int_distribution<std::size_t> uniform_width(spec.width_min, spec.width_max);
  std::lognormal_distribution<double> lognormal_width(spec.width_log_mu, spec.width_log_sigma);
  std::uniform_int_distribution<std::size_t> app(0, spec.n_apps - 1), user(0, spec.n_users - 1),
      name(0, spec.n_names - 1);
  std::uniform_int_distribution<int> cpu(1, 4), mem(1, 4);

  std::vector<Job> jobs;
  jobs.reserve(spec.n_jobs);
  double t = 0.0;
  for (std::size_t i = 0; i < spec.n_jobs; ++i) {
    Job job;
    job.id = fmt::format("job-{:06d}", i);
    if (spec.explicit_arrivals_ms.empty()) {
      if (i > 0) t += gap(rng);
      job.arrival_ms = static_cast<Millis>(std::llround(t));
    } else {
      job.arrival_ms = spec.explicit_arrivals_ms[i];
    }
    std::size_t width = 0;
    if (spec.width_law == WidthLaw::Uniform) {
      width = uniform_width(rng);
    } else {
      const double w = std::round(lognormal_width(rng));
      width = std::clamp(static_cast<std::size_t>(std::max(w, 1.0)), spec.width_min, spec.width_max);
    }
    const double x = detail::positive_normal(rng, spec.mu_ms, spec.sigma0_ms);
    job.task_durations_ms.reserve(width);
    for (std::size_t k = 0; k < width; ++k) {
      const double d = detail::positive_normal(rng, x, spec.sigma1_ms);
      job.task_durations_ms.push_back(std::max<Millis>(1, std::llround(d)));
    }
    auto& f = job.features;
    f.application = fmt::format("app-{}", app(rng));
    f.user = fmt::format("user-{}", user(rng));
    f.job_name = fmt::format("name-{}", name(rng));
    f.submit_day = static_cast<int>((job.arrival_ms / kMillisPerDay) % 7);
    f.submit_hour = static_cast<int>((job.arrival_ms / 3'600'000) % 24);
    f.cpu_req = 0.5 * cpu(rng);
    f.mem_req = 0.25 * mem(rng);
    jobs.push_back(std::move(job));
  }
  sort_by_arrival(jobs);
  return jobs;
}

struct DagJob {
  Job job;
  bool short_tail = false;  // fewer than 2 stages because the base ran out
};

/// Chains consecutive base jobs into DAG jobs using the given group sizes.
/// Stage order is consumption order; the DAG arrives with its first member and
/// inherits its features, so every stage shares job name and user. A final
/// group shorter than requested takes whatever remains.
inline std::vector<DagJob> dag_from_groups(const std::vector<Job>& base, std::span<const std::size_t> sizes) {
  std::vector<DagJob> out;
  std::size_t i = 0;
  for (std::size_t g = 0; g < sizes.size() && i < base.size(); ++g) {
    if (sizes[g] == 0) throw Error(ErrorKind::InvalidConfig, "DAG group size must be >= 1");
    const std::size_t k = std::min(sizes[g], base.size() - i);
    DagJob d;
    d.job.id = "dag-" + base[i].id;
    d.job.arrival_ms = base[i].arrival_ms;
    d.job.features = base[i].features;
    std::vector<std::vector<Millis>> stages;
    for (std::size_t s = 0; s < k; ++s) {
      const auto& durs = base[i + s].task_durations_ms;
      stages.push_back(durs);
      d.job.task_durations_ms.insert(d.job.task_durations_ms.end(), durs.begin(), durs.end());
    }
    d.job.stages = std::move(stages);
    d.short_tail = k < 2;
    out.push_back(std::move(d));
    i += k;
  }
  return out;
}

/// Groups runs of 2..5 base jobs (uniform, seeded) into chain DAGs.
inline std::vector<DagJob> gen_dag_trace_flagged(const std::vector<Job>& base, std::uint64_t seed) {
  if (base.empty()) throw Error(ErrorKind::InvalidConfig, "empty base trace");
  Rng rng = make_rng(seed, "dag-grouping");
  std::uniform_int_distribution<std::size_t> stages_per_dag(2, 5);
  std::vector<std::size_t> sizes;
  for (std::size_t covered = 0; covered < base.size();) {
    sizes.push_back(stages_per_dag(rng));
    covered += sizes.back();
  }
  return dag_from_groups(base, sizes);
}

inline std::vector<Job> gen_dag_trace(const std::vector<Job>& base, std::uint64_t seed) {
  std::vector<Job> out;
  for (auto& d : gen_dag_trace_flagged(base, seed)) out.push_back(std::move(d.job));
  return out;
}

// ---------------------------------------------------------------------------
// Load statistics

struct LoadWindow {
  Millis start_ms;
  double load;
};

struct LoadStats {
  std::vector<LoadWindow> windows;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
};

/// Nearest-rank percentile of an unsorted sample.
inline double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

/// Work arriving in each sliding window divided by the window's capacity.
inline LoadStats load_windows(const std::vector<Job>& jobs, std::size_t machines, Millis window_ms = 1'000'000,
                              Millis slide_ms = 100'000) {
  if (machines == 0) throw Error(ErrorKind::InvalidConfig, "machines must be >= 1");
  if (window_ms <= 0 || slide_ms <= 0) throw Error(ErrorKind::InvalidConfig, "window and slide must be positive");
  LoadStats stats;
  if (jobs.empty()) return stats;
  Millis last = 0;
  for (const Job& j : jobs) last = std::max(last, j.arrival_ms);
  const double capacity = static_cast<double>(machines) * static_cast<double>(window_ms);
  for (Millis start = 0; start <= last; start += slide_ms) {
    double work = 0.0;
    for (const Job& j : jobs) {
      if (j.arrival_ms >= start && j.arrival_ms < start + window_ms) work += static_cast<double>(j.total_work_ms());
    }
    stats.windows.push_back({start, work / capacity});
  }
  std::vector<double> loads;
  for (const auto& w : stats.windows) loads.push_back(w.load);
  double sum = 0.0;
  for (double l : loads) sum += l;
  stats.mean = sum / static_cast<double>(loads.size());
  stats.p50 = percentile(loads, 50.0);
  stats.p90 = percentile(loads, 90.0);
  return stats;
}

}  // namespace slearn
