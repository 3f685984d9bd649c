#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "slearn/domain.hpp"
#include "slearn/error.hpp"
#include "slearn/rng.hpp"

namespace slearn::testing {

template <class Fn>
void expect_error(ErrorKind kind, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

inline JobFeatures features(std::string app = "app", std::string user = "user", std::string name = "name") {
  JobFeatures f;
  f.application = std::move(app);
  f.job_name = std::move(name);
  f.user = std::move(user);
  f.cpu_req = 1.0;
  f.mem_req = 0.5;
  return f;
}

inline Job make_job(std::string id, Millis arrival, std::vector<Millis> durations, JobFeatures f = features()) {
  Job j;
  j.id = std::move(id);
  j.arrival_ms = arrival;
  j.task_durations_ms = std::move(durations);
  j.features = std::move(f);
  return j;
}

inline Job make_dag(std::string id, Millis arrival, std::vector<std::vector<Millis>> stages,
                    JobFeatures f = features()) {
  Job j = make_job(std::move(id), arrival, {}, std::move(f));
  for (const auto& s : stages) j.task_durations_ms.insert(j.task_durations_ms.end(), s.begin(), s.end());
  j.stages = std::move(stages);
  return j;
}

/// Strict priority: queue weights so far apart that a lower queue only runs
/// when every higher one is empty.
inline SchedulerConfig strict_config(std::size_t machines = 1) {
  SchedulerConfig cfg;
  cfg.machines = machines;
  cfg.queue_weight_decay = 1e9;
  return cfg;
}

inline constexpr Policy kAllPolicies[] = {Policy::SLearn,   Policy::ThreeSigma, Policy::ThreeSigmaTL,
                                          Policy::PointEst, Policy::LAS,        Policy::FIFO,
                                          Policy::Oracle,   Policy::SLearnDAG,  Policy::ThreeSigmaDAG};

/// Random small trace: up to `max_jobs` jobs, widths 1..max_width, durations
/// 1..max_ms, a mix of simultaneous and spread arrivals, some DAG jobs.
inline std::vector<Job> random_trace(Rng& rng, std::size_t max_jobs, std::size_t max_width, Millis max_ms,
                                     bool dags = true) {
  std::uniform_int_distribution<std::size_t> n_jobs(1, max_jobs), width(1, max_width), n_stages(1, 3);
  std::uniform_int_distribution<Millis> dur(1, max_ms), gap(0, max_ms);
  std::uniform_int_distribution<int> coin(0, 3), app(0, 2);
  std::vector<Job> jobs;
  Millis t = 0;
  const std::size_t n = n_jobs(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (coin(rng) != 0) t += gap(rng);
    auto f = features("app-" + std::to_string(app(rng)), "u", "n-" + std::to_string(app(rng)));
    if (dags && coin(rng) == 0) {
      std::vector<std::vector<Millis>> stages(n_stages(rng));
      for (auto& s : stages) {
        s.resize(width(rng));
        for (auto& d : s) d = dur(rng);
      }
      jobs.push_back(make_dag("j" + std::to_string(i), t, std::move(stages), f));
    } else {
      std::vector<Millis> d(width(rng));
      for (auto& x : d) x = dur(rng);
      jobs.push_back(make_job("j" + std::to_string(i), t, std::move(d), f));
    }
  }
  return jobs;
}

}  // namespace slearn::testing
