#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "slearn/error.hpp"

namespace slearn {

/// All simulated time is integer milliseconds.
using Millis = std::int64_t;

inline constexpr Millis kMillisPerSecond = 1000;
inline constexpr Millis kMillisPerDay = 86'400'000;

struct JobFeatures {
  std::string application;
  std::string job_name;
  std::string user;
  int submit_day = 0;   // 0..6
  int submit_hour = 0;  // 0..23
  double cpu_req = 0.0;
  double mem_req = 0.0;

  void validate() const {
    if (submit_day < 0 || submit_day > 6) {
      throw Error(ErrorKind::InvalidJob, "submit_day out of [0,6]: " + std::to_string(submit_day));
    }
    if (submit_hour < 0 || submit_hour > 23) {
      throw Error(ErrorKind::InvalidJob, "submit_hour out of [0,23]: " + std::to_string(submit_hour));
    }
    if (!(cpu_req >= 0.0) || !(mem_req >= 0.0)) {
      throw Error(ErrorKind::InvalidJob, "negative resource request");
    }
  }

  bool operator==(const JobFeatures&) const = default;
};

/// A trace job. DAG jobs are linear chains of stages; task_durations_ms is
/// always the concatenation of the stage lists.
struct Job {
  std::string id;
  Millis arrival_ms = 0;
  std::vector<Millis> task_durations_ms;
  JobFeatures features;
  std::optional<std::vector<std::vector<Millis>>> stages;

  void validate() const {
    if (id.empty()) throw Error(ErrorKind::InvalidJob, "empty job id");
    if (arrival_ms < 0) throw Error(ErrorKind::InvalidJob, id + ": negative arrival");
    if (task_durations_ms.empty()) throw Error(ErrorKind::InvalidJob, id + ": no tasks");
    for (Millis d : task_durations_ms) {
      if (d <= 0) throw Error(ErrorKind::InvalidDuration, id + ": task duration must be > 0");
    }
    features.validate();
    if (stages) {
      if (stages->empty()) throw Error(ErrorKind::InvalidJob, id + ": empty stage list");
      std::vector<Millis> flat;
      for (const auto& s : *stages) {
        if (s.empty()) throw Error(ErrorKind::InvalidJob, id + ": empty stage");
        flat.insert(flat.end(), s.begin(), s.end());
      }
      if (flat != task_durations_ms) {
        throw Error(ErrorKind::InvalidJob, id + ": task_durations_ms is not the concatenation of stages");
      }
    }
  }

  std::size_t stage_count() const { return stages ? stages->size() : 1; }

  /// Offsets into task_durations_ms; stage s covers [bounds[s], bounds[s+1]).
  std::vector<std::size_t> stage_bounds() const {
    std::vector<std::size_t> bounds{0};
    if (stages) {
      for (const auto& s : *stages) bounds.push_back(bounds.back() + s.size());
    } else {
      bounds.push_back(task_durations_ms.size());
    }
    return bounds;
  }

  Millis total_work_ms() const {
    return std::accumulate(task_durations_ms.begin(), task_durations_ms.end(), Millis{0});
  }

  bool operator==(const Job&) const = default;
};

/// Number of tasks in the given stage (stage 0 for plain jobs).
inline std::size_t job_width(const Job& job, std::size_t active_stage = 0) {
  if (job.stages) {
    if (active_stage >= job.stages->size()) throw Error(ErrorKind::InvalidJob, job.id + ": no such stage");
    return (*job.stages)[active_stage].size();
  }
  return job.task_durations_ms.size();
}

inline bool is_thin(std::size_t width, std::size_t thin_limit) { return width < thin_limit; }

inline bool is_thin(const Job& job, std::size_t thin_limit, std::size_t active_stage = 0) {
  return is_thin(job_width(job, active_stage), thin_limit);
}

enum class PredictionSource { Sampling, History, PointEstimate, Oracle };

constexpr const char* to_string(PredictionSource s) {
  switch (s) {
    case PredictionSource::Sampling: return "sampling";
    case PredictionSource::History: return "history";
    case PredictionSource::PointEstimate: return "point-estimate";
    case PredictionSource::Oracle: return "oracle";
  }
  return "?";
}

struct Prediction {
  double mean_task_ms = 0.0;
  double total_ms = 0.0;
  std::optional<double> max_task_ms;
  PredictionSource source = PredictionSource::Oracle;
};

enum class SamplingMode { Fixed, Adaptive };

struct SchedulerConfig {
  std::size_t machines = 1;
  std::size_t num_queues = 10;
  double q0_hi_ms = 1e6;
  double growth_factor = 10.0;
  double queue_weight_decay = 10.0;
  std::size_t thin_limit = 3;
  SamplingMode sampling_mode = SamplingMode::Adaptive;
  double fixed_ratio = 0.03;
  std::size_t adaptive_T = 100;
  int history_window_days = 14;
  double history_error_decay = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
    if (machines == 0) fail("machines must be positive");
    if (num_queues == 0) fail("num_queues must be positive");
    if (!(q0_hi_ms > 0.0)) fail("q0_hi_ms must be positive");
    if (!(growth_factor > 1.0)) fail("growth_factor must exceed 1");
    if (!(queue_weight_decay > 1.0)) fail("queue_weight_decay must exceed 1");
    if (thin_limit == 0) fail("thin_limit must be positive");
    if (!(fixed_ratio > 0.0 && fixed_ratio <= 1.0)) fail("fixed_ratio must be in (0,1]");
    if (adaptive_T == 0) fail("adaptive_T must be positive");
    if (history_window_days <= 0) fail("history_window_days must be positive");
    if (!(history_error_decay > 0.0 && history_error_decay <= 1.0)) fail("history_error_decay must be in (0,1]");
  }

  /// Upper threshold of queue q; the last queue is unbounded.
  double queue_hi(std::size_t q) const {
    if (q + 1 >= num_queues) return std::numeric_limits<double>::infinity();
    double hi = q0_hi_ms;
    for (std::size_t i = 0; i < q; ++i) hi *= growth_factor;
    return hi;
  }

  double queue_lo(std::size_t q) const { return q == 0 ? 0.0 : queue_hi(q - 1); }

  /// Second-highest priority queue (or the only one).
  std::size_t sampling_queue() const { return num_queues > 1 ? 1 : 0; }
};

enum class EventKind : std::uint8_t { TaskFinish = 0, JobArrival = 1 };

/// Total order: time, TaskFinish before JobArrival, job id, task index.
struct SimEvent {
  Millis time_ms = 0;
  EventKind kind = EventKind::JobArrival;
  std::string job_id;
  std::size_t task = 0;
  std::size_t machine = 0;

  auto operator<=>(const SimEvent& o) const {
    if (auto c = time_ms <=> o.time_ms; c != 0) return c;
    if (auto c = kind <=> o.kind; c != 0) return c;
    if (auto c = job_id <=> o.job_id; c != 0) return c;
    if (auto c = task <=> o.task; c != 0) return c;
    return machine <=> o.machine;
  }
  bool operator==(const SimEvent&) const = default;
};

enum class Policy { SLearn, ThreeSigma, ThreeSigmaTL, PointEst, LAS, FIFO, Oracle, SLearnDAG, ThreeSigmaDAG };

constexpr const char* to_string(Policy p) {
  switch (p) {
    case Policy::SLearn: return "slearn";
    case Policy::ThreeSigma: return "3sigma";
    case Policy::ThreeSigmaTL: return "3sigma-tl";
    case Policy::PointEst: return "point-est";
    case Policy::LAS: return "las";
    case Policy::FIFO: return "fifo";
    case Policy::Oracle: return "oracle";
    case Policy::SLearnDAG: return "slearn-dag";
    case Policy::ThreeSigmaDAG: return "3sigma-dag";
  }
  return "?";
}

inline std::optional<Policy> parse_policy(std::string_view name) {
  for (Policy p : {Policy::SLearn, Policy::ThreeSigma, Policy::ThreeSigmaTL, Policy::PointEst, Policy::LAS,
                   Policy::FIFO, Policy::Oracle, Policy::SLearnDAG, Policy::ThreeSigmaDAG}) {
    if (name == to_string(p)) return p;
  }
  return std::nullopt;
}

/// Policies whose predictions come from a history store.
constexpr bool uses_history(Policy p) {
  return p == Policy::ThreeSigma || p == Policy::ThreeSigmaTL || p == Policy::PointEst ||
         p == Policy::SLearnDAG || p == Policy::ThreeSigmaDAG;
}

constexpr bool uses_sampling(Policy p) { return p == Policy::SLearn || p == Policy::SLearnDAG; }

struct QueuePlacement {
  Millis time_ms = 0;
  int queue = -1;  // -1: not in any queue (finished)
};

struct JobRecord {
  std::string id;
  Millis arrival_ms = 0;
  std::size_t width = 0;  // first stage
  Millis total_work_ms = 0;
  std::vector<std::size_t> stage_bounds;
  std::optional<Prediction> estimate;
  std::optional<Millis> estimate_ready_ms;
  int queue_assigned = -1;
  std::vector<QueuePlacement> queue_history;
  std::vector<Millis> task_starts_ms;
  std::vector<Millis> task_finishes_ms;
  std::vector<std::size_t> task_machines;
  std::vector<bool> pilot;
  std::optional<double> sampling_ratio;
  Millis jct_ms = 0;

  Millis finish_ms() const { return arrival_ms + jct_ms; }
  Millis task_duration(std::size_t i) const { return task_finishes_ms[i] - task_starts_ms[i]; }
  double true_mean_task_ms() const {
    return static_cast<double>(total_work_ms) / static_cast<double>(task_starts_ms.size());
  }

  /// Queue the job occupied at instant t (last placement at or before t).
  int queue_at(Millis t) const {
    int q = -1;
    for (const auto& p : queue_history) {
      if (p.time_ms > t) break;
      q = p.queue;
    }
    return q;
  }
};

struct SimResult {
  Policy policy = Policy::FIFO;
  SchedulerConfig config;
  std::uint64_t seed = 0;
  std::vector<JobRecord> jobs;  // trace order
  std::vector<SimEvent> events;  // processing order

  const JobRecord* find(std::string_view id) const {
    for (const auto& j : jobs) {
      if (j.id == id) return &j;
    }
    return nullptr;
  }
};

}  // namespace slearn
