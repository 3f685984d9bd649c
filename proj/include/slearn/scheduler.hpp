#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slearn/adaptive_sampler.hpp"
#include "slearn/domain.hpp"
#include "slearn/error.hpp"
#include "slearn/history_store.hpp"
#include "slearn/predictors.hpp"
#include "slearn/rng.hpp"

namespace slearn {

/// Smallest q with total < Q_hi(q); the last queue takes everything above.
inline std::size_t queue_index_for(double total_estimate_ms, const SchedulerConfig& cfg) {
  for (std::size_t q = 0; q + 1 < cfg.num_queues; ++q) {
    if (total_estimate_ms < cfg.queue_hi(q)) return q;
  }
  return cfg.num_queues - 1;
}

enum class JobPhase { Pending, Sampling, Estimated, ThinBypass, Unestimated, Finished };

struct JobRuntimeState {
  JobPhase phase = JobPhase::Pending;
  std::size_t stage = 0;
  std::size_t stage_begin = 0;
  std::size_t stage_end = 0;
  std::vector<std::size_t> pilots;   // absolute task indices, current stage
  std::vector<std::size_t> regular;  // remaining tasks of the current stage
  std::size_t next_pilot = 0;
  std::size_t next_regular = 0;
  std::vector<double> pilot_durations;
  std::size_t running = 0;
  std::size_t stage_done = 0;
  Millis completed_service_ms = 0;
  Millis running_start_sum = 0;
  std::optional<Prediction> estimate;
  std::optional<double> sampling_ratio;
  int queue = -1;
  int ready_in = -1;  // queue whose ready set currently holds the job
  bool in_wc = false;

  bool has_pilot() const { return next_pilot < pilots.size(); }
  bool has_regular() const { return next_regular < regular.size(); }
  std::size_t stage_width() const { return stage_end - stage_begin; }

  /// Completed task time plus elapsed time of running tasks.
  Millis attained_service(Millis now) const {
    return completed_service_ms + static_cast<Millis>(running) * now - running_start_sum;
  }
};

struct Assignment {
  std::size_t job;
  std::size_t task;
  std::size_t machine;
};

/// Multi-level queue scheduler: FIFO within a queue, weighted sharing of
/// machines across queues, an optional sampling queue for pilot tasks, and
/// work conservation for tasks held back while their job is being sampled.
class Scheduler {
 public:
  Scheduler(std::span<const Job> jobs, Policy policy, SchedulerConfig cfg, HistoryStore history = HistoryStore{})
      : jobs_(jobs),
        policy_(policy),
        cfg_(std::move(cfg)),
        history_(std::move(history)),
        sampler_(cfg_.adaptive_T),
        rng_(make_rng(cfg_.seed, "pilots")),
        states_(jobs.size()),
        records_(jobs.size()),
        ready_(cfg_.num_queues),
        running_in_queue_(cfg_.num_queues, 0),
        machine_bucket_(cfg_.machines, kNoBucket) {
    cfg_.validate();
    // FIFO entry key: (arrival, id)
    std::vector<std::size_t> order(jobs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::pair(jobs[a].arrival_ms, std::string_view(jobs[a].id)) <
             std::pair(jobs[b].arrival_ms, std::string_view(jobs[b].id));
    });
    rank_of_.resize(jobs.size());
    rank_to_job_ = order;
    for (std::size_t r = 0; r < order.size(); ++r) rank_of_[order[r]] = r;
  }

  void on_job_arrival(std::size_t j, Millis now) {
    const Job& job = jobs_[j];
    auto& st = states_[j];
    if (st.phase != JobPhase::Pending) throw Error(ErrorKind::DuplicateJob, job.id);
    auto& rec = records_[j];
    rec.id = job.id;
    rec.arrival_ms = job.arrival_ms;
    rec.width = job_width(job);
    rec.total_work_ms = job.total_work_ms();
    rec.stage_bounds = job.stage_bounds();
    const std::size_t n = job.task_durations_ms.size();
    rec.task_starts_ms.assign(n, -1);
    rec.task_finishes_ms.assign(n, -1);
    rec.task_machines.assign(n, 0);
    rec.pilot.assign(n, false);
    enter_stage(j, 0, now);
  }

  /// Returns true when the job has finished.
  bool on_task_finish(std::size_t j, std::size_t task, std::size_t machine, Millis now) {
    auto& st = states_[j];
    auto& rec = records_[j];
    const Millis start = rec.task_starts_ms[task];
    if (const int b = machine_bucket_[machine]; b != kNoBucket && b != kWorkConservation) --running_in_queue_[b];
    machine_bucket_[machine] = kNoBucket;
    rec.task_finishes_ms[task] = now;
    --st.running;
    st.running_start_sum -= start;
    st.completed_service_ms += now - start;
    ++st.stage_done;

    if (st.phase == JobPhase::Sampling && rec.pilot[task]) {
      st.pilot_durations.push_back(static_cast<double>(now - start));
      if (st.pilot_durations.size() == st.pilots.size()) on_pilots_complete(j, now);
    }

    if (st.stage_done == st.stage_width()) {
      complete_stage(j, now);
      if (st.phase == JobPhase::Finished) return true;
    } else if (policy_ == Policy::LAS) {
      const Millis attained = st.attained_service(now);
      move_to_queue(j, attained > 0 ? static_cast<int>(queue_index_for(static_cast<double>(attained), cfg_)) : 0,
                    now);
    }
    refresh(j);
    return false;
  }

  /// Fills the given idle machines (in order) with runnable tasks.
  std::vector<Assignment> dispatch(std::span<const std::size_t> idle_machines, Millis now) {
    std::vector<Assignment> out;
    for (std::size_t m : idle_machines) {
      auto pick = pick_task();
      if (!pick) break;
      const auto [j, task, bucket] = *pick;
      start_task(j, task, m, bucket, now);
      out.push_back({j, task, m});
    }
    return out;
  }

  /// Index of the queue the weighted-sharing rule would serve next, if any.
  std::optional<std::size_t> choose_queue() const {
    double weight_sum = 0.0;
    std::size_t running_total = 0;
    for (std::size_t q = 0; q < ready_.size(); ++q) {
      if (!ready_[q].empty()) weight_sum += raw_weight(q);
      running_total += running_in_queue_[q];
    }
    std::optional<std::size_t> best;
    double best_surplus = 0.0;
    for (std::size_t q = 0; q < ready_.size(); ++q) {
      if (ready_[q].empty()) continue;
      const double usage =
          running_total == 0 ? 0.0 : static_cast<double>(running_in_queue_[q]) / static_cast<double>(running_total);
      const double surplus = raw_weight(q) / weight_sum - usage;
      if (!best || surplus > best_surplus) {
        best = q;
        best_surplus = surplus;
      }
    }
    return best;
  }

  const JobRuntimeState& state(std::size_t j) const { return states_[j]; }
  const JobRecord& record(std::size_t j) const { return records_[j]; }
  std::vector<JobRecord> take_records() && { return std::move(records_); }
  const HistoryStore& history() const { return history_; }
  const AdaptiveSampler& sampler() const { return sampler_; }
  const SchedulerConfig& config() const { return cfg_; }
  Policy policy() const { return policy_; }
  std::size_t running_in_queue(std::size_t q) const { return running_in_queue_[q]; }

  /// Jobs currently holding dispatchable tasks in queue q, FIFO order.
  std::vector<std::size_t> ready_jobs(std::size_t q) const {
    std::vector<std::size_t> out;
    for (std::size_t r : ready_[q]) out.push_back(rank_to_job_[r]);
    return out;
  }

  /// Test hook: pretend `count` tasks from queue q are running.
  void set_running_in_queue(std::size_t q, std::size_t count) { running_in_queue_[q] = count; }

 private:
  static constexpr int kNoBucket = -1;
  static constexpr int kWorkConservation = -2;

  struct Pick {
    std::size_t job;
    std::size_t task;
    int bucket;
  };

  double raw_weight(std::size_t q) const { return std::pow(cfg_.queue_weight_decay, -static_cast<double>(q)); }

  HistoryQuery query(Millis now) const { return {now, cfg_.history_window_days}; }

  HistoryEstimator estimator() const {
    return policy_ == Policy::PointEst ? HistoryEstimator::Median : HistoryEstimator::Utility;
  }

  Prediction predict_stage(std::size_t j, std::size_t s, Millis now) const {
    const Job& job = jobs_[j];
    return history_predict_or_fallback(history_, job.features, job_width(job, s), query(now), estimator(),
                                       cfg_.q0_hi_ms);
  }

  std::size_t remaining_task_count(std::size_t j, std::size_t from_stage) const {
    const auto& b = records_[j].stage_bounds;
    return b.back() - b[from_stage];
  }

  void enter_stage(std::size_t j, std::size_t s, Millis now) {
    const Job& job = jobs_[j];
    auto& st = states_[j];
    const auto& bounds = records_[j].stage_bounds;
    st.stage = s;
    st.stage_begin = bounds[s];
    st.stage_end = bounds[s + 1];
    st.pilots.clear();
    st.regular.clear();
    st.next_pilot = st.next_regular = 0;
    st.pilot_durations.clear();
    st.stage_done = 0;
    const std::size_t width = st.stage_width();
    const bool thin = is_thin(width, cfg_.thin_limit);

    auto all_regular = [&] {
      for (std::size_t t = st.stage_begin; t < st.stage_end; ++t) st.regular.push_back(t);
    };
    auto place_estimated = [&](const Prediction& p) {
      st.phase = JobPhase::Estimated;
      all_regular();
      set_estimate(j, p, now);
      move_to_queue(j, static_cast<int>(queue_index_for(p.total_ms, cfg_)), now);
    };
    auto keep_queue = [&] {
      st.phase = JobPhase::Estimated;
      all_regular();
      refresh(j);
    };

    switch (policy_) {
      case Policy::SLearn:
        if (thin) {
          st.phase = JobPhase::ThinBypass;
          all_regular();
          move_to_queue(j, 0, now);
        } else {
          start_sampling(j, now);
        }
        break;
      case Policy::SLearnDAG:
        if (s > 0) {
          keep_queue();
        } else if (thin) {
          place_estimated(history_dag_prediction(j, now));
        } else {
          start_sampling(j, now);
        }
        break;
      case Policy::ThreeSigmaTL:
        if (thin) {
          st.phase = JobPhase::ThinBypass;
          all_regular();
          move_to_queue(j, 0, now);
          break;
        }
        [[fallthrough]];
      case Policy::ThreeSigma:
      case Policy::PointEst:
        place_estimated(predict_stage(j, s, now));
        break;
      case Policy::ThreeSigmaDAG:
        if (s > 0) {
          keep_queue();
        } else {
          place_estimated(history_dag_prediction(j, now));
        }
        break;
      case Policy::Oracle: {
        Millis total = 0, mx = 0;
        for (std::size_t t = st.stage_begin; t < job.task_durations_ms.size(); ++t) {
          total += job.task_durations_ms[t];
          mx = std::max(mx, job.task_durations_ms[t]);
        }
        const double tot = static_cast<double>(total);
        place_estimated({tot / static_cast<double>(remaining_task_count(j, s)), tot, static_cast<double>(mx),
                         PredictionSource::Oracle});
        break;
      }
      case Policy::FIFO:
        st.phase = JobPhase::Unestimated;
        all_regular();
        move_to_queue(j, 0, now);
        break;
      case Policy::LAS: {
        st.phase = JobPhase::Unestimated;
        all_regular();
        const Millis attained = st.attained_service(now);
        move_to_queue(j, attained > 0 ? static_cast<int>(queue_index_for(static_cast<double>(attained), cfg_)) : 0,
                      now);
        break;
      }
    }
  }

  /// Sum of per-stage history estimates for the whole DAG.
  Prediction history_dag_prediction(std::size_t j, Millis now) const {
    const Job& job = jobs_[j];
    std::vector<double> stage_totals;
    double mx = 0.0;
    for (std::size_t s = 0; s < job.stage_count(); ++s) {
      const auto p = predict_stage(j, s, now);
      stage_totals.push_back(p.total_ms);
      mx = std::max(mx, p.max_task_ms.value_or(0.0));
    }
    const double total = three_sigma_dag_estimate(stage_totals);
    return {total / static_cast<double>(job.task_durations_ms.size()), total, mx, PredictionSource::History};
  }

  void start_sampling(std::size_t j, Millis now) {
    auto& st = states_[j];
    auto& rec = records_[j];
    const double ratio = cfg_.sampling_mode == SamplingMode::Adaptive ? sampler_.next_ratio() : cfg_.fixed_ratio;
    const std::size_t width = st.stage_width();
    const auto local = select_pilots(width, pilot_count(width, ratio), rng_);
    std::vector<bool> is_pilot(width, false);
    for (std::size_t t : local) {
      st.pilots.push_back(st.stage_begin + t);
      is_pilot[t] = true;
      rec.pilot[st.stage_begin + t] = true;
    }
    for (std::size_t t = 0; t < width; ++t) {
      if (!is_pilot[t]) st.regular.push_back(st.stage_begin + t);
    }
    if (!st.sampling_ratio) {
      st.sampling_ratio = ratio;
      rec.sampling_ratio = ratio;
    }
    st.phase = JobPhase::Sampling;
    move_to_queue(j, static_cast<int>(cfg_.sampling_queue()), now);
  }

  void on_pilots_complete(std::size_t j, Millis now) {
    auto& st = states_[j];
    const Prediction sampled = slearn_estimate(st.pilot_durations, st.stage_width());
    Prediction est = sampled;
    if (policy_ == Policy::SLearnDAG) {
      const Job& job = jobs_[j];
      const double d_h = predict_stage(j, 0, now).total_ms;
      std::vector<double> rest;
      for (std::size_t s = 1; s < job.stage_count(); ++s) rest.push_back(predict_stage(j, s, now).total_ms);
      est.total_ms = slearn_dag_estimate(sampled.total_ms, d_h, rest);
      est.mean_task_ms = est.total_ms / static_cast<double>(job.task_durations_ms.size());
    }
    st.phase = JobPhase::Estimated;
    set_estimate(j, est, now);
    move_to_queue(j, static_cast<int>(queue_index_for(est.total_ms, cfg_)), now);
  }

  void set_estimate(std::size_t j, const Prediction& p, Millis now) {
    auto& st = states_[j];
    auto& rec = records_[j];
    st.estimate = p;
    if (!rec.estimate) {
      rec.estimate = p;
      rec.estimate_ready_ms = now;
      rec.queue_assigned = static_cast<int>(queue_index_for(p.total_ms, cfg_));
    }
  }

  void complete_stage(std::size_t j, Millis now) {
    const Job& job = jobs_[j];
    auto& st = states_[j];
    auto& rec = records_[j];
    if (uses_history(policy_)) {
      std::span<const Millis> durations(job.task_durations_ms.data() + st.stage_begin, st.stage_width());
      record_completion_online(history_, history_record_for(job.features, durations, now), cfg_.history_window_days);
    }
    if (st.stage + 1 < job.stage_count()) {
      enter_stage(j, st.stage + 1, now);
      return;
    }
    st.phase = JobPhase::Finished;
    rec.jct_ms = now - job.arrival_ms;
    if (rec.queue_assigned < 0 && st.queue >= 0) rec.queue_assigned = st.queue;
    move_to_queue(j, -1, now);
    if (st.sampling_ratio && cfg_.sampling_mode == SamplingMode::Adaptive) {
      sampler_.score_update(*st.sampling_ratio, rec.jct_ms, static_cast<double>(rec.total_work_ms));
    }
  }

  void move_to_queue(std::size_t j, int q, Millis now) {
    auto& st = states_[j];
    auto& rec = records_[j];
    if (st.queue != q || rec.queue_history.empty()) {
      st.queue = q;
      if (!rec.queue_history.empty() && rec.queue_history.back().time_ms == now) {
        rec.queue_history.back().queue = q;
      } else {
        rec.queue_history.push_back({now, q});
      }
    }
    refresh(j);
  }

  /// Re-derives which ready set (queue or work conservation) holds the job.
  void refresh(std::size_t j) {
    auto& st = states_[j];
    const std::size_t rank = rank_of_[j];
    if (st.ready_in >= 0) ready_[st.ready_in].erase(rank);
    if (st.in_wc) wc_ready_.erase(rank);
    st.ready_in = -1;
    st.in_wc = false;
    if (st.phase == JobPhase::Finished || st.queue < 0) return;
    const bool queue_eligible = st.phase == JobPhase::Sampling ? st.has_pilot() : (st.has_pilot() || st.has_regular());
    if (queue_eligible) {
      ready_[st.queue].insert(rank);
      st.ready_in = st.queue;
    }
    if (st.phase == JobPhase::Sampling && st.has_regular()) {
      wc_ready_.insert(rank);
      st.in_wc = true;
    }
  }

  std::optional<Pick> pick_task() {
    if (auto q = choose_queue()) {
      const std::size_t j = rank_to_job_[*ready_[*q].begin()];
      const auto& st = states_[j];
      const std::size_t task = st.has_pilot() ? st.pilots[st.next_pilot] : st.regular[st.next_regular];
      return Pick{j, task, static_cast<int>(*q)};
    }
    if (!wc_ready_.empty()) {
      const std::size_t j = rank_to_job_[*wc_ready_.begin()];
      const auto& st = states_[j];
      return Pick{j, st.regular[st.next_regular], kWorkConservation};
    }
    return std::nullopt;
  }

  void start_task(std::size_t j, std::size_t task, std::size_t machine, int bucket, Millis now) {
    auto& st = states_[j];
    auto& rec = records_[j];
    if (st.has_pilot() && st.pilots[st.next_pilot] == task) {
      ++st.next_pilot;
    } else {
      ++st.next_regular;
    }
    rec.task_starts_ms[task] = now;
    rec.task_machines[task] = machine;
    ++st.running;
    st.running_start_sum += now;
    machine_bucket_[machine] = bucket;
    if (bucket >= 0) ++running_in_queue_[bucket];
    refresh(j);
  }

  std::span<const Job> jobs_;
  Policy policy_;
  SchedulerConfig cfg_;
  HistoryStore history_;
  AdaptiveSampler sampler_;
  Rng rng_;
  std::vector<JobRuntimeState> states_;
  std::vector<JobRecord> records_;
  std::vector<std::size_t> rank_of_;
  std::vector<std::size_t> rank_to_job_;
  std::vector<std::set<std::size_t>> ready_;
  std::set<std::size_t> wc_ready_;
  std::vector<std::size_t> running_in_queue_;
  std::vector<int> machine_bucket_;
};

}  // namespace slearn
