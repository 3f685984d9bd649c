#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slearn/domain.hpp"
#include "slearn/error.hpp"
#include "slearn/history_store.hpp"
#include "slearn/scheduler.hpp"

namespace slearn {

struct RunningTask {
  std::size_t job;
  std::size_t task;
};

/// Deterministic discrete-event replay of a trace through the scheduler.
///
/// Events are processed in SimEvent order (TaskFinish before JobArrival at
/// equal times). Idle machines are filled once every event at the current
/// timestamp has been processed, so simultaneous arrivals compete for the
/// same capacity.
class Simulator {
 public:
  Simulator(std::vector<Job> trace, Policy policy, const SchedulerConfig& cfg, HistoryStore history = HistoryStore{})
      : trace_(checked(std::move(trace))),
        policy_(policy),
        cfg_(cfg),
        machines_(cfg.machines),
        scheduler_(trace_, policy, cfg, std::move(history)) {
    for (std::size_t i = 0; i < trace_.size(); ++i) {
      const Job& job = trace_[i];
      if (!index_.emplace(job.id, i).second) throw Error(ErrorKind::DuplicateJob, job.id);
      heap_.push({job.arrival_ms, EventKind::JobArrival, job.id, 0, 0});
    }
  }

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  bool done() const { return heap_.empty(); }
  Millis clock() const { return clock_; }
  const Scheduler& scheduler() const { return scheduler_; }
  std::span<const std::optional<RunningTask>> machines() const { return machines_; }

  SimEvent step() {
    if (heap_.empty()) throw Error(ErrorKind::NoMoreEvents, "event heap is empty");
    SimEvent ev = heap_.top();
    heap_.pop();
    clock_ = ev.time_ms;
    const std::size_t j = index_.at(ev.job_id);
    if (ev.kind == EventKind::JobArrival) {
      scheduler_.on_job_arrival(j, clock_);
    } else {
      machines_[ev.machine].reset();
      scheduler_.on_task_finish(j, ev.task, ev.machine, clock_);
    }
    events_.push_back(ev);
    if (heap_.empty() || heap_.top().time_ms > clock_) dispatch_idle();
    return ev;
  }

  SimResult run_to_completion() && {
    while (!done()) step();
    SimResult out;
    out.policy = policy_;
    out.config = cfg_;
    out.seed = cfg_.seed;
    out.jobs = std::move(scheduler_).take_records();
    out.events = std::move(events_);
    return out;
  }

 private:
  static std::vector<Job> checked(std::vector<Job> trace) {
    for (std::size_t i = 0; i < trace.size(); ++i) {
      trace[i].validate();
      if (i > 0 && trace[i].arrival_ms < trace[i - 1].arrival_ms) {
        throw Error(ErrorKind::UnsortedTrace, trace[i].id + " arrives before its predecessor");
      }
    }
    return trace;
  }

  void dispatch_idle() {
    std::vector<std::size_t> idle;
    for (std::size_t m = 0; m < machines_.size(); ++m) {
      if (!machines_[m]) idle.push_back(m);
    }
    if (idle.empty()) return;
    for (const Assignment& a : scheduler_.dispatch(idle, clock_)) {
      machines_[a.machine] = RunningTask{a.job, a.task};
      const Job& job = trace_[a.job];
      heap_.push({clock_ + job.task_durations_ms[a.task], EventKind::TaskFinish, job.id, a.task, a.machine});
    }
  }

  std::vector<Job> trace_;
  Policy policy_;
  SchedulerConfig cfg_;
  std::vector<std::optional<RunningTask>> machines_;
  Scheduler scheduler_;
  std::unordered_map<std::string, std::size_t> index_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<>> heap_;
  std::vector<SimEvent> events_;
  Millis clock_ = 0;
};

inline SimResult run(std::vector<Job> trace, Policy policy, const SchedulerConfig& cfg,
                     HistoryStore history = HistoryStore{}) {
  return Simulator(std::move(trace), policy, cfg, std::move(history)).run_to_completion();
}

}  // namespace slearn
