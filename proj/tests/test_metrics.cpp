#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "slearn/engine.hpp"
#include "slearn/metrics.hpp"
#include "test_support.hpp"

using namespace slearn;
using namespace slearn::metrics;
using namespace slearn::testing;

namespace {

JobRecord finished(std::string id, Millis arrival, std::vector<Millis> starts, std::vector<Millis> finishes, int queue) {
  JobRecord r;
  r.id = std::move(id);
  r.arrival_ms = arrival;
  r.width = starts.size();
  for (std::size_t i = 0; i < starts.size(); ++i) r.total_work_ms += finishes[i] - starts[i];
  r.task_starts_ms = std::move(starts);
  r.task_finishes_ms = std::move(finishes);
  r.task_machines.assign(r.task_starts_ms.size(), 0);
  r.pilot.assign(r.task_starts_ms.size(), false);
  r.jct_ms = *std::max_element(r.task_finishes_ms.begin(), r.task_finishes_ms.end()) - arrival;
  r.queue_history.push_back({arrival, queue});
  r.queue_history.push_back({r.arrival_ms + r.jct_ms, -1});
  return r;
}

JobRecord estimated(double est, Millis actual, std::size_t width = 5) {
  JobRecord r;
  r.id = "j";
  r.width = width;
  r.total_work_ms = actual;
  r.estimate = Prediction{est / static_cast<double>(width), est, std::nullopt, PredictionSource::History};
  return r;
}

SimResult result_of(std::vector<JobRecord> jobs, std::size_t machines = 1) {
  SimResult r;
  r.config.machines = machines;
  r.jobs = std::move(jobs);
  return r;
}

}  // namespace

TEST(PredictionError, Examples) {
  auto e = prediction_error(120, 100);
  EXPECT_DOUBLE_EQ(e.signed_pct, 20);
  EXPECT_DOUBLE_EQ(e.abs_pct, 20);
  e = prediction_error(100, 100);
  EXPECT_EQ(e.signed_pct, 0);
  e = prediction_error(1e5, 10);
  EXPECT_EQ(e.signed_pct, 1000);
  EXPECT_DOUBLE_EQ(e.abs_pct, 999900);
  e = prediction_error(50, 100);
  EXPECT_DOUBLE_EQ(e.signed_pct, -50);
  EXPECT_DOUBLE_EQ(e.abs_pct, 50);
  expect_error(ErrorKind::InvalidActual, [] { prediction_error(1, 0); });
}

TEST(Speedup, Examples) {
  auto base = result_of({finished("a", 0, {0}, {100}, 0), finished("b", 0, {0}, {300}, 0)});
  auto target = result_of({finished("a", 0, {0}, {100}, 0), finished("b", 0, {0}, {150}, 0)});
  const auto rep = jct_speedup(base, target);
  EXPECT_DOUBLE_EQ(rep.mean_jct_speedup, 1.6);
  EXPECT_DOUBLE_EQ(rep.per_job[1].second, 2.0);
  const auto same = jct_speedup(base, base);
  for (const auto& [id, r] : same.per_job) EXPECT_EQ(r, 1.0);
  target.jobs.pop_back();
  expect_error(ErrorKind::JobSetMismatch, [&] { jct_speedup(base, target); });
}

TEST(CovTime, Examples) {
  HistoryStore store;
  for (double a : {10.0, 10.0, 10.0}) store.record_completion({1, a, a, a, features("A", "u", "n")}, {});
  auto rep = cov_time(store, features("A", "zz", "zz"), 10, 14);
  EXPECT_EQ(rep.per_feature.at(Feature::Application), 0.0);

  HistoryStore two;
  two.record_completion({1, 5, 5, 5, features("A", "u1", "n1")}, {});
  two.record_completion({2, 15, 15, 15, features("A", "u2", "n2")}, {});
  auto q = features("A", "zz", "zz");
  q.submit_day = 4;
  q.submit_hour = 4;
  q.cpu_req = 7;
  rep = cov_time(two, q, 10, 14);
  EXPECT_DOUBLE_EQ(rep.min_cov, 0.5);
  EXPECT_EQ(rep.argmin, Feature::Application);
}

TEST(CovTime, MinimumOverFeatures) {
  HistoryStore store;
  store.record_completion({1, 5, 5, 5, features("A", "U", "n1")}, {});
  store.record_completion({2, 15, 15, 15, features("A", "x", "n2")}, {});
  store.record_completion({3, 8, 8, 8, features("b", "U", "n3")}, {});
  store.record_completion({4, 12, 12, 12, features("c", "U", "n4")}, {});
  auto q = features("A", "U", "zz");
  q.submit_day = 2;
  q.submit_hour = 5;
  q.cpu_req = 9;
  const auto rep = cov_time(store, q, 10, 14);
  EXPECT_DOUBLE_EQ(rep.per_feature.at(Feature::Application), 0.5);
  // user matches are 5, 8, 12: population sigma over mean
  const double mu = 25.0 / 3.0;
  const double sd = std::sqrt(((5 - mu) * (5 - mu) + (8 - mu) * (8 - mu) + (12 - mu) * (12 - mu)) / 3.0);
  EXPECT_DOUBLE_EQ(rep.per_feature.at(Feature::User), sd / mu);
  EXPECT_EQ(rep.argmin, Feature::User);
  HistoryStore lonely;
  lonely.record_completion({1, 5, 5, 5, features()}, {});
  expect_error(ErrorKind::InsufficientHistory, [&] { cov_time(lonely, features(), 10, 14); });
}

TEST(CovSpace, Examples) {
  EXPECT_EQ(cov_space(std::vector<Millis>{7, 7, 7}, 0.03), 0.0);
  EXPECT_NEAR(cov_space(std::vector<Millis>{1, 3}, 0.03), 1.0 / (std::sqrt(0.06) * 2.0), 1e-12);
  EXPECT_NEAR(cov_space(std::vector<Millis>{1, 3}, 0.03), 2.0412, 1e-4);
  // ratio 1: the standard error of the mean relative to the mean
  const std::vector<Millis> d{2, 4, 9, 1};
  const double mu = 4.0;
  const double sd = std::sqrt((4 + 0 + 25 + 9) / 4.0);
  EXPECT_NEAR(cov_space(d, 1.0), sd / (2.0 * mu), 1e-12);
  expect_error(ErrorKind::Undefined, [] { cov_space(std::vector<Millis>{5}, 0.03); });
}

TEST(WaitingTime, Examples) {
  EXPECT_EQ(normalized_waiting_time(finished("a", 10, {10, 10}, {20, 30}, 0)), 0.0);
  // waits [0, 100], mean task 50
  EXPECT_DOUBLE_EQ(normalized_waiting_time(finished("b", 0, {0, 100}, {40, 160}, 0)), 1.0);
  // waits [50, 50], mean task 100
  EXPECT_DOUBLE_EQ(normalized_waiting_time(finished("c", 0, {50, 50}, {150, 150}, 0)), 0.5);
}

TEST(Resistance, TwoMachineExample) {
  // target arrives at 100 in queue 1; two tasks are running with 500 and 300
  // ms left, and a queue-0 job still holds 200 ms of unstarted work
  auto r = result_of({finished("run1", 0, {0}, {600}, 1), finished("run2", 0, {0}, {400}, 1),
                      finished("ahead", 50, {600}, {800}, 0), finished("target", 100, {800}, {900}, 1),
                      finished("behind", 100, {900}, {1000}, 2)},
                     2);
  EXPECT_DOUBLE_EQ(resistance(r, "target", ResistanceAt::Arrival), 500.0);
}

TEST(Resistance, EmptyAndAlone) {
  auto r = result_of({finished("a", 0, {0}, {10}, 0), finished("b", 100, {100}, {110}, 0)}, 3);
  EXPECT_EQ(resistance(r, "a", ResistanceAt::Arrival), 0.0);
  EXPECT_EQ(resistance(r, "b", ResistanceAt::Arrival), 0.0);
  expect_error(ErrorKind::InvalidJob, [&] { resistance(r, "zz", ResistanceAt::Arrival); });
}

TEST(Resistance, AtEstimateReadyUsesThatInstant) {
  auto target = finished("t", 0, {0, 100}, {100, 200}, 1);
  target.estimate_ready_ms = 100;
  auto r = result_of({finished("o", 0, {0}, {300}, 1), target}, 2);
  // at 100: the other task has 200 left
  EXPECT_DOUBLE_EQ(resistance(r, "t", ResistanceAt::EstimateReady), 100.0);
}

TEST(CorrectQueue, Examples) {
  const SchedulerConfig cfg;
  EXPECT_EQ(correct_queue_fraction(result_of({estimated(5e5, 2'000'000)}), cfg), 0.0);
  EXPECT_EQ(correct_queue_fraction(result_of({estimated(2e5, 900'000)}), cfg), 1.0);
  EXPECT_EQ(correct_queue_fraction(result_of({estimated(2e5, 900'000), estimated(5e5, 2'000'000)}), cfg), 0.5);
  // thin jobs are not counted
  EXPECT_EQ(correct_queue_fraction(result_of({estimated(5e5, 2'000'000, 2)}), cfg), 1.0);
}

TEST(CorrectQueue, OracleRunIsPerfect) {
  SynthSpec spec;
  spec.n_jobs = 200;
  spec.sigma0_ms = 8e4;
  SchedulerConfig cfg;
  cfg.machines = 20;
  const auto r = run(gen_synthetic(spec), Policy::Oracle, cfg);
  EXPECT_EQ(correct_queue_fraction(r, cfg), 1.0);
  const auto m = misplacement_report(r, cfg);
  EXPECT_EQ(m.misplaced_over_pct, 0.0);
  EXPECT_EQ(m.misplaced_under_pct, 0.0);
}

TEST(Bins, Examples) {
  EXPECT_EQ(bin_of(2, 500'000), Bin::Bin1);
  EXPECT_EQ(bin_of(5, 2'000'000), Bin::Bin4);
  EXPECT_EQ(bin_of(3, 999'999), Bin::Bin2);
  EXPECT_EQ(bin_of(1, 1'000'000), Bin::Bin3);
  EXPECT_EQ(bin_of(make_job("a", 0, {600'000, 600'000})), Bin::Bin3);
}

TEST(Misplacement, Examples) {
  const SchedulerConfig cfg;
  auto m = misplacement_report(result_of({estimated(2e6, 500'000)}), cfg);
  EXPECT_EQ(m.overestimated_pct, 100.0);
  EXPECT_EQ(m.misplaced_over_pct, 100.0);
  m = misplacement_report(result_of({estimated(9e5, 500'000)}), cfg);
  EXPECT_EQ(m.overestimated_pct, 100.0);
  EXPECT_EQ(m.misplaced_over_pct, 0.0);
  m = misplacement_report(result_of({estimated(1e5, 2'000'000)}), cfg);
  EXPECT_EQ(m.underestimated_pct, 100.0);
  EXPECT_EQ(m.misplaced_under_pct, 100.0);
}

TEST(Csv, SummaryHasOneRowPerRun) {
  SynthSpec spec;
  spec.n_jobs = 30;
  SchedulerConfig cfg;
  cfg.machines = 10;
  const auto r = run(gen_synthetic(spec), Policy::FIFO, cfg);
  std::vector<SummaryRow> rows{summarize(r)};
  std::ostringstream out;
  write_summary_csv(out, rows);
  const auto text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.rfind("policy,jobs,mean_jct_ms", 0), 0u);
  EXPECT_NE(text.find("\nfifo,30,"), std::string::npos);
}

TEST(Cdf, Monotone) {
  const auto c = cdf({3, 1, 2, 2});
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c.front().first, 1);
  EXPECT_EQ(c.back().second, 1.0);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i].first, c[i - 1].first);
}
