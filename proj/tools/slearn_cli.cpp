// slearn: command-line front end for the trace-driven scheduling simulator.
//
//   slearn simulate --trace t.jsonl --policy slearn --machines 150 --seed 7 --out run/
//   slearn compare  --trace t.jsonl --policies slearn,3sigma,oracle --out cmp/
//   slearn analyze  --trace t.jsonl --out cov.csv
//   slearn gen      --n-jobs 1000 --sigma0-ms 5e4 --out t.jsonl
//   slearn gen-dag  --base t.jsonl --out dag.jsonl
//   slearn bayes    --mu 2 --sigma0-sq 1 --sigma1-sq 1 --samples 4

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slearn/commands.hpp"

namespace {

using namespace slearn;

struct SchedulerFlags {
  std::size_t machines = 150;
  std::size_t queues = 10;
  double q0_hi_ms = 1e6;
  double growth = 10.0;
  double weight_decay = 10.0;
  std::size_t thin_limit = 3;
  std::string sampling = "adaptive";
  std::size_t adaptive_T = 100;
  int window_days = 14;
  double history_split = 0.5;
  std::string history;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string trace;
};

void add_scheduler_flags(CLI::App* cmd, SchedulerFlags& f) {
  cmd->add_option("--trace", f.trace, "JSON-lines trace")->required()->check(CLI::ExistingFile);
  cmd->add_option("--history", f.history, "separate history trace (replaces --history-split)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--machines", f.machines, "cluster size")->capture_default_str();
  cmd->add_option("--queues", f.queues, "number of priority queues")->capture_default_str();
  cmd->add_option("--q0-hi-ms", f.q0_hi_ms, "upper threshold of the first queue")->capture_default_str();
  cmd->add_option("--growth", f.growth, "queue threshold growth factor")->capture_default_str();
  cmd->add_option("--weight-decay", f.weight_decay, "queue weight ratio between neighbours")->capture_default_str();
  cmd->add_option("--thin-limit", f.thin_limit, "jobs narrower than this skip sampling")->capture_default_str();
  cmd->add_option("--sampling", f.sampling, "adaptive | fixed:<ratio>")->capture_default_str();
  cmd->add_option("--adaptive-window", f.adaptive_T, "jobs per ratio in the adaptive sampler")->capture_default_str();
  cmd->add_option("--window-days", f.window_days, "history window")
      ->check(CLI::IsMember({3, 7, 14}))
      ->capture_default_str();
  cmd->add_option("--history-split", f.history_split, "leading trace fraction used as history")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "run seed")->capture_default_str();
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
}

SchedulerConfig to_config(const SchedulerFlags& f) {
  SchedulerConfig cfg;
  cfg.machines = f.machines;
  cfg.num_queues = f.queues;
  cfg.q0_hi_ms = f.q0_hi_ms;
  cfg.growth_factor = f.growth;
  cfg.queue_weight_decay = f.weight_decay;
  cfg.thin_limit = f.thin_limit;
  cfg.adaptive_T = f.adaptive_T;
  cfg.history_window_days = f.window_days;
  cfg.seed = f.seed;
  if (f.sampling == "adaptive") {
    cfg.sampling_mode = SamplingMode::Adaptive;
  } else if (f.sampling.rfind("fixed:", 0) == 0) {
    cfg.sampling_mode = SamplingMode::Fixed;
    try {
      cfg.fixed_ratio = std::stod(f.sampling.substr(6));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, "bad --sampling ratio: " + f.sampling);
    }
  } else {
    throw Error(ErrorKind::InvalidConfig, "--sampling must be adaptive or fixed:<ratio>");
  }
  cfg.validate();
  return cfg;
}

Policy policy_or_throw(const std::string& name) {
  if (auto p = parse_policy(name)) return *p;
  throw Error(ErrorKind::InvalidConfig, "unknown policy: " + name);
}

cli::RunManifest to_manifest(const SchedulerFlags& f) {
  cli::RunManifest m;
  m.trace_path = f.trace;
  if (!f.history.empty()) m.history_path = f.history;
  m.config = to_config(f);
  m.history_split = f.history_split;
  m.out_dir = f.out;
  return m;
}

double parse_variance(const std::string& s) {
  if (s == "inf" || s == "infinity") return bayes::kNoPrior;
  return std::stod(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven cluster scheduling simulator with sampling- and history-based job runtime prediction"};
  app.require_subcommand(1);

  SchedulerFlags sim_flags;
  std::string policy_name;
  auto* simulate = app.add_subcommand("simulate", "replay a trace under one policy");
  add_scheduler_flags(simulate, sim_flags);
  simulate->add_option("--policy", policy_name, "slearn|3sigma|3sigma-tl|point-est|las|fifo|oracle|slearn-dag|3sigma-dag")
      ->required();

  SchedulerFlags cmp_flags;
  std::vector<std::string> policy_names;
  std::string target_name;
  auto* compare = app.add_subcommand("compare", "replay a trace under several policies and report speedups");
  add_scheduler_flags(compare, cmp_flags);
  compare->add_option("--policies", policy_names, "policies to run")->delimiter(',')->required();
  compare->add_option("--target", target_name, "policy whose speedup is reported (default: first)");

  std::string analyze_trace, analyze_out = "cov.csv";
  std::vector<int> windows{3, 7, 14};
  double analyze_ratio = 0.03;
  auto* analyze = app.add_subcommand("analyze", "per-job variability across time and space");
  analyze->add_option("--trace", analyze_trace, "JSON-lines trace")->required()->check(CLI::ExistingFile);
  analyze->add_option("--windows", windows, "three history windows in days")->delimiter(',')->expected(3);
  analyze->add_option("--ratio", analyze_ratio, "sampling ratio for the spatial CoV")->capture_default_str();
  analyze->add_option("--out", analyze_out, "output CSV")->capture_default_str();

  SynthSpec spec;
  std::string gen_out = "trace.jsonl", width_law = "uniform";
  auto* gen = app.add_subcommand("gen", "generate a synthetic trace");
  gen->add_option("--n-jobs", spec.n_jobs)->capture_default_str();
  gen->add_option("--rate", spec.arrival_rate_per_s, "Poisson arrivals per second")->capture_default_str();
  gen->add_option("--width-min", spec.width_min)->capture_default_str();
  gen->add_option("--width-max", spec.width_max)->capture_default_str();
  gen->add_option("--width-law", width_law, "uniform | lognormal")->capture_default_str();
  gen->add_option("--width-log-mu", spec.width_log_mu)->capture_default_str();
  gen->add_option("--width-log-sigma", spec.width_log_sigma)->capture_default_str();
  gen->add_option("--mu-ms", spec.mu_ms, "prior mean task length")->capture_default_str();
  gen->add_option("--sigma0-ms", spec.sigma0_ms, "job-wise standard deviation")->capture_default_str();
  gen->add_option("--sigma1-ms", spec.sigma1_ms, "task-wise standard deviation")->capture_default_str();
  gen->add_option("--apps", spec.n_apps)->capture_default_str();
  gen->add_option("--users", spec.n_users)->capture_default_str();
  gen->add_option("--names", spec.n_names)->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--out", gen_out)->capture_default_str();

  std::string dag_base, dag_out = "dag.jsonl";
  std::uint64_t dag_seed = 0;
  auto* gen_dag = app.add_subcommand("gen-dag", "chain consecutive jobs of a trace into 2-5 stage DAGs");
  gen_dag->add_option("--base", dag_base, "base trace")->required()->check(CLI::ExistingFile);
  gen_dag->add_option("--seed", dag_seed)->capture_default_str();
  gen_dag->add_option("--out", dag_out)->capture_default_str();

  double mu = 0.0;
  std::string sigma0_sq = "inf";
  double sigma1_sq = 1.0;
  std::vector<double> samples;
  auto* bayes_cmd = app.add_subcommand("bayes", "posterior of the mean task length given sampled tasks");
  bayes_cmd->add_option("--mu", mu, "prior mean")->capture_default_str();
  bayes_cmd->add_option("--sigma0-sq", sigma0_sq, "prior (job-wise) variance, or inf")->capture_default_str();
  bayes_cmd->add_option("--sigma1-sq", sigma1_sq, "task-wise variance")->capture_default_str();
  bayes_cmd->add_option("--samples", samples, "sampled task lengths")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      auto m = to_manifest(sim_flags);
      m.policies = {policy_or_throw(policy_name)};
      cli::cmd_simulate(m);
    } else if (*compare) {
      auto m = to_manifest(cmp_flags);
      m.policies.clear();
      for (const auto& n : policy_names) m.policies.push_back(policy_or_throw(n));
      if (!target_name.empty()) m.target = policy_or_throw(target_name);
      cli::cmd_compare(m);
    } else if (*analyze) {
      if (windows.size() != 3) throw Error(ErrorKind::InvalidConfig, "--windows takes three values");
      cli::cmd_analyze(analyze_trace, {windows[0], windows[1], windows[2]}, analyze_ratio, analyze_out);
    } else if (*gen) {
      if (width_law == "uniform") {
        spec.width_law = WidthLaw::Uniform;
      } else if (width_law == "lognormal") {
        spec.width_law = WidthLaw::LogNormal;
      } else {
        throw Error(ErrorKind::InvalidConfig, "--width-law must be uniform or lognormal");
      }
      cli::cmd_gen(spec, gen_out);
    } else if (*gen_dag) {
      cli::cmd_gen_dag(dag_base, dag_seed, dag_out);
    } else if (*bayes_cmd) {
      double s0 = 0.0;
      try {
        s0 = parse_variance(sigma0_sq);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidConfig, "bad --sigma0-sq: " + sigma0_sq);
      }
      cli::cmd_bayes({mu, s0}, {sigma1_sq}, samples, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool scheduling = *simulate || *compare;
    return scheduling ? cli::exit_code_for(e) : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
