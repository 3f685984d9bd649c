#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "slearn/traceio.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace slearn;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("slearn_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = std::string(SLEARN_CLI_PATH) + " " + args + " >" + (dir_ / "stdout").string() + " 2>" +
                            (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& p) const {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string gen_trace(const std::string& name, const std::string& extra = "") {
    EXPECT_EQ(run("gen --n-jobs 120 --rate 0.02 --width-max 40 --seed 3 --out " + path(name) + " " + extra), 0);
    return path(name);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateIsByteIdenticalAcrossRuns) {
  const auto trace = gen_trace("t.jsonl");
  for (const char* p : {"oracle", "slearn", "3sigma"}) {
    ASSERT_EQ(run(fmt::format("simulate --trace {} --policy {} --machines 150 --seed 7 --out {}", trace, p, path("a"))), 0);
    ASSERT_EQ(run(fmt::format("simulate --trace {} --policy {} --machines 150 --seed 7 --out {}", trace, p, path("b"))), 0);
    for (const char* f : {"jobs.csv", "errors.csv", "summary.csv"}) {
      const auto a = read(dir_ / "a" / f);
      EXPECT_FALSE(a.empty()) << f;
      EXPECT_EQ(a, read(dir_ / "b" / f)) << p << " " << f;
    }
  }
}

TEST_F(Cli, UnknownPolicyIsUsageError) {
  const auto trace = gen_trace("t.jsonl");
  EXPECT_EQ(run("simulate --trace " + trace + " --policy nope"), 2);
  EXPECT_NE(read(dir_ / "stderr").find("unknown policy"), std::string::npos);
}

TEST_F(Cli, HistoryPolicyNeedsHistory) {
  const auto trace = gen_trace("t.jsonl");
  EXPECT_EQ(run("simulate --trace " + trace + " --policy 3sigma --history-split 0 --out " + path("o")), 2);
  EXPECT_NE(read(dir_ / "stderr").find("--history"), std::string::npos);
  EXPECT_EQ(run("simulate --trace " + trace + " --policy 3sigma --history " + trace + " --history-split 0 --out " +
                path("o")),
            0);
}

TEST_F(Cli, BadFlagsAreUsageErrors) {
  const auto trace = gen_trace("t.jsonl");
  EXPECT_EQ(run("simulate --trace " + trace + " --policy fifo --window-days 5"), 2);
  EXPECT_EQ(run("simulate --trace " + trace + " --policy fifo --sampling fixed:abc"), 2);
  EXPECT_EQ(run("simulate --trace " + trace + " --policy fifo --machines 0"), 2);
  EXPECT_EQ(run("simulate --policy fifo"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST_F(Cli, MalformedTraceIsUsageError) {
  std::ofstream(path("bad.jsonl")) << "{\"job_id\": 1\n";
  EXPECT_EQ(run("simulate --trace " + path("bad.jsonl") + " --policy fifo --out " + path("o")), 2);
  EXPECT_NE(read(dir_ / "stderr").find("line 1"), std::string::npos);
}

TEST_F(Cli, CompareNeedsTwoPolicies) {
  const auto trace = gen_trace("t.jsonl");
  EXPECT_EQ(run("compare --trace " + trace + " --policies fifo --out " + path("c")), 2);
}

TEST_F(Cli, CompareFifoAgainstOracleOnSjfAdverseTrace) {
  // simultaneous arrivals with the long job first in FIFO order
  std::vector<Job> jobs{slearn::testing::make_job("a-long", 0, {5'000'000}), slearn::testing::make_job("b-short", 0, {10})};
  write_trace(jobs, path("two.jsonl"));
  ASSERT_EQ(run("compare --trace " + path("two.jsonl") +
                " --policies oracle,fifo --machines 1 --history-split 0 --weight-decay 1e9 --out " + path("c")),
            0);
  const auto csv = read(dir_ / "c" / "speedups_fifo.csv");
  ASSERT_FALSE(csv.empty());
  const auto summary = read(dir_ / "c" / "summary.csv");
  std::istringstream lines(summary);
  std::string header, oracle, fifo;
  std::getline(lines, header);
  std::getline(lines, oracle);
  std::getline(lines, fifo);
  ASSERT_EQ(fifo.rfind("fifo,", 0), 0u);
  // sixth column: mean-JCT speedup of the target (oracle) over fifo
  std::vector<std::string> cols;
  std::stringstream row(fifo);
  for (std::string c; std::getline(row, c, ',');) cols.push_back(c);
  EXPECT_GE(std::stod(cols.at(5)), 1.0);
  EXPECT_NEAR(std::stod(cols.at(5)), (5'000'000.0 + 5'000'010.0) / (10.0 + 5'000'010.0), 1e-9);
}

TEST_F(Cli, SamePolicyTwiceGivesUnitRatios) {
  const auto trace = gen_trace("t.jsonl");
  ASSERT_EQ(run("compare --trace " + trace + " --policies las,las --machines 20 --out " + path("c")), 0);
  std::istringstream in(read(dir_ / "c" / "speedups_las.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.substr(line.find(',') + 1), "1") << line;
    ++rows;
  }
  EXPECT_EQ(rows, 60);
}

TEST_F(Cli, BayesPrintsPosterior) {
  ASSERT_EQ(run("bayes --mu 2 --sigma0-sq 1 --sigma1-sq 1 --samples 4"), 0);
  const auto out = read(dir_ / "stdout");
  EXPECT_NE(out.find("mean 3\n"), std::string::npos) << out;
  EXPECT_NE(out.find("variance 0.5\n"), std::string::npos) << out;
  EXPECT_EQ(run("bayes --sigma0-sq inf --sigma1-sq 1"), 2);
}

TEST_F(Cli, ZeroTaskSkewGivesZeroSpatialCov) {
  const auto trace = gen_trace("t.jsonl", "--sigma1-ms 0");
  ASSERT_EQ(run("analyze --trace " + trace + " --out " + path("cov.csv")), 0);
  std::istringstream in(read(dir_ / "cov.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "job_id,cov_time_w3,cov_time_w7,cov_time_w14,cov_space");
  int checked = 0;
  while (std::getline(in, line)) {
    const auto v = line.substr(line.rfind(',') + 1);
    if (v.empty()) continue;
    EXPECT_EQ(v, "0") << line;
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST_F(Cli, GenIsDeterministic) {
  gen_trace("a.jsonl");
  gen_trace("b.jsonl");
  EXPECT_EQ(read(dir_ / "a.jsonl"), read(dir_ / "b.jsonl"));
  ASSERT_EQ(run("gen-dag --base " + path("a.jsonl") + " --seed 1 --out " + path("d.jsonl")), 0);
  const auto dags = parse_trace(path("d.jsonl"));
  EXPECT_FALSE(dags.empty());
  EXPECT_TRUE(dags.front().stages.has_value());
  ASSERT_EQ(run("simulate --trace " + path("d.jsonl") + " --policy slearn-dag --out " + path("o")), 0);
}
