#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(CRF_CLI_PATH) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("crf_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, EstimateJson) {
  const auto m = write("msd.json", R"({"kind": "mean_semideviation", "kappa": 0.5, "p": 2})");
  const CliRun r = run("estimate --measure " + m + " --law normal_var:10,3 --n 300 --seed 4");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_GT(j["value"].get<double>(), 10.0);
  EXPECT_LT(j["interval"]["lower"].get<double>(), j["value"].get<double>());
  EXPECT_GT(j["limit_variance"].get<double>(), 0.0);
  EXPECT_EQ(j["config"]["measure"]["kind"], "mean_semideviation");
}

TEST_F(Cli, EstimateCsvIsDeterministic) {
  const auto m = write("mean.json", R"({"kind": "mean"})");
  const CliRun a = run("estimate --measure " + m + " --law uniform:0,1 --n 50 --format csv");
  const CliRun b = run("estimate --measure " + m + " --law uniform:0,1 --n 50 --format csv");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.rfind("value,lower,upper,limit_variance\n", 0), 0u);
}

TEST_F(Cli, SimulateWritesAllOutputs) {
  const auto m = write("msd.json", R"({"kind": "mean_semideviation"})");
  const fs::path out = dir_ / "study";
  const CliRun r = run("simulate --measure " + m + " --law normal_var:10,3 --n 40 --replications 30 --bins 8 --out " +
                    out.string());
  ASSERT_EQ(r.code, 0);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  for (const char* key : {"mean", "bias", "std", "ks", "reference", "config"}) EXPECT_TRUE(summary.contains(key)) << key;
  EXPECT_EQ(nlohmann::json::parse(r.out), summary);
  const std::string est = slurp(out / "estimates.csv");
  EXPECT_EQ(est.rfind("replication,value\n", 0), 0u);
  EXPECT_EQ(std::count(est.begin(), est.end(), '\n'), 31);
  const std::string hist = slurp(out / "histogram.csv");
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 9);
}

TEST_F(Cli, WorkersDoNotChangeCsv) {
  const auto m = write("msd.json", R"({"kind": "mean_semideviation"})");
  const std::string base = "simulate --measure " + m + " --law normal_var:10,3 --n 40 --replications 40 --format csv";
  const CliRun one = run(base + " --workers 1");
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(one.out, run(base + " --workers 4").out);
}

TEST_F(Cli, CompareAndSystemic) {
  const auto m = write("msd.json", R"({"kind": "mean_semideviation"})");
  const CliRun c = run("compare --measure " + m + " --law normal_var:10,3 --law2 normal_var:20,5 --n 30 --replications 20");
  ASSERT_EQ(c.code, 0);
  EXPECT_LT(nlohmann::json::parse(c.out)["reference"]["mean"].get<double>(), -9.0);

  const auto s = write("sys.json", R"({"kind": "systemic", "weights": [0.5, 0.5],
    "components": [{"measure": {"kind": "mean"}, "law": "uniform:0,1"},
                   {"measure": {"kind": "mean"}, "law": "uniform:0,3"}]})");
  const CliRun sys = run("systemic --measure " + s + " --n 30 --replications 20");
  ASSERT_EQ(sys.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(sys.out)["reference"]["mean"].get<double>(), 1.0, 1e-12);
}

TEST_F(Cli, CheckIdentity) {
  CliRun r = run("check-identity --kernel gaussian --bandwidth power:1,0.75");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(nlohmann::json::parse(r.out)["pass"].get<bool>());
  r = run("check-identity --kernel uniform --bandwidth silverman");
  ASSERT_EQ(r.code, 0);
  EXPECT_FALSE(nlohmann::json::parse(r.out)["pass"].get<bool>());
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  const auto m = write("msd.json", R"({"kind": "mean_semideviation"})");
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("estimate --law normal:0,1").code, 2);
  EXPECT_EQ(run("estimate --measure " + m + " --law lognormal:0,1").code, 2);
  EXPECT_EQ(run("estimate --measure " + m + " --kernel triangle").code, 2);
  EXPECT_EQ(run("estimate --measure " + m + " --bandwidth power:1").code, 2);
  EXPECT_EQ(run("estimate --measure " + m + " --level 1.5").code, 2);
  EXPECT_EQ(run("estimate --measure " + write("bad.json", "{not json")).code, 2);
  EXPECT_EQ(run("optimize --measure " + m + " --replications 10").code, 2);
  EXPECT_EQ(run("simulate --measure " + m + " --unknown-flag 1").code, 2);
}

TEST_F(Cli, NumericalErrorExitsThree) {
  // Squared deviations of a 1e200-scale law overflow in the tail layer.
  const auto m = write("msd.json", R"({"kind": "mean_semideviation"})");
  const std::string cmd = std::string(CRF_CLI_PATH) + " estimate --measure " + m +
                          " --law normal:0,1e200 --n 10 2>&1 1>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char buf[1024] = {0};
  const std::size_t got = fread(buf, 1, sizeof buf - 1, pipe);
  const int status = pclose(pipe);
  const std::string err(buf, got);
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 3) << err;
  EXPECT_NE(err.find("estimators, layer 2"), std::string::npos) << err;
}
