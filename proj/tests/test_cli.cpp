#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "rieszstop/cli.hpp"

using namespace rieszstop;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot{RIESZSTOP_SOURCE_DIR};

struct Run {
  int code = -1;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "rieszstop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("rieszstop_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& name, const json& j) const {
    const auto p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }
  std::string out(const std::string& sub = "out") const { return (dir_ / sub).string(); }
  std::string config(const std::string& name) const { return (kRoot / "configs" / name).string(); }

  fs::path dir_;
};

json error_of(const Run& r) {
  std::istringstream in(r.err);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return json::parse(last)["error"];
}

}  // namespace

TEST_F(Cli, PerpetualWritesResults) {
  const auto r = run({"perpetual", "--config", config("perpetual.json"), "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(slurp(dir_ / "out" / "perpetual.json"));
  EXPECT_NEAR(doc["result"]["x_star"].get<double>(), 4.0 / 7.0, 1e-12);
  EXPECT_TRUE(doc["gate_pass"].get<bool>());
  EXPECT_EQ(doc["subcommand"], "perpetual");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "perpetual.csv"));
}

TEST_F(Cli, RefusesOverwriteWithoutForce) {
  ASSERT_EQ(run({"perpetual", "--config", config("perpetual.json"), "--out", out()}).code, 0);
  const auto before = slurp(dir_ / "out" / "perpetual.csv");
  const auto r = run({"perpetual", "--config", config("perpetual.json"), "--out", out()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_of(r)["type"], "config_error");
  EXPECT_EQ(slurp(dir_ / "out" / "perpetual.csv"), before);
  EXPECT_EQ(run({"perpetual", "--config", config("perpetual.json"), "--out", out(), "--force"}).code, 0);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"perpetual"}).code, 2);
  EXPECT_EQ(run({"perpetual", "--config", out("nope.json")}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, BadConfigs) {
  const auto bad = dir_ / "bad.json";
  std::ofstream(bad) << "{ \"d\": 1, ";
  auto r = run({"perpetual", "--config", bad.string(), "--out", out()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_of(r)["exit_code"], 2);

  json j = json::parse(slurp(kRoot / "configs" / "perpetual.json"));
  j["a"] = json::array({0.0});
  EXPECT_EQ(run({"perpetual", "--config", write_config("neg.json", j), "--out", out()}).code, 2);

  json v = json::parse(slurp(kRoot / "configs" / "verify_duality.json"));
  v["verify"].erase("box_b");
  r = run({"verify", "--config", write_config("nobox.json", v), "--out", out()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(error_of(r)["message"].get<std::string>().find("box_b"), std::string::npos);

  json d = json::parse(slurp(kRoot / "configs" / "perpetual.json"));
  d["mu"] = json::array({0.08});  // no finite stopping boundary
  EXPECT_EQ(run({"perpetual", "--config", write_config("mu.json", d), "--out", out()}).code, 2);
}

TEST_F(Cli, AmputStepsFlagOverridesConfig) {
  json j = json::parse(slurp(kRoot / "configs" / "amput.json"));
  j["amput"]["oracle_steps"] = 0;
  const auto r = run({"amput", "--config", write_config("put.json", j), "--out", out(), "--steps", "120"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(slurp(dir_ / "out" / "amput.json"));
  EXPECT_EQ(doc["flags"]["steps"], 120);
  EXPECT_EQ(doc["config"]["amput"]["steps"], 120);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "amput_boundary.csv"));
}

TEST_F(Cli, GateFailureExitsFour) {
  json j = json::parse(slurp(kRoot / "configs" / "amput.json"));
  j["amput"]["oracle_steps"] = 0;
  j["amput"]["steps"] = 100;
  j["amput"]["gate_factor"] = 1e30;  // no shifted curve can be that much worse
  const auto r = run({"amput", "--config", write_config("gate.json", j), "--out", out()});
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_EQ(error_of(r)["type"], "gate_failure");
  // results are still written for inspection
  EXPECT_FALSE(json::parse(slurp(dir_ / "out" / "amput.json"))["gate_pass"].get<bool>());
}

TEST_F(Cli, SolverFailureExitsThree) {
  const auto r = run({"perpetual", "--config", config("perpetual.json"), "--out", out(), "--tol", "1e-300"});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_EQ(error_of(r)["type"], "solver_error");
}

TEST_F(Cli, VerifyIsByteReproducibleForFixedSeed) {
  json j = json::parse(slurp(kRoot / "configs" / "verify_duality.json"));
  j["verify"]["paths"] = 4000;
  const auto cfg = write_config("dual.json", j);
  ASSERT_EQ(run({"verify", "--config", cfg, "--out", out("a"), "--seed", "9"}).code, 0);
  ASSERT_EQ(run({"verify", "--config", cfg, "--out", out("b"), "--seed", "9"}).code, 0);
  ASSERT_EQ(run({"verify", "--config", cfg, "--out", out("c"), "--seed", "10"}).code, 0);
  const auto a = slurp(dir_ / "a" / "verify.json");
  EXPECT_EQ(a, slurp(dir_ / "b" / "verify.json"));
  EXPECT_NE(a, slurp(dir_ / "c" / "verify.json"));
  EXPECT_EQ(json::parse(a)["seed"], 9);
}

TEST_F(Cli, DumpPathsWritesCsv) {
  json j = json::parse(slurp(kRoot / "configs" / "perpetual.json"));
  j["paths"] = {{"x0", {0.8}}, {"horizon", 1.0}, {"points", 5}};
  const auto r = run({"perpetual", "--config", write_config("p.json", j), "--out", out(), "--dump-paths", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(dir_ / "out" / "paths.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_GE(lines, 3);
}

TEST_F(Cli, BinaryReportsExitCodes) {
  const std::string bin = RIESZSTOP_CLI;
  const auto quiet = " >/dev/null 2>&1";
  auto status = [](int s) { return WIFEXITED(s) ? WEXITSTATUS(s) : -1; };
  EXPECT_EQ(status(std::system((bin + " perpetual --config " + config("perpetual.json") + " --out " + out() + quiet).c_str())), 0);
  EXPECT_EQ(status(std::system((bin + " nosuch" + quiet).c_str())), 2);
}
