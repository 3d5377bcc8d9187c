#include "cli.hpp"

#include "support.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using msl::testing::TempDir;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "msl_cli");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = msl::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

const std::vector<std::string> kTiny{"--n1", "8", "--n2", "6", "--r", "2", "--m", "200", "--k", "3",
                                     "--max-iters", "50"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST(Cli, RunWritesTheDiagnosticsCsv) {
  TempDir dir("cli_run");
  const Outcome o = invoke(with_tiny({"run", "--out", dir.str()}));
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(std::filesystem::exists(dir.file("run_seed1.csv")));
  EXPECT_TRUE(std::filesystem::exists(dir.file("summary.json")));
  EXPECT_NE(o.out.find("run_seed1.csv"), std::string::npos);
}

TEST(Cli, FlagsOverrideTheConfigFile) {
  TempDir dir("cli_cfg");
  std::ofstream(dir.file("c.json")) << R"({"experiment": "run", "n1": 8, "n2": 6, "r": 2, "m": 200,
    "k": 3, "max_iters": 20, "seeds": [4]})";
  const Outcome o = invoke({"run", "--config", dir.file("c.json"), "--max-iters", "30", "--out", dir.str()});
  ASSERT_EQ(o.code, 0) << o.err;
  std::ifstream in(dir.file("summary_run.json"));
  const nlohmann::json s = nlohmann::json::parse(in);
  EXPECT_EQ(s["config"]["max_iters"], 30);
  EXPECT_EQ(s["config"]["n1"], 8);
  EXPECT_EQ(s["seed"], 4);
  EXPECT_TRUE(std::filesystem::exists(dir.file("run_seed4.csv")));
}

TEST(Cli, ConfigForAnotherExperimentIsRejected) {
  TempDir dir("cli_other");
  std::ofstream(dir.file("c.json")) << R"({"experiment": "coupling"})";
  const Outcome o = invoke({"run", "--config", dir.file("c.json")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("experiment"), std::string::npos);
}

TEST(Cli, MalformedConfigNamesTheField) {
  TempDir dir("cli_bad");
  std::ofstream(dir.file("bad.json")) << R"({"n1": "many"})";
  Outcome o = invoke({"run", "--config", dir.file("bad.json")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("n1"), std::string::npos) << o.err;
  std::ofstream(dir.file("broken.json")) << "{ not json";
  o = invoke({"run", "--config", dir.file("broken.json")});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("config"), std::string::npos);
  o = invoke(with_tiny({"run", "--k", "1", "--out", dir.str()}));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("k:"), std::string::npos) << o.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"run", "--n1", "abc"}).code, 2);
  EXPECT_EQ(invoke({"run", "--no-such-flag"}).code, 2);
  const Outcome help = invoke({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("imbalance-stepsize"), std::string::npos);
  EXPECT_EQ(invoke({"run", "--help"}).code, 0);
}

TEST(Cli, DivergenceExitsWithOne) {
  TempDir dir("cli_div");
  const Outcome o = invoke(with_tiny({"run", "--mu-rel", "100", "--alpha", "1", "--out", dir.str()}));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("diverged"), std::string::npos) << o.err;
}

TEST(Cli, UnwritableOutputExitsWithOne) {
  const Outcome o = invoke(with_tiny({"run", "--out", "/proc/msl_cli_cannot_write"}));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("I/O error"), std::string::npos) << o.err;
}

TEST(Cli, JobsFromTheEnvironment) {
  TempDir dir("cli_env");
  ::setenv("MSL_JOBS", "zero", 1);
  Outcome o = invoke(with_tiny({"run", "--out", dir.str()}));
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("MSL_JOBS"), std::string::npos);
  ::setenv("MSL_JOBS", "2", 1);
  o = invoke(with_tiny({"run", "--seeds", "1", "2", "--out", dir.str()}));
  EXPECT_EQ(o.code, 0) << o.err;
  std::ifstream in(dir.file("summary.json"));
  EXPECT_EQ(nlohmann::json::parse(in)["config"]["jobs"], 2);
  ::unsetenv("MSL_JOBS");
}

TEST(Cli, LemmaConstantFlag) {
  TempDir dir("cli_lemma");
  Outcome o = invoke(with_tiny({"lemma-audit", "--lemma-const", "c=0.5", "--rip-trials", "5", "--out", dir.str()}));
  ASSERT_EQ(o.code, 0) << o.err;
  std::ifstream in(dir.file("lemma_audit.json"));
  EXPECT_EQ(nlohmann::json::parse(in)["constants"]["c"], 0.5);
  o = invoke(with_tiny({"lemma-audit", "--lemma-const", "c"}));
  EXPECT_EQ(o.code, 2);
  o = invoke(with_tiny({"lemma-audit", "--lemma-const", "q=1"}));
  EXPECT_EQ(o.code, 2);
}
