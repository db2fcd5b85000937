#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "aspire/config.hpp"
#include "aspire/core/csv.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace aspire;

namespace {

struct Result {
  int code = 0;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(ASPIRE_CLI_PATH) + " " + args + " > " + (scratch / "stdout.txt").string() +
                          " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "run.ini";
  std::ofstream(p) << text;
  return p;
}

const char* kSmallRun = R"(
[general]
seed = 7
[generator]
n_admissions = 6000
[model.forest]
n_estimators = 20
[causal]
n_boot = 10
treatments = opioid, site:neck
)";

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  const auto c = parse_config("# comment\n[general]\nseed = 9 ; trailing\n[model.forest]\nn_estimators = 12\n"
                              "[causal]\ntreatments = insulin, site:head\n");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.forest.n_estimators, 12u);
  EXPECT_EQ(c.treatments, (std::vector<std::string>{"insulin", "site:head"}));
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config("[model]\nfamliy = forest\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "model.famliy");
  }
}

TEST(Config, GeneratorErrorsCarryTheSection) {
  try {
    parse_config("[generator]\nsurgery_rate = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "generator.surgery_rate");
  }
}

TEST(Config, EchoRoundTripsAndHashIgnoresThreads) {
  auto c = parse_config(kSmallRun);
  const auto echoed = parse_config(canonical_echo(c));
  EXPECT_EQ(canonical_echo(echoed), canonical_echo(c));
  EXPECT_EQ(config_hash(echoed), config_hash(c));
  auto t = c;
  t.threads = 8;
  EXPECT_EQ(config_hash(t), config_hash(c));
  t.seed = 8;
  EXPECT_NE(config_hash(t), config_hash(c));
}

TEST(Cli, EmptyCohortWritesHeadersOnly) {
  testing_helpers::TempDir dir("cli_empty");
  const auto cfg = write_config(dir.path(), "[generator]\nn_admissions = 0\n");
  const auto out = dir.path() / "data";
  const auto r = run("--config " + cfg.string() + " --out " + out.string() + " generate", dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"admissions.csv", "history.csv", "surgeries.csv", "medications.csv", "reports.csv"}) {
    const auto t = csv::read(out / f);
    EXPECT_FALSE(t.header.empty()) << f;
    EXPECT_TRUE(t.rows.empty()) << f;
  }
  EXPECT_TRUE(fs::exists(out / "manifest_generate.json"));
}

TEST(Cli, InvalidKeyExitsTwoNamingTheKey) {
  testing_helpers::TempDir dir("cli_key");
  const auto cfg = write_config(dir.path(), "[causal]\nn_bootstrap = 5\n");
  const auto r = run("--config " + cfg.string() + " --out " + dir.path().string() + " generate", dir.path());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("causal.n_bootstrap"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
  testing_helpers::TempDir dir("cli_usage");
  EXPECT_EQ(run("", dir.path()).code, 2);
  EXPECT_EQ(run("pipeline", dir.path()).code, 2);  // --in is required
  EXPECT_EQ(run("frobnicate", dir.path()).code, 2);
}

TEST(Cli, MissingInputFileExitsOneNamingIt) {
  testing_helpers::TempDir dir("cli_missing");
  const auto cfg = write_config(dir.path(), "[generator]\nn_admissions = 50\n");
  const auto data = dir.path() / "data";
  ASSERT_EQ(run("--config " + cfg.string() + " --out " + data.string() + " generate", dir.path()).code, 0);
  fs::remove(data / "medications.csv");
  const auto out = dir.path() / "out";
  const auto r = run("--config " + cfg.string() + " --out " + out.string() + " pipeline --in " + data.string(),
                     dir.path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("medications.csv"), std::string::npos) << r.err;
  EXPECT_NE(slurp(out / "audit.log").find("medications.csv"), std::string::npos);
}

TEST(Cli, BogusTreatmentListsAllFifteen) {
  testing_helpers::TempDir dir("cli_treat");
  const auto r = run("--out " + dir.path().string() + " ate --in " + dir.path().string() + " --treatment aspirin",
                     dir.path());
  EXPECT_EQ(r.code, 2);
  for (const auto& n : treatment_names()) EXPECT_NE(r.err.find(n), std::string::npos) << n;
}

TEST(Cli, RunIsReproducibleAcrossInvocationsAndThreads) {
  testing_helpers::TempDir dir("cli_run");
  const auto cfg = write_config(dir.path(), kSmallRun);
  const auto data = dir.path() / "data";
  ASSERT_EQ(run("--config " + cfg.string() + " --out " + data.string() + " generate", dir.path()).code, 0);
  const auto a = dir.path() / "a", b = dir.path() / "b";
  auto r = run("--config " + cfg.string() + " --threads 1 --out " + a.string() + " run --in " + data.string(),
               dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("--config " + cfg.string() + " --threads 3 --out " + b.string() + " run --in " + data.string(), dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"features.csv", "cohort.csv", "metrics.json", "predictions.csv", "ate_table.json",
                        "ate_table.csv", "cate_table.json", "fn_profile.json", "importance.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto ate = csv::read(a / "ate_table.csv");
  EXPECT_EQ(ate.rows.size(), 2u);
}

TEST(Cli, StagesMatchTheCombinedRun) {
  testing_helpers::TempDir dir("cli_stages");
  const auto cfg = write_config(dir.path(), kSmallRun);
  const std::string c = "--config " + cfg.string();
  const auto data = dir.path() / "data";
  ASSERT_EQ(run(c + " --out " + data.string() + " generate", dir.path()).code, 0);
  const auto all = dir.path() / "all", staged = dir.path() / "staged";
  ASSERT_EQ(run(c + " --out " + all.string() + " run --in " + data.string(), dir.path()).code, 0);
  ASSERT_EQ(run(c + " --out " + staged.string() + " pipeline --in " + data.string(), dir.path()).code, 0);
  for (const char* stage : {"train", "evaluate", "fn-analysis"}) {
    const auto r = run(c + " " + stage + " --in " + staged.string(), dir.path());
    ASSERT_EQ(r.code, 0) << stage << ": " << r.err;
  }
  ASSERT_EQ(run(c + " ate --in " + staged.string(), dir.path()).code, 0);
  for (const char* f : {"features.csv", "model.json", "metrics.json", "fn_profile.json", "ate_table.csv"}) {
    EXPECT_EQ(slurp(all / f), slurp(staged / f)) << f;
  }
}
