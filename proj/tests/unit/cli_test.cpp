#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string output;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(MFLANG_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, got);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mflang_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

constexpr const char* kSmall = R"({
  "experiment": "contraction",
  "energy": {
    "family": "two-body",
    "confinement": {"name": "quadratic", "params": [2.0, 0.0, 0.0]},
    "interaction": {"name": "cosine", "params": [0.1, 1.0]},
    "constants": {"lambda": 3.9, "d2m_bound": 0.1, "dm_lip": 4.1, "grad_at_zero": 0.1}
  },
  "n": 64, "dt": 1e-3, "T": 0.2, "record_every": 0.02, "replicas": 4, "seed": 1,
  "init_a": {"position": {"mean": [-1.0], "sd": 1.0}},
  "init_b": {"position": {"mean": [2.0], "sd": 0.5}},
  "w2_every": 2
})";

void expect_same_csvs(const fs::path& a, const fs::path& b) {
  int count = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    ++count;
    ASSERT_TRUE(fs::exists(b / e.path().filename())) << e.path();
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
  EXPECT_GT(count, 0);
}

}  // namespace

TEST(Cli, KineticConstantsUnit) {
  const auto dir = scratch("kc");
  const auto r = run("kinetic-constants --config " + std::string(MFLANG_CONFIG_DIR) + "/kinetic_constants_unit.json --out " +
                     dir.string());
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("0.267949"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  fs::remove_all(dir);
}

TEST(Cli, UnknownSubcommandPrintsUsage) {
  const auto r = run("bogus");
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("kinetic-constants"), std::string::npos) << r.output;
}

TEST(Cli, MissingConfigIsError) {
  EXPECT_EQ(run("contraction").status, 1);
  EXPECT_EQ(run("contraction --config /nonexistent/x.json").status, 1);
}

TEST(Cli, MismatchedKindIsError) {
  const auto r = run("poc --config " + std::string(MFLANG_CONFIG_DIR) + "/kinetic_constants_unit.json --out " +
                     scratch("mismatch").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("does not match"), std::string::npos) << r.output;
}

TEST(Cli, FailingCheckExitsTwo) {
  const auto dir = scratch("fail");
  const auto cfg = write_config(dir, "kc.json", R"({"experiment":"kinetic-constants","kinetic":{"eta":0.5}})");
  const auto r = run("kinetic-constants --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.status, 2) << r.output;
  EXPECT_NE(r.output.find("FAIL feasible"), std::string::npos) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, SeedDeterminism) {
  const auto dir = scratch("seed");
  const auto cfg = write_config(dir, "c.json", kSmall);
  const auto a = run("contraction --config " + cfg.string() + " --seed 7 --out " + (dir / "a").string());
  const auto b = run("contraction --config " + cfg.string() + " --seed 7 --out " + (dir / "b").string());
  ASSERT_NE(a.status, 1) << a.output;
  ASSERT_NE(b.status, 1) << b.output;
  expect_same_csvs(dir / "a", dir / "b");
  const auto c = run("contraction --config " + cfg.string() + " --seed 8 --out " + (dir / "c").string());
  ASSERT_NE(c.status, 1) << c.output;
  EXPECT_NE(slurp(dir / "a" / "trace_coupled.csv"), slurp(dir / "c" / "trace_coupled.csv"));
  fs::remove_all(dir);
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  const auto dir = scratch("threads");
  const auto cfg = write_config(dir, "c.json", kSmall);
  const auto a = run("contraction --config " + cfg.string() + " --threads 1 --out " + (dir / "a").string());
  const auto b = run("contraction --config " + cfg.string() + " --threads 2 --out " + (dir / "b").string());
  ASSERT_NE(a.status, 1) << a.output;
  ASSERT_NE(b.status, 1) << b.output;
  expect_same_csvs(dir / "a", dir / "b");
  fs::remove_all(dir);
}

TEST(Cli, OutDirFromEnvironment) {
  const auto dir = scratch("env");
  const auto cfg = write_config(dir, "kc.json", R"({"experiment":"kinetic-constants","kinetic":{"eta":0.1},"out_dir":")" +
                                                    (dir / "from_config").string() + "\"}");
  const auto r = run("kinetic-constants --config " + cfg.string(), "MFLANG_OUT_DIR=" + (dir / "from_env").string());
  EXPECT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "from_env" / "summary.json"));
  EXPECT_FALSE(fs::exists(dir / "from_config"));
  const auto r2 = run("kinetic-constants --config " + cfg.string(), "MFLANG_OUT_DIR=");
  EXPECT_EQ(r2.status, 0) << r2.output;
  EXPECT_TRUE(fs::exists(dir / "from_config" / "summary.json"));
  fs::remove_all(dir);
}
