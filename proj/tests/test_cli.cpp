#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kOut = fs::temp_directory_path() / "zerolab_test_cli";

int zerolab(const std::string& args) {
  const std::string cmd = std::string(ZEROLAB_CLI) + " " + args + " > " + (kOut / "stdout.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) { return (fs::path(ZEROLAB_CONFIGS) / name).string(); }

std::string out_dir(const std::string& name) {
  const fs::path p = kOut / name;
  fs::remove_all(p);
  return p.string();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string stdout_text() {
  std::ifstream in(kOut / "stdout.txt");
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { fs::create_directories(kOut); }
};

}  // namespace

TEST_F(Cli, AuditPassAndFail) {
  const auto ok = out_dir("audit_ok");
  EXPECT_EQ(zerolab("audit -c " + config("exp_tilt.toml") + " --out " + ok), 0) << stdout_text();
  EXPECT_TRUE(read_json(fs::path(ok) / "audit.json").at("pass").get<bool>());
  const auto bad = out_dir("audit_bad");
  EXPECT_EQ(zerolab("audit -c " + config("bad_family.toml") + " --out " + bad), 1);
  const auto j = read_json(fs::path(bad) / "audit.json");
  EXPECT_FALSE(j.at("pass").get<bool>());
  EXPECT_NE(stdout_text().find("witness"), std::string::npos);
}

TEST_F(Cli, SimulateRefusesFailedAuditUnlessOverridden) {
  const auto d = out_dir("sim_bad");
  EXPECT_EQ(zerolab("simulate -c " + config("bad_family.toml") + " --trials 4 --out " + d), 1);
  EXPECT_EQ(zerolab("simulate -c " + config("bad_family.toml") + " --trials 4 --allow-failed-audit --out " + d), 0);
  EXPECT_TRUE(read_json(fs::path(d) / "empirical.json").at("audit_overridden").get<bool>());
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(zerolab(""), 2);
  EXPECT_EQ(zerolab("frobnicate"), 2);
  EXPECT_EQ(zerolab("simulate --trials 1 --out " + out_dir("usage")), 2);
  EXPECT_EQ(zerolab("simulate --method magic --out " + out_dir("usage")), 2);
  const auto bad = kOut / "bad.toml";
  {
    std::ofstream os(bad);
    os << "[run]\nn = 5\nunknown_key = 1\n";
  }
  EXPECT_EQ(zerolab("audit -c " + bad.string() + " --out " + out_dir("usage")), 2);
  EXPECT_NE(stdout_text().find("unknown_key"), std::string::npos);
  // Two components at n = 30 need 2^30 full-tensor coefficients.
  EXPECT_EQ(zerolab("simulate -c " + config("fubini_study.toml") + " --representation full --n 30 --out " + out_dir("usage")), 2);
}

TEST_F(Cli, TheoryKacOutputs) {
  const auto d = out_dir("theory_kac");
  EXPECT_EQ(zerolab("theory -c " + config("kac.toml") + " --n-list 20 --out " + d), 0) << stdout_text();
  const auto j = read_json(fs::path(d) / "pairings.json");
  EXPECT_NEAR(j.at("curve_length").get<double>(), 2.0 * std::numbers::pi, 1e-4);
  bool saw_annulus = false;
  for (const auto& p : j.at("pairings"))
    if (p.at("rho_id") == "annulus") {
      saw_annulus = true;
      EXPECT_NEAR(p.at("limit_total").get<double>(), 1.0, 1e-3);
      EXPECT_LT(p.at("diff").get<double>(), 1e-3);
    }
  EXPECT_TRUE(saw_annulus);
  std::ifstream curve(fs::path(d) / "curve.csv");
  std::string first;
  std::getline(curve, first);
  EXPECT_EQ(first.rfind("# zerolab ", 0), 0u);
}

TEST_F(Cli, TheoryFubiniStudyHasEmptyCurve) {
  const auto d = out_dir("theory_fs");
  EXPECT_EQ(zerolab("theory -c " + config("fubini_study.toml") + " --nx 65 --ny 65 --out " + d), 0) << stdout_text();
  std::ifstream curve(fs::path(d) / "curve.csv");
  std::string line;
  int lines = 0;
  while (std::getline(curve, line)) ++lines;
  EXPECT_EQ(lines, 2);  // preamble and header only
  std::ifstream density(fs::path(d) / "density.csv");
  std::getline(density, line);
  std::getline(density, line);
  int rows = 0;
  while (std::getline(density, line)) {
    double x, y, v;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &v), 3);
    const double r2 = x * x + y * y;
    EXPECT_NEAR(v, 1.0 / (std::numbers::pi * (1 + r2) * (1 + r2)), 1e-14);
    ++rows;
  }
  EXPECT_EQ(rows, 65 * 65);
}

TEST_F(Cli, SimulateWritesZerosAndIsDeterministic) {
  const auto a = out_dir("sim_a"), b = out_dir("sim_b");
  const std::string args = "simulate -c " + config("kac.toml") + " --n-list 30 --trials 40 --out ";
  EXPECT_EQ(zerolab(args + a + " --threads 1"), 0) << stdout_text();
  EXPECT_EQ(zerolab(args + b + " --threads 3"), 0);
  std::ifstream ja(fs::path(a) / "empirical.json"), jb(fs::path(b) / "empirical.json");
  const std::string sa{std::istreambuf_iterator<char>(ja), {}}, sb{std::istreambuf_iterator<char>(jb), {}};
  EXPECT_EQ(sa, sb);
  EXPECT_TRUE(fs::exists(fs::path(a) / "zeros_n30.csv"));
}

TEST_F(Cli, ComparePassesAndChecksDigests) {
  const auto d = out_dir("compare");
  const std::string base = "-c " + config("kac.toml") + " --n-list 10,20 --trials 150 --nx 129 --ny 129 --out " + d;
  ASSERT_EQ(zerolab("theory " + base), 0) << stdout_text();
  const auto pairings = (fs::path(d) / "pairings.json").string();
  EXPECT_EQ(zerolab("compare " + base + " --inputs " + pairings), 0) << stdout_text();
  const auto v = read_json(fs::path(d) / "verdict.json");
  EXPECT_EQ(v.at("verdict"), "PASS");
  EXPECT_EQ(v.at("rows").size(), 6u);
  // Mixing outputs from a different configuration is refused.
  EXPECT_EQ(zerolab("compare " + base + " --seed 99 --inputs " + pairings), 2);
  EXPECT_NE(stdout_text().find("refusing"), std::string::npos);
}

TEST_F(Cli, OneFormNormalizationFailsOnMass) {
  const auto d = out_dir("one_form");
  EXPECT_EQ(zerolab("compare -c " + config("kac.toml") +
                    " --n-list 10,20 --trials 20 --nx 129 --ny 129 --curve-normalization one_form --out " + d),
            1);
  const auto v = read_json(fs::path(d) / "verdict.json");
  EXPECT_EQ(v.at("verdict"), "FAIL");
  bool mass = false;
  for (const auto& f : v.at("failures")) mass |= f.get<std::string>().rfind("mass:", 0) == 0;
  EXPECT_TRUE(mass);
}

TEST_F(Cli, SelfTestPasses) {
  EXPECT_EQ(zerolab("selftest"), 0) << stdout_text();
  EXPECT_EQ(stdout_text().find("FAIL"), std::string::npos);
}

TEST_F(Cli, Version) {
  EXPECT_EQ(zerolab("--version"), 0);
  EXPECT_NE(stdout_text().find("0."), std::string::npos);
}
