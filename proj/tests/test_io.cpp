#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "zerolab/config.hpp"
#include "zerolab/io.hpp"

using namespace zerolab;
namespace fs = std::filesystem;

namespace {

const char* kKac = R"(
[map]
components = ["z"]

[family]
kind = "unit"

[window]
x0 = -2.0
x1 = 2.0
y0 = -2.0
y1 = 2.0
nx = 129
ny = 129

[run]
n = 30
trials = 50
seed = 7

[[rho]]
id = "annulus"
kind = "annulus"
radii = [0.25, 0.5, 1.5, 1.75]
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "zerolab_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Config, ParsesKeys) {
  const auto c = parse_config(kKac);
  EXPECT_EQ(c.map, std::vector<std::string>{"z"});
  EXPECT_EQ(c.nx, 129);
  EXPECT_EQ(c.n, 30);
  EXPECT_EQ(c.trials, 50);
  EXPECT_EQ(c.seed, 7u);
  ASSERT_EQ(c.rho.size(), 1u);
  EXPECT_EQ(c.rho[0].radii, (std::vector<double>{0.25, 0.5, 1.5, 1.75}));
  EXPECT_NO_THROW(c.validate());
  const auto ex = c.make_experiment(c.n);
  EXPECT_EQ(ex.spec.n, 30);
  EXPECT_EQ(ex.rho_set.size(), 1u);
  EXPECT_EQ(ex.rho_set[0].id(), "annulus");
}

TEST(Config, DefaultsAndIntegerCertificates) {
  const auto c = parse_config(R"(
[family]
kind = "scalar"
expr = "j+1"
kappa = "log2"
lambda = 0
B = "1"
A = "2"
)");
  EXPECT_EQ(c.lambda, "0");
  EXPECT_EQ(c.n, 20);
  EXPECT_EQ(c.nx, 257);
  EXPECT_EQ(c.make_rhos().size(), 3u);
  EXPECT_EQ(c.make_family().kappa.at(7), 3);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("[run]\nn = 5\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[mapp]\ncomponents = [\"z\"]\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nn = \"five\"\n"), ConfigError);
  EXPECT_THROW(parse_config("[run\nn = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("[map]\ncomponents = [\"z +\"]\n").validate(), ParseError);
  EXPECT_THROW(parse_config("[run]\ntrials = 1\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("[run]\nn_list = [50, 25]\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("[run]\nmethod = \"magic\"\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("[window]\nx0 = 1.0\nx1 = 0.0\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("[[rho]]\nkind = \"disk\"\nradii = [1.0, 3.0]\n").validate(), ConfigError);
  EXPECT_THROW(parse_config("[map]\ncomponents = [\"z\", \"1\"]\n[run]\nrepresentation = \"full\"\nn = 30\n").validate(),
               OverflowGuard);
}

TEST(Config, DigestIsCanonical) {
  const auto a = parse_config(kKac);
  // Same content, different layout and key order; output path and thread cap do not count.
  const auto b = parse_config(R"(
[run]
seed = 7
trials = 50
n = 30
out = "elsewhere"
threads = 3
[window]
ny = 129
nx = 129
[[rho]]
radii = [0.25, 0.5, 1.5, 1.75]
kind = "annulus"
id = "annulus"
)");
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
  auto c = a;
  c.seed = 8;
  EXPECT_NE(a.digest(), c.digest());
  // Known SHA-256 vector.
  EXPECT_EQ(RunConfig::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Json, DrawRoundTrip) {
  EnsembleSpec s;
  s.map = HoloMap::from_strings({"z", "1"});
  s.n = 4;
  s.seed = 3;
  for (auto rep : {Representation::FullTensor, Representation::SymmetricMultinomial}) {
    s.representation = rep;
    const Ensemble ens(s);
    const auto d = ens.sample(6);
    const auto back = io::draw_from_json(io::json::parse(io::to_json(d).dump()));
    EXPECT_EQ(back.coeffs, d.coeffs);
    EXPECT_EQ(back.representation, d.representation);
    EXPECT_EQ(back.trial, 6u);
    const cplx z(0.3, -0.7);
    EXPECT_EQ(ens.function(back)(z).value, ens.function(d)(z).value);
  }
  auto j = io::to_json(Ensemble(s).sample(0));
  j["layout"]["size"] = 3;
  EXPECT_THROW(io::draw_from_json(j), ConfigError);
}

TEST(Json, SortedKeysAndEmpiricalFields) {
  const auto c = parse_config(kKac);
  auto ex = c.make_experiment(10);
  ex.trials = 4;
  const auto em = run(ex);
  const auto j = io::to_json(em, c.digest());
  EXPECT_EQ(j.at("spec_digest"), c.digest());
  EXPECT_EQ(j.at("trials_ok"), 4);
  EXPECT_EQ(j.at("trials_failed"), 0);
  EXPECT_TRUE(j.at("per_rho").contains("annulus"));
  const std::string text = j.dump();
  EXPECT_LT(text.find("\"audit_overridden\""), text.find("\"failures\""));
  EXPECT_LT(text.find("\"per_rho\""), text.find("\"spec_digest\""));
}

TEST(Csv, PreambleAndDigestReadBack) {
  const auto c = parse_config(kKac);
  const std::string digest = c.digest();
  const auto path = scratch("curve.csv").string();
  {
    std::ofstream os(path);
    io::write_curve_csv(os, digest, extract_curve(c.make_map(), c.make_window()));
  }
  std::ifstream in(path);
  std::string first, header, row;
  std::getline(in, first);
  std::getline(in, header);
  EXPECT_EQ(first, std::string("# zerolab ") + kVersion + " digest=" + digest);
  EXPECT_EQ(header, "chain_id,x,y,weight_per_unit_length");
  // For f = z the weight per unit length is 1/(2 pi) everywhere on the circle.
  int rows = 0;
  while (std::getline(in, row)) {
    std::istringstream ss(row);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    ASSERT_EQ(v.size(), 4u);
    EXPECT_NEAR(std::hypot(v[1], v[2]), 1.0, 1e-10);
    EXPECT_NEAR(v[3], 1.0 / (2.0 * std::numbers::pi), 1e-9);
    ++rows;
  }
  EXPECT_GT(rows, 100);
  EXPECT_EQ(io::read_digest(path), digest);
}

TEST(Csv, DensityRowsMatchClosedForm) {
  const auto map = HoloMap::from_strings({"z", "1"});
  std::ostringstream os;
  io::write_density_csv(os, "d", map, Window({-1, 1, -1, 1}, 5, 5));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,d");
  int rows = 0;
  while (std::getline(in, line)) {
    double x, y, d;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &d), 3);
    const double r2 = x * x + y * y;
    EXPECT_NEAR(d, 1.0 / (std::numbers::pi * (1 + r2) * (1 + r2)), 1e-15);
    ++rows;
  }
  EXPECT_EQ(rows, 25);
}

TEST(Digest, JsonAndErrors) {
  const auto path = scratch("x.json").string();
  io::write_json(path, {{"spec_digest", "abc123"}, {"n", 3}});
  EXPECT_EQ(io::read_digest(path), "abc123");
  io::write_json(path, {{"n", 3}});
  EXPECT_THROW(io::read_digest(path), ConfigError);
  {
    std::ofstream os(path);
    os << "garbage\n";
  }
  EXPECT_THROW(io::read_digest(path), ConfigError);
  EXPECT_THROW(io::read_digest(scratch("missing.csv").string()), ConfigError);
}
