#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zerolab/config.hpp"
#include "zerolab/io.hpp"
#include "zerolab/mc.hpp"
#include "zerolab/selftest.hpp"
#include "zerolab/theory.hpp"

namespace fs = std::filesystem;
using namespace zerolab;
using io::json;

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kNumerical = 3 };

struct Overrides {
  std::string config;
  std::optional<int> n, trials, nx, ny;
  std::vector<int> n_list;
  std::optional<long long> seed, jmax;
  std::optional<std::string> method, representation, out, curve_normalization;
  std::optional<unsigned> threads;
  bool allow_failed_audit = false;
  std::vector<std::string> inputs;
};

void add_config_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "TOML run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--n", o.n, "run.n");
  cmd->add_option("--n-list", o.n_list, "run.n_list")->delimiter(',');
  cmd->add_option("--trials", o.trials, "run.trials");
  cmd->add_option("--seed", o.seed, "run.seed");
  cmd->add_option("--method", o.method, "run.method: auto | aberth | subdivide");
  cmd->add_option("--representation", o.representation, "run.representation: symmetric | full");
  cmd->add_option("--jmax", o.jmax, "run.jmax (audit range)");
  cmd->add_option("--out", o.out, "run.out (output directory)");
  cmd->add_option("--threads", o.threads, "run.threads (0 = all cores)");
  cmd->add_option("--nx", o.nx, "window.nx");
  cmd->add_option("--ny", o.ny, "window.ny");
  cmd->add_option("--curve-normalization", o.curve_normalization,
                  "run.curve_normalization: potential | one_form (debug negative control)");
  cmd->add_flag("--allow-failed-audit", o.allow_failed_audit, "run.allow_failed_audit");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.n) c.n = *o.n;
  if (!o.n_list.empty()) c.n_list = o.n_list;
  if (o.trials) c.trials = *o.trials;
  if (o.seed) c.seed = static_cast<std::uint64_t>(*o.seed);
  if (o.method) c.method = *o.method;
  if (o.representation) c.representation = *o.representation;
  if (o.jmax) c.jmax = *o.jmax;
  if (o.out) c.out = *o.out;
  if (o.threads) c.threads = *o.threads;
  if (o.nx) c.nx = *o.nx;
  if (o.ny) c.ny = *o.ny;
  if (o.curve_normalization) c.curve_normalization = *o.curve_normalization;
  if (o.allow_failed_audit) c.allow_failed_audit = true;
  c.validate();
  thread_cap().store(c.threads);
  fs::create_directories(c.out);
  return c;
}

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  return os;
}

int cmd_audit(const RunConfig& c) {
  const std::string digest = c.digest();
  const auto rep = audit_hypotheses(c.make_map(), c.make_family(), c.make_window(), c.audit_jmax());
  json j = io::to_json(rep);
  j["spec_digest"] = digest;
  j["version"] = kVersion;
  io::write_json(path_in(c, "audit.json"), j);
  for (const auto& h : rep.results) {
    std::printf("%-14s %s", h.hypothesis.c_str(), h.pass ? "pass" : "FAIL");
    if (!h.pass)
      std::printf("  witness z=(%g,%g) j=%lld lhs=%g rhs=%g", h.witness.z.real(), h.witness.z.imag(), h.witness.j,
                  h.witness.lhs, h.witness.rhs);
    std::printf("\n");
  }
  std::printf("c_min = %.6g at (%g,%g), audited 0 <= j <= %lld on a %dx%d grid\n", rep.c_min, rep.c_min_at.real(),
              rep.c_min_at.imag(), rep.jmax, rep.window.nx, rep.window.ny);
  return rep.pass() ? kPass : kFail;
}

int cmd_theory(const RunConfig& c) {
  const std::string digest = c.digest();
  const HoloMap map = c.make_map();
  const Window w = c.make_window();
  {
    auto os = open_out(path_in(c, "density.csv"));
    io::write_density_csv(os, digest, map, w);
  }
  const CurveC curve = extract_curve(map, w);
  {
    auto os = open_out(path_in(c, "curve.csv"));
    io::write_curve_csv(os, digest, curve);
  }
  json pairings = json::array();
  for (const auto& rho : c.make_rhos()) {
    const auto lim = limit_pairing(map, rho, w, c.make_normalization());
    for (int n : c.degrees()) {
      const double e = n >= 1 ? expectation_pairing(c.make_spec(n), rho, w).value : 0.0;
      pairings.push_back(io::pairing_json(rho.id(), n, e, lim));
      std::printf("%-12s n=%-5d expectation=%.8f limit=%.8f (ac %.6f + curve %.6f) potential=%.8f\n",
                  rho.id().c_str(), n, e, lim.total, lim.ac, lim.curve, lim.potential);
    }
  }
  io::write_json(path_in(c, "pairings.json"),
                 {{"spec_digest", digest}, {"version", kVersion}, {"curve_length", curve.length()},
                  {"curve_excluded_length", curve.excluded_length()}, {"pairings", pairings}});
  return kPass;
}

int cmd_simulate(const RunConfig& c) {
  const std::string digest = c.digest();
  json runs = json::array();
  for (int n : c.degrees()) {
    const auto em = run(c.make_experiment(n));
    runs.push_back(io::to_json(em, digest));
    if (em.retained) {
      auto os = open_out(path_in(c, "zeros_n" + std::to_string(n) + ".csv"));
      io::write_zeros_csv(os, digest, em);
    }
    for (const auto& s : em.stats)
      std::printf("n=%-5d %-12s mean=%.6f se=%.6f trials=%lld\n", n, s.id.c_str(), s.mean, s.se, s.n_trials);
    if (em.trials_failed > 0) std::printf("n=%d: %lld trials failed and were excluded\n", n, em.trials_failed);
  }
  io::write_json(path_in(c, "empirical.json"), runs.size() == 1 ? runs[0] : json{{"spec_digest", digest}, {"runs", runs}});
  return kPass;
}

int cmd_compare(const RunConfig& c, const std::vector<std::string>& inputs) {
  const std::string digest = c.digest();
  for (const auto& in : inputs) {
    const std::string d = io::read_digest(in);
    if (d != digest) throw ConfigError("refusing to mix outputs: " + in + " has digest " + d + ", config has " + digest);
  }
  SweepOptions opt;
  opt.normalization = c.make_normalization();
  const auto rows = convergence_sweep(c.make_experiment(c.degrees().front()), c.degrees(), opt);
  {
    auto os = open_out(path_in(c, "compare.csv"));
    io::write_sweep_csv(os, digest, rows);
  }
  const Verdict v = judge(rows);
  json rj = json::array();
  for (const auto& r : rows) rj.push_back(io::to_json(r));
  io::write_json(path_in(c, "verdict.json"), {{"spec_digest", digest},
                                              {"version", kVersion},
                                              {"verdict", v.pass ? "PASS" : "FAIL"},
                                              {"failures", v.failures},
                                              {"rows", rj}});
  std::printf("%6s %-10s %12s %12s %10s %12s %10s %10s\n", "n", "rho", "expectation", "mc_mean", "mc_se", "limit", "gap",
              "bound");
  for (const auto& r : rows)
    std::printf("%6d %-10s %12.6f %12.6f %10.2e %12.6f %10.2e %10.2e\n", r.n, r.rho_id.c_str(), r.expectation,
                r.mc_mean, r.mc_se, r.limit, r.gap, r.rate_bound);
  for (const auto& f : v.failures) std::printf("FAIL %s\n", f.c_str());
  std::printf("verdict: %s\n", v.pass ? "PASS" : "FAIL");
  return v.pass ? kPass : kFail;
}

int cmd_selftest() {
  bool all = true;
  for (const auto& r : run_selftest()) {
    std::printf("%-28s %s  %s  (%.1fs)\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str(), r.seconds);
    all &= r.pass;
  }
  return all ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zerolab: zeros of random entire functions, simulated and compared with theory"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Overrides o;
  auto* audit = app.add_subcommand("audit", "check the family hypotheses on the window grid");
  auto* theory = app.add_subcommand("theory", "density and curve CSVs, expectation and limit pairings");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo zero statistics");
  auto* compare = app.add_subcommand("compare", "convergence sweep with a PASS/FAIL verdict");
  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant suite");
  for (auto* cmd : {audit, theory, simulate, compare}) add_config_flags(cmd, o);
  compare->add_option("--inputs", o.inputs, "earlier outputs whose digests must match this config");
  selftest->add_option("--threads", o.threads, "worker cap (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (selftest->parsed()) {
      thread_cap().store(o.threads.value_or(0));
      return cmd_selftest();
    }
    const RunConfig c = resolve(o);
    if (audit->parsed()) return cmd_audit(c);
    if (theory->parsed()) return cmd_theory(c);
    if (simulate->parsed()) return cmd_simulate(c);
    if (compare->parsed()) return cmd_compare(c, o.inputs);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.kind()) {
      case Error::Kind::Usage: return kUsage;
      case Error::Kind::Hypothesis: return kFail;
      case Error::Kind::Numerical: return kNumerical;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}
