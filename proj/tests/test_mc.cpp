#include <gtest/gtest.h>

#include "zerolab/mc.hpp"

using namespace zerolab;

namespace {

Experiment kac_experiment(int n, int trials, std::uint64_t seed = 20240917) {
  Experiment ex;
  ex.spec.map = HoloMap::from_strings({"z"});
  ex.spec.n = n;
  ex.spec.seed = seed;
  ex.trials = trials;
  ex.rho_set = builtin_test_functions();
  return ex;
}

struct ThreadCap {
  unsigned saved = thread_cap().load();
  explicit ThreadCap(unsigned c) { thread_cap().store(c); }
  ~ThreadCap() { thread_cap().store(saved); }
};

}  // namespace

TEST(Welford, MatchesTwoPassAndMerges) {
  const std::vector<double> x = {1.5, -2.0, 3.25, 0.0, 7.5, -1.25, 2.0};
  Welford all, a, b;
  for (std::size_t i = 0; i < x.size(); ++i) {
    all.add(x[i]);
    (i < 3 ? a : b).add(x[i]);
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(all.mean, mean, 1e-15);
  EXPECT_NEAR(all.variance(), ss / static_cast<double>(x.size() - 1), 1e-13);
  EXPECT_NEAR(all.se(), std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size())), 1e-14);
  a.merge(b);
  EXPECT_NEAR(a.mean, all.mean, 1e-15);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-13);
}

TEST(Run, DegreeZeroHasNoZeros) {
  const auto em = run(kac_experiment(0, 5));
  for (const auto& s : em.stats) {
    EXPECT_EQ(s.mean, 0.0);
    EXPECT_EQ(s.n_trials, 5);
  }
}

TEST(Run, Preconditions) {
  EXPECT_THROW(run(kac_experiment(5, 1)), ConfigError);
  auto ex = kac_experiment(5, 4);
  ex.rho_set.clear();
  EXPECT_THROW(run(ex), ConfigError);
  ex = kac_experiment(5, 4);
  ex.rho_set = {TestFunction::radial_bump(0.0, 2.0, 2.5)};
  EXPECT_THROW(run(ex), SupportEscape);
}

TEST(Run, KacIdentityWithinThreeSE) {
  const auto ex = kac_experiment(20, 2000);
  const auto em = run(ex);
  EXPECT_EQ(em.method_used, Method::Aberth);
  EXPECT_EQ(em.trials_ok, 2000);
  for (const auto& rho : ex.rho_set) {
    const auto& s = em.stat(rho.id());
    const double e = expectation_pairing(ex.spec, rho, ex.window).value;
    EXPECT_LE(std::abs(s.mean - e), 3 * s.se) << rho.id() << " mean " << s.mean << " expectation " << e;
    EXPECT_NEAR(s.se, s.stdev / std::sqrt(2000.0), 1e-15);
  }
}

TEST(Run, StandardErrorScaling) {
  const auto small = run(kac_experiment(20, 500, 77));
  const auto doubled = run(kac_experiment(20, 1000, 77));
  const auto quadrupled = run(kac_experiment(20, 2000, 77));
  for (std::size_t r = 0; r < small.stats.size(); ++r) {
    const double q2 = small.stats[r].se / doubled.stats[r].se;
    const double q4 = small.stats[r].se / quadrupled.stats[r].se;
    EXPECT_NEAR(q2, std::sqrt(2.0), 0.2 * std::sqrt(2.0)) << small.stats[r].id;
    EXPECT_NEAR(q4, 2.0, 0.4) << small.stats[r].id;
  }
}

TEST(Run, DeterministicAcrossThreadCaps) {
  auto ex = kac_experiment(30, 64, 5);
  ex.spec.fam = PerturbationFamily::family("exp(((-1)^j/(j+1))*z)")
                    .with_certificates("1", "0", "1", "0")
                    .with_envelopes("exp(3)", "exp(3)");
  ex.window = Window({-1.8, 1.8, -1.8, 1.8}, 129, 129);
  ex.rho_set = {TestFunction::annulus(0.0, 0.2, 0.5, 1.2, 1.6)};
  std::vector<EmpiricalMeasure> out;
  for (unsigned cap : {1u, 3u}) {
    ThreadCap tc(cap);
    out.push_back(run(ex));
  }
  EXPECT_EQ(out[0].method_used, Method::Subdivide);
  EXPECT_EQ(out[0].pairings, out[1].pairings);
  EXPECT_EQ(out[0].stats[0].mean, out[1].stats[0].mean);
  EXPECT_EQ(out[0].stats[0].se, out[1].stats[0].se);
  const auto again = run(ex);
  EXPECT_EQ(again.pairings, out[0].pairings);
}

TEST(Run, ExpTiltIdentityBySubdivision) {
  auto ex = kac_experiment(12, 300, 8);
  ex.spec.fam = PerturbationFamily::family("exp(((-1)^j/(j+1))*z)")
                    .with_certificates("1", "0", "1", "0")
                    .with_envelopes("exp(3)", "exp(3)");
  ex.rho_set = {builtin_test_functions()[0], builtin_test_functions()[2]};
  const auto em = run(ex);
  EXPECT_EQ(em.method_used, Method::Subdivide);
  for (std::size_t r = 0; r < ex.rho_set.size(); ++r) {
    const double e = expectation_pairing(ex.spec, ex.rho_set[r], ex.window).value;
    EXPECT_LE(std::abs(em.stats[r].mean - e), 3 * em.stats[r].se) << ex.rho_set[r].id();
  }
}

TEST(Run, TrialsAreUncorrelated) {
  const auto em = run(kac_experiment(20, 600, 11));
  for (std::size_t r = 0; r < em.rho_ids.size(); ++r) {
    const auto x = em.series(r);
    ASSERT_GE(x.size(), 500u);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      den += (x[i] - mean) * (x[i] - mean);
      if (i + 1 < x.size()) num += (x[i] - mean) * (x[i + 1] - mean);
    }
    EXPECT_LT(std::abs(num / den), 0.1) << em.rho_ids[r];
  }
}

TEST(Run, AuditGatesTheRun) {
  auto ex = kac_experiment(10, 4);
  ex.spec.fam = PerturbationFamily::scalar("j+1");
  EXPECT_THROW(run(ex), HypothesisFailure);
  ex.allow_failed_audit = true;
  const auto em = run(ex);
  EXPECT_TRUE(em.audit_overridden);
  EXPECT_EQ(em.trials_ok, 4);
}

TEST(Run, RetentionDefaultsByDegree) {
  EXPECT_TRUE(run(kac_experiment(40, 3)).retained);
  auto ex = kac_experiment(310, 2);
  const auto em = run(ex);
  EXPECT_FALSE(em.retained);
  EXPECT_THROW(radial_profile(em, 0.0, 10), NoZeroData);
  ex.retain_zeros = true;
  EXPECT_TRUE(run(ex).retained);
}

TEST(RadialProfile, RootsOfUnity) {
  // Roots of z^64 = -1 sit half a step off every angular bin edge.
  const int n = 64;
  PolyCoeffs p{std::vector<cplx>(n + 1, 0.0)};
  p.c[0] = 1.0;
  p.c[n] = 1.0;
  const auto zl = roots_aberth(p);
  const auto prof = radial_profile(zl, 0.0, 16, 2.0);
  EXPECT_EQ(prof.total, n);
  EXPECT_EQ(prof.mass_between(1.0 - 1e-12, 1.0 + 1e-12), 1.0);
  EXPECT_EQ(prof.radial[8], 1.0);
  for (double a : prof.angular) EXPECT_NEAR(a, 1.0 / 16, 1e-15);
  EXPECT_NEAR(prof.chi2, 0.0, 1e-12);
  EXPECT_NEAR(prof.chi2_p, 1.0, 1e-12);
}

TEST(RadialProfile, ChiSquareDetectsClustering) {
  ZeroList zl;
  for (int k = 0; k < 200; ++k) zl.zeros.push_back({std::polar(1.0, 0.3 + 0.001 * k), 1, 0.0});
  const auto prof = radial_profile(zl, 0.0, 8, 2.0);
  EXPECT_LT(prof.chi2_p, 1e-10);
}

TEST(Sweep, KacGapShrinksAndStaysBelowBound) {
  auto base = kac_experiment(25, 2);
  base.rho_set = {builtin_test_functions()[0]};
  const auto rows = convergence_sweep(base, {25, 50, 100, 200}, {.monte_carlo = false});
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_TRUE(std::isnan(rows[i].mc_mean));
    EXPECT_LE(rows[i].gap, rows[i].rate_bound);
    EXPECT_EQ(rows[i].family_constant, 0.0);
    if (i > 0) {
      EXPECT_LT(rows[i].gap, rows[i - 1].gap);
    }
  }
  EXPECT_LT(rows.back().gap, 0.05);
  EXPECT_TRUE(judge(rows).pass);
  EXPECT_THROW(convergence_sweep(base, {50, 25}), ConfigError);
  EXPECT_THROW(convergence_sweep(base, {}), ConfigError);
}

TEST(Sweep, OneFormNormalizationFailsTheMassCheck) {
  auto base = kac_experiment(25, 2);
  base.rho_set = {builtin_test_functions()[0]};
  const auto rows = convergence_sweep(base, {25, 50}, {.monte_carlo = false, .normalization = CurveNormalization::OneForm});
  const auto v = judge(rows);
  EXPECT_FALSE(v.pass);
  ASSERT_FALSE(v.failures.empty());
  EXPECT_EQ(v.failures.front().rfind("mass:", 0), 0u);
}

TEST(Judge, IdentityFailureIsReported) {
  SweepRow r;
  r.n = 10;
  r.rho_id = "x";
  r.expectation = 0.5;
  r.mc_mean = 0.6;
  r.mc_se = 0.01;
  r.rate_bound = 1.0;
  const auto v = judge({r});
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(v.failures.front().rfind("identity:", 0), 0u);
  r.mc_mean = 0.52;
  EXPECT_TRUE(judge({r}).pass);
}
