#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "zerolab/common.hpp"
#include "zerolab/ensemble.hpp"
#include "zerolab/holomap.hpp"
#include "zerolab/parallel.hpp"
#include "zerolab/testfn.hpp"
#include "zerolab/theory.hpp"
#include "zerolab/zerofind.hpp"

namespace zerolab {

enum class Method { Aberth, Subdivide, Auto };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Aberth: return "aberth";
    case Method::Subdivide: return "subdivide";
    case Method::Auto: return "auto";
  }
  return "?";
}

class HypothesisFailure : public Error {
 public:
  explicit HypothesisFailure(const std::string& msg) : Error(msg, Kind::Hypothesis) {}
};

class NoZeroData : public Error {
 public:
  NoZeroData() : Error("zero lists were not retained for this run", Kind::Usage) {}
};

struct Experiment {
  EnsembleSpec spec;
  Window window{Rect{-2, 2, -2, 2}, 257, 257};
  int trials = 2;
  std::vector<TestFunction> rho_set;
  Method method = Method::Auto;
  std::optional<bool> retain_zeros;  // default: on up to n = 300
  bool allow_failed_audit = false;
  long long audit_jmax = 0;  // 0: use n
  int subdivide_depth = 48;
};

/// Running mean and sum of squared deviations.
struct Welford {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  /// Chan et al. pairwise combination.
  void merge(const Welford& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double stdev() const { return std::sqrt(variance()); }
  double se() const { return count > 0 ? stdev() / std::sqrt(static_cast<double>(count)) : 0.0; }
};

struct RhoStats {
  std::string id;
  double mean = 0.0;
  double stdev = 0.0;
  double se = 0.0;
  long long n_trials = 0;
};

struct TrialFailure {
  std::uint64_t trial = 0;
  std::string reason;
};

struct EmpiricalMeasure {
  int n = 0;
  Rect window;
  std::vector<std::string> rho_ids;
  std::vector<std::vector<double>> pairings;  // [trial][rho]; empty row if the trial failed
  std::vector<char> ok;
  bool retained = false;
  std::vector<ZeroList> zeros;  // [trial], only when retained
  long long trials_ok = 0;
  long long trials_failed = 0;
  std::vector<TrialFailure> failures;
  std::vector<RhoStats> stats;
  Method method_used = Method::Auto;
  bool audit_overridden = false;

  const RhoStats& stat(const std::string& id) const {
    for (const auto& s : stats)
      if (s.id == id) return s;
    throw Error("no test function with id " + id, Error::Kind::Usage);
  }
  /// Per-trial pairing values for one test function, successful trials only.
  std::vector<double> series(std::size_t rho) const {
    std::vector<double> out;
    for (std::size_t t = 0; t < pairings.size(); ++t)
      if (ok[t]) out.push_back(pairings[t][rho]);
    return out;
  }
};

/// Zeros of one draw inside the window.
inline ZeroList find_zeros(const RandomFunction& rf, const Rect& window, Method method, int depth_max = 48) {
  if (method == Method::Subdivide) return zeros_subdivide(rf, window, depth_max);
  PolyCoeffs p = expand_poly(rf);
  while (p.c.size() > 1 && p.c.back() == cplx(0.0)) p.c.pop_back();
  ZeroList all;
  if (p.degree() >= 1) all = roots_aberth(std::move(p));
  ZeroList in = all.restricted_to(window);
  in.sort();
  return in;
}

/// (1/n) sum over zeros of multiplicity * rho(z); 0 when n = 0.
inline double pair_zeros(const ZeroList& zl, const TestFunction& rho, int n) {
  if (n <= 0) return 0.0;
  std::vector<double> terms;
  terms.reserve(zl.zeros.size());
  for (const auto& z : zl.zeros) terms.push_back(z.multiplicity * rho.value(z.location));
  return ordered_sum(terms) / n;
}

/// Monte Carlo over trials 0..trials-1. Trials are independent substreams;
/// aggregation runs in trial order, so results do not depend on scheduling.
inline EmpiricalMeasure run(const Experiment& ex) {
  if (ex.trials < 2) throw ConfigError("an experiment needs at least 2 trials");
  if (ex.rho_set.empty()) throw ConfigError("an experiment needs at least one test function");
  ex.window.validate();
  for (const auto& r : ex.rho_set)
    if (!ex.window.rect.contains(r.support())) throw SupportEscape();

  EmpiricalMeasure em;
  em.n = ex.spec.n;
  em.window = ex.window.rect;
  em.audit_overridden = ex.allow_failed_audit;
  for (const auto& r : ex.rho_set) em.rho_ids.push_back(r.id());

  if (ex.spec.n >= 1) {
    const long long jmax = ex.audit_jmax > 0 ? ex.audit_jmax : ex.spec.n;
    const Window grid(ex.window.rect, 33, 33);
    const AuditReport rep = audit_hypotheses(ex.spec.map, ex.spec.fam, grid, jmax);
    if (!rep.pass() && !ex.allow_failed_audit)
      throw HypothesisFailure("perturbation family fails the hypothesis audit; rerun the audit for the witness");
  }

  Method method = ex.method;
  if (method == Method::Auto) {
    const bool poly = ex.spec.map.is_polynomial() &&
                      (ex.spec.fam.kind != FamilyKind::ExprFamily || ex.spec.fam.expr.is_polynomial());
    method = poly ? Method::Aberth : Method::Subdivide;
  }
  em.method_used = method;
  em.retained = ex.retain_zeros.value_or(ex.spec.n <= 300);

  const Ensemble ens(ex.spec);
  const auto T = static_cast<std::size_t>(ex.trials);
  em.pairings.assign(T, {});
  em.ok.assign(T, 0);
  if (em.retained) em.zeros.assign(T, {});
  std::vector<std::string> reason(T);

  parallel_for(T, [&](std::size_t t) {
    try {
      const RandomFunction rf = ens.function(ens.sample(t));
      ZeroList zl = ex.spec.n == 0 ? ZeroList{} : find_zeros(rf, ex.window.rect, method, ex.subdivide_depth);
      zl.window = ex.window.rect;
      std::vector<double> row(ex.rho_set.size());
      for (std::size_t r = 0; r < row.size(); ++r) row[r] = pair_zeros(zl, ex.rho_set[r], ex.spec.n);
      em.pairings[t] = std::move(row);
      if (em.retained) em.zeros[t] = std::move(zl);
      em.ok[t] = 1;
    } catch (const Error& e) {
      if (e.kind() != Error::Kind::Numerical) throw;
      reason[t] = e.what();
    }
  });

  std::vector<Welford> acc(ex.rho_set.size());
  for (std::size_t t = 0; t < T; ++t) {
    if (!em.ok[t]) {
      ++em.trials_failed;
      em.failures.push_back({t, reason[t]});
      continue;
    }
    ++em.trials_ok;
    for (std::size_t r = 0; r < acc.size(); ++r) acc[r].add(em.pairings[t][r]);
  }
  if (em.trials_failed * 100 > ex.trials)
    throw Error(std::to_string(em.trials_failed) + " of " + std::to_string(ex.trials) +
                " trials failed (limit 1%)");
  for (std::size_t r = 0; r < acc.size(); ++r)
    em.stats.push_back({em.rho_ids[r], acc[r].mean, acc[r].stdev(), acc[r].se(), acc[r].count});
  return em;
}

struct RadialProfile {
  cplx center{};
  double r_max = 0.0;
  std::vector<double> radial;   // normalized bin masses over [0, r_max]
  std::vector<double> angular;  // normalized bin masses over [-pi, pi)
  std::vector<double> radii;    // sorted, one entry per unit of multiplicity
  long long total = 0;
  double chi2 = 0.0;
  double chi2_p = 1.0;

  /// Fraction of zeros with lo <= |z - center| <= hi.
  double mass_between(double lo, double hi) const {
    if (total == 0) return 0.0;
    const auto a = std::lower_bound(radii.begin(), radii.end(), lo);
    const auto b = std::upper_bound(radii.begin(), radii.end(), hi);
    return static_cast<double>(b - a) / static_cast<double>(total);
  }
};

namespace detail {
inline RadialProfile build_profile(const std::vector<const ZeroList*>& lists, cplx center, int bins, double r_max) {
  if (bins < 1) throw ConfigError("profile needs at least one bin");
  RadialProfile p;
  p.center = center;
  p.r_max = r_max;
  p.radial.assign(static_cast<std::size_t>(bins), 0.0);
  p.angular.assign(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> angular_count(static_cast<std::size_t>(bins), 0.0);
  for (const ZeroList* zl : lists) {
    for (const auto& z : zl->zeros) {
      const cplx d = z.location - center;
      const double r = std::abs(d);
      const double a = std::arg(d);
      for (int m = 0; m < z.multiplicity; ++m) p.radii.push_back(r);
      const auto rb = std::min<std::size_t>(static_cast<std::size_t>(r / r_max * bins), static_cast<std::size_t>(bins - 1));
      p.radial[rb] += z.multiplicity;
      const auto ab = std::min<std::size_t>(static_cast<std::size_t>((a + std::numbers::pi) / (2 * std::numbers::pi) * bins),
                                            static_cast<std::size_t>(bins - 1));
      angular_count[ab] += z.multiplicity;
      p.total += z.multiplicity;
    }
  }
  std::sort(p.radii.begin(), p.radii.end());
  if (p.total > 0) {
    const double expected = static_cast<double>(p.total) / bins;
    for (int b = 0; b < bins; ++b) {
      const double o = angular_count[static_cast<std::size_t>(b)];
      p.chi2 += (o - expected) * (o - expected) / expected;
      p.radial[static_cast<std::size_t>(b)] /= static_cast<double>(p.total);
      p.angular[static_cast<std::size_t>(b)] = o / static_cast<double>(p.total);
    }
    p.chi2_p = bins > 1 ? boost::math::gamma_q(0.5 * (bins - 1), 0.5 * p.chi2) : 1.0;
  }
  return p;
}

inline double farthest_corner(const Rect& r, cplx c) {
  double m = 0.0;
  for (cplx z : {cplx(r.x0, r.y0), cplx(r.x1, r.y0), cplx(r.x1, r.y1), cplx(r.x0, r.y1)})
    m = std::max(m, std::abs(z - c));
  return m;
}
}  // namespace detail

/// Radial and angular histograms of all retained zeros about `center`, with
/// a chi-square test of angular uniformity.
inline RadialProfile radial_profile(const EmpiricalMeasure& em, cplx center, int bins) {
  if (!em.retained) throw NoZeroData();
  std::vector<const ZeroList*> lists;
  for (std::size_t t = 0; t < em.zeros.size(); ++t)
    if (em.ok[t]) lists.push_back(&em.zeros[t]);
  return detail::build_profile(lists, center, bins, detail::farthest_corner(em.window, center));
}

/// Same profile for one deterministic zero list.
inline RadialProfile radial_profile(const ZeroList& zl, cplx center, int bins, double r_max) {
  return detail::build_profile({&zl}, center, bins, r_max);
}

struct SweepRow {
  int n = 0;
  std::string rho_id;
  double expectation = 0.0;
  double expectation_err = 0.0;
  double mc_mean = std::numeric_limits<double>::quiet_NaN();
  double mc_se = std::numeric_limits<double>::quiet_NaN();
  long long mc_trials = 0;
  double limit = 0.0;
  double limit_ac = 0.0;
  double limit_curve = 0.0;
  double potential = 0.0;
  double limit_diff = 0.0;
  double gap = 0.0;
  double family_constant = 0.0;
  double rate_bound = 0.0;
  double rate_ratio = 0.0;  // gap * n / log(n+1)
};

struct SweepOptions {
  bool monte_carlo = true;
  CurveNormalization normalization = CurveNormalization::Potential;
};

/// expectation_pairing, Monte Carlo, and limit for every n in n_list and
/// every test function of the base experiment.
inline std::vector<SweepRow> convergence_sweep(const Experiment& base, const std::vector<int>& n_list,
                                               SweepOptions opt = {}) {
  if (n_list.empty()) throw ConfigError("n_list is empty");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw ConfigError("n_list must be increasing");
  if (n_list.front() < 1) throw ConfigError("n_list entries must be >= 1");

  struct Fixed {
    LimitPairing limit;
    double lap_l1;
  };
  std::vector<Fixed> fixed;
  for (const auto& rho : base.rho_set)
    fixed.push_back({limit_pairing(base.spec.map, rho, base.window, opt.normalization), laplacian_l1(rho)});

  std::vector<SweepRow> rows;
  for (int n : n_list) {
    Experiment ex = base;
    ex.spec.n = n;
    std::optional<EmpiricalMeasure> em;
    if (opt.monte_carlo) em = run(ex);
    for (std::size_t r = 0; r < base.rho_set.size(); ++r) {
      const auto& rho = base.rho_set[r];
      SweepRow row;
      row.n = n;
      row.rho_id = rho.id();
      const auto e = expectation_pairing(ex.spec, rho, ex.window);
      row.expectation = e.value;
      row.expectation_err = e.error;
      if (em) {
        row.mc_mean = em->stats[r].mean;
        row.mc_se = em->stats[r].se;
        row.mc_trials = em->stats[r].n_trials;
      }
      const auto& lim = fixed[r].limit;
      row.limit = lim.total;
      row.limit_ac = lim.ac;
      row.limit_curve = lim.curve;
      row.potential = lim.potential;
      row.limit_diff = lim.diff;
      row.gap = std::abs(row.expectation - row.limit);
      row.family_constant = family_rate_constant(ex.spec, rho.support());
      row.rate_bound = rate_bound(n, row.family_constant, fixed[r].lap_l1);
      row.rate_ratio = row.gap * n / std::log(n + 1.0);
      rows.push_back(row);
    }
  }
  return rows;
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> failures;
};

/// PASS iff every Monte Carlo mean lies within 3 SE of its expectation,
/// the limit's two forms agree to 1e-3 (mass check), and the final-n gap
/// is within the rate bound.
inline Verdict judge(const std::vector<SweepRow>& rows, double band = 3.0) {
  Verdict v;
  auto fail = [&](std::string msg) {
    v.pass = false;
    v.failures.push_back(std::move(msg));
  };
  if (rows.empty()) return v;
  const int last_n = rows.back().n;
  for (const auto& r : rows) {
    const std::string tag = "n=" + std::to_string(r.n) + " rho=" + r.rho_id;
    if (!std::isnan(r.mc_mean) && !(std::abs(r.mc_mean - r.expectation) <= band * r.mc_se))
      fail("identity: " + tag + " Monte Carlo mean outside " + std::to_string(band) + " SE of the expectation");
    if (!(r.limit_diff < 1e-3)) fail("mass: " + tag + " limit forms disagree by " + std::to_string(r.limit_diff));
    if (r.n == last_n && !(r.gap <= r.rate_bound))
      fail("rate: " + tag + " gap " + std::to_string(r.gap) + " exceeds bound " + std::to_string(r.rate_bound));
  }
  return v;
}

}  // namespace zerolab
