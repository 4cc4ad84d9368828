#pragma once

// The random function G_n(z) = <a, v(z)>, in two coefficient layouts:
//
//  * FullTensor: one coefficient per word (j_1, ..., j_k) over {1..ell},
//    v = g_k f_{j_1} ... f_{j_k}. N = 1 + ell + ... + ell^n entries.
//  * SymmetricMultinomial: one coefficient per multi-index alpha with
//    |alpha| = k, v = sqrt(k!/alpha!) g_k f^alpha. Both layouts have the
//    covariance kernel sum_k g_k(z) conj(g_k(w)) <f(z), f(w)>^k.

#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "zerolab/common.hpp"
#include "zerolab/expr.hpp"
#include "zerolab/holomap.hpp"

namespace zerolab {

enum class Representation { FullTensor, SymmetricMultinomial };

inline const char* to_string(Representation r) {
  return r == Representation::FullTensor ? "full_tensor" : "symmetric_multinomial";
}

class OverflowGuard : public Error {
 public:
  explicit OverflowGuard(const std::string& msg) : Error(msg, Kind::Usage) {}
};

inline constexpr std::uint64_t kFullTensorLimit = 1ULL << 20;
inline constexpr std::uint64_t kSymmetricLimit = 1ULL << 24;

namespace detail {
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}
}  // namespace detail

/// Number of Gaussian coefficients of G_n in the given layout.
inline std::uint64_t coeff_count(int ell, int n, Representation rep) {
  if (ell < 1 || n < 0) throw ConfigError("coeff_count requires ell >= 1 and n >= 0");
  const auto limit = rep == Representation::FullTensor ? kFullTensorLimit : kSymmetricLimit;
  std::uint64_t total = 0, term = 1;
  for (int k = 0; k <= n; ++k) {
    const std::uint64_t t = rep == Representation::FullTensor
                                ? term
                                : detail::binomial(static_cast<std::uint64_t>(k + ell - 1),
                                                   static_cast<std::uint64_t>(ell - 1));
    total += t;
    if (total > limit)
      throw OverflowGuard(std::string(to_string(rep)) + " layout exceeds " + std::to_string(limit) +
                          " coefficients");
    if (rep == Representation::FullTensor) term *= static_cast<std::uint64_t>(ell);
  }
  return total;
}

/// Index structure shared by all draws of one ensemble. Entry e of degree
/// k > 0 is parent(e) (degree k-1) multiplied by f_{var(e)}.
struct Layout {
  Representation rep = Representation::SymmetricMultinomial;
  int ell = 1;
  int n = 0;
  std::vector<std::size_t> degree_begin;  // n+2 offsets
  std::vector<std::uint32_t> parent;
  std::vector<std::uint16_t> var;
  std::vector<double> weight;  // sqrt(k!/alpha!) or 1

  std::size_t size() const { return parent.size(); }

  static Layout make(int ell, int n, Representation rep) {
    const std::uint64_t count = coeff_count(ell, n, rep);
    Layout L;
    L.rep = rep;
    L.ell = ell;
    L.n = n;
    L.parent.reserve(count);
    L.var.reserve(count);
    L.weight.reserve(count);
    std::vector<std::uint32_t> run;  // multiplicity of the trailing variable
    run.reserve(count);
    L.degree_begin.push_back(0);
    L.parent.push_back(0);
    L.var.push_back(0);
    L.weight.push_back(1.0);
    run.push_back(0);
    L.degree_begin.push_back(1);
    for (int k = 1; k <= n; ++k) {
      const std::size_t lo = L.degree_begin[static_cast<std::size_t>(k - 1)];
      const std::size_t hi = L.degree_begin[static_cast<std::size_t>(k)];
      for (std::size_t p = lo; p < hi; ++p) {
        // Symmetric layout appends only variables >= the trailing one, so
        // every multi-index appears once as a non-decreasing word.
        const int first = (rep == Representation::SymmetricMultinomial && k > 1) ? L.var[p] : 0;
        for (int v = first; v < ell; ++v) {
          L.parent.push_back(static_cast<std::uint32_t>(p));
          L.var.push_back(static_cast<std::uint16_t>(v));
          if (rep == Representation::FullTensor) {
            L.weight.push_back(1.0);
            run.push_back(0);
          } else {
            const std::uint32_t r = (k > 1 && L.var[p] == v) ? run[p] + 1 : 1;
            run.push_back(r);
            L.weight.push_back(L.weight[p] * std::sqrt(static_cast<double>(k) / r));
          }
        }
      }
      L.degree_begin.push_back(L.parent.size());
    }
    return L;
  }

  int degree_of(std::size_t e) const {
    int k = 0;
    while (degree_begin[static_cast<std::size_t>(k + 1)] <= e) ++k;
    return k;
  }
};

struct EnsembleSpec {
  HoloMap map;
  PerturbationFamily fam;
  int n = 1;
  Representation representation = Representation::SymmetricMultinomial;
  std::uint64_t seed = 0;
};

struct CoefficientDraw {
  std::uint64_t trial = 0;
  Representation representation = Representation::SymmetricMultinomial;
  int ell = 1;
  int n = 0;
  std::vector<cplx> coeffs;
};

/// splitmix64 finalizer; used to derive per-trial substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Engine for one (seed, trial) substream, independent of execution order.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t trial) {
  return std::mt19937_64(seed ^ splitmix64(trial));
}

/// Standard complex Gaussian: density (1/pi) exp(-|a|^2).
template <class Engine>
cplx complex_gaussian(Engine& eng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  const double re = nd(eng);
  return {re, nd(eng)};
}

class RandomFunction;

/// An ensemble G_n: spec plus the index layout shared by its draws.
class Ensemble {
 public:
  explicit Ensemble(EnsembleSpec spec)
      : spec_(std::move(spec)),
        layout_(std::make_shared<const Layout>(
            Layout::make(static_cast<int>(spec_.map.ell()), spec_.n, spec_.representation))) {
    if (spec_.n < 0) throw ConfigError("degree n must be >= 0");
    if (spec_.fam.constant_in_z()) {
      g_const_.resize(static_cast<std::size_t>(spec_.n + 1));
      for (int k = 0; k <= spec_.n; ++k) g_const_[static_cast<std::size_t>(k)] = spec_.fam.g_value(0.0, k);
    } else if (spec_.fam.kind == FamilyKind::ExprFamily) {
      for (int k = 0; k <= spec_.n; ++k) g_bound_.push_back(spec_.fam.expr.bind(k));
    }
  }

  const EnsembleSpec& spec() const { return spec_; }
  const Layout& layout() const { return *layout_; }
  std::size_t size() const { return layout_->size(); }

  CoefficientDraw sample(std::uint64_t trial) const {
    CoefficientDraw d;
    d.trial = trial;
    d.representation = spec_.representation;
    d.ell = layout_->ell;
    d.n = layout_->n;
    d.coeffs.resize(layout_->size());
    auto eng = substream(spec_.seed, trial);
    for (auto& c : d.coeffs) c = complex_gaussian(eng);
    return d;
  }

  /// g_0(z)..g_n(z) as jets.
  void weights_into(cplx z, std::vector<Jet1>& g) const {
    g.resize(static_cast<std::size_t>(spec_.n + 1));
    if (!g_const_.empty()) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = Jet1(g_const_[k], 0.0);
    } else if (!g_bound_.empty()) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = g_bound_[k].eval_jet(z);
    } else {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = spec_.fam.g(z, static_cast<long long>(k));
    }
  }

  /// The feature vector v(z) (with derivatives) such that G = <a, v>.
  void features_into(cplx z, std::vector<Jet1>& v) const {
    thread_local std::vector<Jet1> f, g;
    spec_.map.eval_into(z, f);
    weights_into(z, g);
    const Layout& L = *layout_;
    v.resize(L.size());
    v[0] = Jet1(1.0, 0.0);
    for (std::size_t e = 1; e < L.size(); ++e) v[e] = v[L.parent[e]] * f[L.var[e]];
    for (int k = 0; k <= L.n; ++k) {
      const Jet1& gk = g[static_cast<std::size_t>(k)];
      for (std::size_t e = L.degree_begin[static_cast<std::size_t>(k)];
           e < L.degree_begin[static_cast<std::size_t>(k + 1)]; ++e) {
        v[e] = v[e] * gk;
      }
    }
    for (std::size_t e = 0; e < L.size(); ++e) v[e] *= cplx(L.weight[e]);
  }

  std::vector<Jet1> features(cplx z) const {
    std::vector<Jet1> v;
    features_into(z, v);
    return v;
  }

  RandomFunction function(CoefficientDraw draw) const;

  /// E[G(z) conj(G(w))] = <v(z), v(w)> by direct summation over the layout.
  cplx covariance_direct(cplx z, cplx w) const {
    const auto vz = features(z);
    const auto vw = features(w);
    cplx s = 0.0;
    for (std::size_t e = 0; e < vz.size(); ++e) s += vz[e].value * std::conj(vw[e].value);
    return s;
  }

 private:
  EnsembleSpec spec_;
  std::shared_ptr<const Layout> layout_;
  std::vector<cplx> g_const_;
  std::vector<ExprProgram> g_bound_;
};

/// One sampled G_n. Evaluation is a pure function of (spec, draw, z).
class RandomFunction {
 public:
  RandomFunction(const Ensemble& ens, CoefficientDraw draw) : ens_(&ens), draw_(std::move(draw)) {
    if (draw_.coeffs.size() != ens.size()) throw ConfigError("draw does not match ensemble layout");
  }

  const Ensemble& ensemble() const { return *ens_; }
  const CoefficientDraw& draw() const { return draw_; }

  Jet1 operator()(cplx z) const {
    thread_local std::vector<Jet1> v;
    ens_->features_into(z, v);
    Jet1 s(0.0, 0.0);
    for (std::size_t e = 0; e < v.size(); ++e) {
      s.value += draw_.coeffs[e] * v[e].value;
      s.deriv += draw_.coeffs[e] * v[e].deriv;
    }
    return s;
  }

  /// Natural magnitude of G at z: sqrt(h_n(z)), the standard deviation.
  double scale(cplx z) const;

 private:
  const Ensemble* ens_;
  CoefficientDraw draw_;
};

inline RandomFunction Ensemble::function(CoefficientDraw draw) const { return RandomFunction(*this, std::move(draw)); }

inline CoefficientDraw sample(const Ensemble& ens, std::uint64_t trial) { return ens.sample(trial); }
inline Jet1 eval_G(const RandomFunction& rf, cplx z) { return rf(z); }

/// Closed-form kernel sum_k g_k(z) conj(g_k(w)) <f(z), f(w)>^k.
inline cplx covariance_closed(const EnsembleSpec& spec, cplx z, cplx w) {
  const auto fz = spec.map.eval(z);
  const auto fw = spec.map.eval(w);
  cplx inner = 0.0;
  for (std::size_t j = 0; j < fz.size(); ++j) inner += fz[j].value * std::conj(fw[j].value);
  cplx s = 0.0, p = 1.0;
  for (int k = 0; k <= spec.n; ++k) {
    s += spec.fam.g_value(z, k) * std::conj(spec.fam.g_value(w, k)) * p;
    p *= inner;
  }
  return s;
}

namespace detail {
/// log sum_k exp(t_k) with the max term factored out; -inf terms allowed.
inline double log_sum_exp(std::span<const double> t) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : t) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : t) s += std::exp(x - m);
  return m + std::log(s);
}
}  // namespace detail

/// log h_n(z) = log sum_k |g_k(z)|^2 |f(z)|^{2k}, computed in log domain.
/// Reusable across points; log|g_k|^2 is precomputed when g is z-free,
/// otherwise g_k is bound per degree.
class LogHn {
 public:
  explicit LogHn(const EnsembleSpec& spec) : spec_(&spec) {
    if (spec.fam.constant_in_z()) {
      lg2_.resize(static_cast<std::size_t>(spec.n + 1));
      for (int k = 0; k <= spec.n; ++k)
        lg2_[static_cast<std::size_t>(k)] = 2.0 * std::log(std::abs(spec.fam.g_value(0.0, k)));
    } else {
      for (int k = 0; k <= spec.n; ++k) bound_.push_back(spec.fam.expr.bind(k));
    }
  }

  double operator()(cplx z) const {
    const double lf2 = std::log(spec_->map.norm2(z));
    thread_local std::vector<double> t;
    t.resize(static_cast<std::size_t>(spec_->n + 1));
    for (int k = 0; k <= spec_->n; ++k) {
      const double lg2 = lg2_.empty() ? 2.0 * std::log(std::abs(bound_[static_cast<std::size_t>(k)].eval(z)))
                                      : lg2_[static_cast<std::size_t>(k)];
      t[static_cast<std::size_t>(k)] = k == 0 ? lg2 : lg2 + k * lf2;
    }
    return detail::log_sum_exp(t);
  }

 private:
  const EnsembleSpec* spec_;
  std::vector<double> lg2_;
  std::vector<ExprProgram> bound_;
};

inline double log_h_n(const EnsembleSpec& spec, cplx z) { return LogHn(spec)(z); }

inline double h_n(const EnsembleSpec& spec, cplx z) { return std::exp(log_h_n(spec, z)); }

inline double RandomFunction::scale(cplx z) const {
  thread_local std::vector<Jet1> g;
  thread_local std::vector<double> t;
  const auto& spec = ens_->spec();
  ens_->weights_into(z, g);
  const double lf2 = std::log(spec.map.norm2(z));
  t.resize(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double lg2 = 2.0 * std::log(std::abs(g[k].value));
    t[k] = k == 0 ? lg2 : lg2 + static_cast<double>(k) * lf2;
  }
  return std::exp(0.5 * detail::log_sum_exp(t));
}

/// gamma_n - phi = (1/n) log sum_{m=0}^n r^m with r = min(|f|^2, |f|^-2),
/// which lies in [0, log(n+1)/n].
inline double gamma_excess(double f2, int n) {
  if (n < 1) throw ConfigError("gamma_n requires n >= 1");
  const double r = f2 <= 1.0 ? f2 : 1.0 / f2;
  double s = 0.0, p = 1.0;
  for (int m = 0; m <= n; ++m) {
    s += p;
    p *= r;
  }
  return std::log(s) / n;
}

/// phi(z) = log+ |f(z)|^2.
inline double phi(const HoloMap& map, cplx z) {
  const double f2 = map.norm2(z);
  return f2 > 1.0 ? std::log(f2) : 0.0;
}

/// gamma_n(z) = (1/n) log(1 + |f|^2 + ... + |f|^{2n}).
inline double gamma_n(const HoloMap& map, int n, cplx z) {
  const double f2 = map.norm2(z);
  return (f2 > 1.0 ? std::log(f2) : 0.0) + gamma_excess(f2, n);
}

}  // namespace zerolab
