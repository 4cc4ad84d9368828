#pragma once

// Built-in invariant checks run by `zerolab selftest`.

#include <chrono>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "zerolab/ensemble.hpp"
#include "zerolab/holomap.hpp"
#include "zerolab/mc.hpp"
#include "zerolab/testfn.hpp"
#include "zerolab/theory.hpp"
#include "zerolab/zerofind.hpp"

namespace zerolab {

struct SelfTestResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// E log|a| for a standard complex Gaussian: (1/2) \int_0^inf log(t) e^{-t} dt.
inline double log_modulus_mean() {
  boost::math::quadrature::exp_sinh<double> integrator;
  return 0.5 * integrator.integrate([](double t) { return std::log(t) * std::exp(-t); });
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline SelfTestResult check_gamma_bound() {
  SelfTestResult r{"gamma_bound", true, ""};
  const Window w({-2, 2, -2, 2}, 200, 200);
  double worst = 0.0;
  for (const char* f : {"z", "z^2 - 1", "0.5*z"}) {
    const HoloMap map = HoloMap::from_strings({f});
    for (int n : {10, 100, 1000}) {
      const double bound = std::log(n + 1.0) / n;
      for (int iy = 0; iy < w.ny; ++iy)
        for (int ix = 0; ix < w.nx; ++ix) {
          const cplx z = w.node(ix, iy);
          const double d = gamma_n(map, n, z) - phi(map, z);
          if (!(d >= 0.0 && d <= bound)) r.pass = false;
          worst = std::max(worst, d / bound);
        }
    }
  }
  r.detail = "max (gamma_n - phi) / (log(n+1)/n) = " + fmt(worst);
  return r;
}

inline SelfTestResult check_unitary_invariance() {
  SelfTestResult r{"unitary_invariance", true, ""};
  constexpr int dim = 32, vectors = 4, draws = 40000;
  const double target = log_modulus_mean();
  std::vector<Welford> est(vectors);
  for (int v = 0; v < vectors; ++v) {
    auto eng = substream(7, 1000 + static_cast<std::uint64_t>(v));
    std::vector<cplx> u(dim);
    double norm = 0.0;
    for (auto& c : u) c = complex_gaussian(eng), norm += std::norm(c);
    for (auto& c : u) c /= std::sqrt(norm);
    for (int d = 0; d < draws; ++d) {
      cplx s = 0.0;
      for (int k = 0; k < dim; ++k) s += complex_gaussian(eng) * std::conj(u[static_cast<std::size_t>(k)]);
      est[static_cast<std::size_t>(v)].add(std::log(std::abs(s)));
    }
  }
  for (const auto& e : est)
    if (std::abs(e.mean - target) > 3 * e.se()) r.pass = false;
  r.detail = "oracle " + fmt(target) + ", estimates within 3 SE: " + (r.pass ? "yes" : "no");
  return r;
}

inline SelfTestResult check_representations() {
  SelfTestResult r{"representation_equivalence", true, ""};
  EnsembleSpec s;
  s.map = HoloMap::from_strings({"z", "1 + 0.5*z^2"});
  s.fam = PerturbationFamily::family("exp(((-1)^j/(j+1))*z)");
  s.n = 6;
  s.representation = Representation::FullTensor;
  const Ensemble full(s);
  s.representation = Representation::SymmetricMultinomial;
  const Ensemble sym(s);
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const cplx z(u(eng), u(eng)), w(u(eng), u(eng));
    const cplx k = covariance_closed(s, z, w);
    worst = std::max({worst, std::abs(full.covariance_direct(z, w) - k) / std::abs(k),
                      std::abs(sym.covariance_direct(z, w) - k) / std::abs(k)});
  }
  r.pass = worst < 1e-10;
  r.detail = "max relative kernel error " + fmt(worst);
  return r;
}

inline SelfTestResult check_curve_mass() {
  SelfTestResult r{"curve_mass", true, ""};
  const HoloMap map = HoloMap::from_strings({"z"});
  const Window w({-2, 2, -2, 2}, 257, 257);
  const auto total = limit_pairing(map, TestFunction::radial_bump(0.0, 1.2, 1.6), w);
  const auto half = limit_pairing(map, half_plane_bump(), w);
  r.pass = std::abs(total.total - 1.0) < 1e-3 && std::abs(half.total - 0.5) < 5e-3;
  r.detail = "disk mass " + fmt(total.total) + ", half-plane " + fmt(half.total);
  return r;
}

inline SelfTestResult check_density() {
  SelfTestResult r{"density_vs_fd_laplacian", true, ""};
  const HoloMap map = HoloMap::from_strings({"z", "1"});
  const double h = 1e-3;
  auto pot = [](cplx z) { return std::log(1.0 + std::norm(z)) / (4.0 * std::numbers::pi); };
  double worst = 0.0;
  const Window w({-2, 2, -2, 2}, 21, 21);
  for (int iy = 0; iy < w.ny; ++iy)
    for (int ix = 0; ix < w.nx; ++ix) {
      const cplx z = w.node(ix, iy);
      const double fd = (pot(z + h) + pot(z - h) + pot(z + cplx(0, h)) + pot(z - cplx(0, h)) - 4 * pot(z)) / (h * h);
      worst = std::max(worst, std::abs(ac_density(map, z) - fd));
    }
  r.pass = worst < 1e-5;
  r.detail = "max |density - FD| " + fmt(worst);
  return r;
}

inline SelfTestResult check_winding_conservation() {
  SelfTestResult r{"winding_conservation", true, ""};
  EnsembleSpec s;
  s.map = HoloMap::from_strings({"z"});
  s.n = 30;
  s.seed = 3;
  const Ensemble ens(s);
  int checked = 0;
  for (std::uint64_t t = 0; t < 5; ++t) {
    const auto rf = ens.function(ens.sample(t));
    const Rect big{-1.5, 1.5, -1.5, 1.5};
    const double xm = 0.1371, ym = -0.2113;
    const int whole = count_zeros_argument(rf, big);
    const int parts = count_zeros_argument(rf, {big.x0, xm, big.y0, ym}) +
                      count_zeros_argument(rf, {xm, big.x1, big.y0, ym}) +
                      count_zeros_argument(rf, {big.x0, xm, ym, big.y1}) +
                      count_zeros_argument(rf, {xm, big.x1, ym, big.y1});
    if (whole != parts) r.pass = false;
    ++checked;
  }
  r.detail = std::to_string(checked) + " draws, counts additive: " + (r.pass ? "yes" : "no");
  return r;
}

}  // namespace detail

inline std::vector<SelfTestResult> run_selftest() {
  const std::vector<std::function<SelfTestResult()>> checks = {
      detail::check_gamma_bound,      detail::check_unitary_invariance, detail::check_representations,
      detail::check_curve_mass,  detail::check_density,            detail::check_winding_conservation};
  std::vector<SelfTestResult> out;
  for (const auto& c : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    SelfTestResult r;
    try {
      r = c();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace zerolab
