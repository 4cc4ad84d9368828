#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zerolab/common.hpp"
#include "zerolab/ensemble.hpp"
#include "zerolab/expr.hpp"
#include "zerolab/parallel.hpp"

namespace zerolab {

/// Anything evaluable as z -> (G(z), G'(z)).
template <class F>
concept AnalyticFunction = requires(const F& f, cplx z) {
  { f(z) } -> std::convertible_to<Jet1>;
};

class ConvergenceFailure : public Error {
 public:
  explicit ConvergenceFailure(std::vector<double> residuals)
      : Error("root finder did not converge"), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

class BoundaryZero : public Error {
 public:
  explicit BoundaryZero(Rect r) : Error("zero on or near the contour"), rect_(r) {}
  Rect rect() const { return rect_; }

 private:
  Rect rect_;
};

class QuadratureStall : public Error {
 public:
  explicit QuadratureStall(int nodes)
      : Error("winding-number quadrature stalled at " + std::to_string(nodes) + " nodes") {}
};

/// Monomial coefficients c_0..c_D, lowest degree first.
struct PolyCoeffs {
  std::vector<cplx> c;

  int degree() const { return static_cast<int>(c.size()) - 1; }

  PolyCoeffs derivative() const {
    if (c.size() <= 1) return {{0.0}};
    std::vector<cplx> d(c.size() - 1);
    for (std::size_t k = 1; k < c.size(); ++k) d[k - 1] = c[k] * static_cast<double>(k);
    return {d};
  }

  cplx eval(cplx z) const {
    cplx s = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * z + *it;
    return s;
  }

  /// |p(z)| / sum_k |c_k||z|^k, evaluated on the reversed polynomial
  /// outside the unit disk so large |z| cannot overflow.
  double relative_residual(cplx z) const {
    cplx s = 0.0;
    double m = 0.0;
    if (std::abs(z) <= 1.0) {
      const double r = std::abs(z);
      for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * z + *it, m = m * r + std::abs(*it);
    } else {
      const cplx y = 1.0 / z;
      const double r = std::abs(y);
      for (const cplx& ck : c) s = s * y + ck, m = m * r + std::abs(ck);
    }
    return m > 0.0 ? std::abs(s) / m : 0.0;
  }
};

struct Zero {
  cplx location{};
  int multiplicity = 1;
  double residual = 0.0;
};

struct ZeroList {
  std::vector<Zero> zeros;
  Rect window;
  std::vector<std::pair<Rect, int>> unresolved;  // cells that hit the depth limit

  int total_multiplicity() const {
    int s = 0;
    for (const auto& z : zeros) s += z.multiplicity;
    return s;
  }
  ZeroList restricted_to(const Rect& r) const {
    ZeroList out;
    out.window = r;
    for (const auto& z : zeros)
      if (r.contains(z.location)) out.zeros.push_back(z);
    return out;
  }
  void sort() {
    std::sort(zeros.begin(), zeros.end(), [](const Zero& a, const Zero& b) {
      if (a.location.real() != b.location.real()) return a.location.real() < b.location.real();
      return a.location.imag() < b.location.imag();
    });
  }
};

/// Expands G_n into the monomial basis when every f_j and g_k is a polynomial.
inline PolyCoeffs expand_poly(const RandomFunction& rf) {
  const Ensemble& ens = rf.ensemble();
  const EnsembleSpec& spec = ens.spec();
  const Layout& L = ens.layout();

  std::vector<std::vector<cplx>> f;
  for (const auto& comp : spec.map.components()) f.push_back(comp.polynomial());

  auto mul = [](const std::vector<cplx>& a, const std::vector<cplx>& b) {
    std::vector<cplx> r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < b.size(); ++k) r[i + k] += a[i] * b[k];
    return r;
  };
  auto add_scaled = [](std::vector<cplx>& acc, const std::vector<cplx>& p, cplx s) {
    if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] += s * p[i];
  };

  const auto& a = rf.draw().coeffs;
  std::vector<cplx> result{0.0};
  std::vector<std::vector<cplx>> prev{{1.0}}, cur;
  for (int k = 0; k <= L.n; ++k) {
    const std::size_t lo = L.degree_begin[static_cast<std::size_t>(k)];
    const std::size_t hi = L.degree_begin[static_cast<std::size_t>(k + 1)];
    const std::size_t plo = k > 0 ? L.degree_begin[static_cast<std::size_t>(k - 1)] : 0;
    if (k > 0) {
      cur.assign(hi - lo, {});
      for (std::size_t e = lo; e < hi; ++e) cur[e - lo] = mul(prev[L.parent[e] - plo], f[L.var[e]]);
    } else {
      cur = prev;
    }
    std::vector<cplx> block{0.0};
    for (std::size_t e = lo; e < hi; ++e) add_scaled(block, cur[e - lo], a[e] * L.weight[e]);

    std::vector<cplx> g;
    if (spec.fam.kind == FamilyKind::ExprFamily) g = spec.fam.expr.polynomial(k);
    else g = {spec.fam.g_value(0.0, k)};
    add_scaled(result, mul(g, block), 1.0);
    prev = std::move(cur);
  }
  while (result.size() > 1 && result.back() == cplx(0.0)) result.pop_back();
  return {result};
}

namespace detail {

/// Newton correction p/p' with the reversed polynomial for |z| > 1.
inline cplx newton_ratio(const PolyCoeffs& p, cplx z) {
  const int D = p.degree();
  if (std::abs(z) <= 1.0) {
    cplx v = 0.0, d = 0.0;
    for (auto it = p.c.rbegin(); it != p.c.rend(); ++it) d = d * z + v, v = v * z + *it;
    return v / d;
  }
  const cplx y = 1.0 / z;
  cplx q = 0.0, dq = 0.0;
  for (const cplx& ck : p.c) dq = dq * y + q, q = q * y + ck;
  return z * q / (static_cast<double>(D) * q - y * dq);
}

/// Starting points on circles whose radii come from the upper convex hull
/// of (k, log|c_k|).
inline std::vector<cplx> aberth_initial_guesses(const PolyCoeffs& p) {
  const int D = p.degree();
  std::vector<int> idx;
  std::vector<double> lg(p.c.size());
  for (int k = 0; k <= D; ++k) {
    const double a = std::abs(p.c[static_cast<std::size_t>(k)]);
    lg[static_cast<std::size_t>(k)] = a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
  }
  for (int k = 0; k <= D; ++k) {
    if (!std::isfinite(lg[static_cast<std::size_t>(k)])) continue;
    while (idx.size() >= 2) {
      const int i0 = idx[idx.size() - 2], i1 = idx.back();
      const double cross = (i1 - i0) * (lg[static_cast<std::size_t>(k)] - lg[static_cast<std::size_t>(i0)]) -
                           (k - i0) * (lg[static_cast<std::size_t>(i1)] - lg[static_cast<std::size_t>(i0)]);
      if (cross >= 0.0) idx.pop_back();
      else break;
    }
    idx.push_back(k);
  }
  std::vector<cplx> z;
  z.reserve(static_cast<std::size_t>(D));
  constexpr double sigma = 0.7;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t s = 0; s + 1 < idx.size(); ++s) {
    const int m = idx[s + 1] - idx[s];
    const double u = std::exp((lg[static_cast<std::size_t>(idx[s])] - lg[static_cast<std::size_t>(idx[s + 1])]) / m);
    for (int t = 0; t < m; ++t) {
      const double ang = two_pi * t / m + two_pi * idx[s] / D + sigma;
      z.push_back(std::polar(u, ang));
    }
  }
  return z;
}

inline void newton_polish(const PolyCoeffs& p, std::vector<cplx>& roots, int iters) {
  for (auto& z : roots)
    for (int it = 0; it < iters; ++it) {
      const cplx step = newton_ratio(p, z);
      if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
      z -= step;
      if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(z)) break;
    }
}

}  // namespace detail

/// Eigenvalues of the companion matrix; the roots are its spectrum.
inline std::vector<cplx> companion_roots(const PolyCoeffs& p) {
  const int D = p.degree();
  if (D < 1) return {};
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(D, D);
  for (int i = 1; i < D; ++i) C(i, i - 1) = 1.0;
  for (int i = 0; i < D; ++i) C(i, D - 1) = -p.c[static_cast<std::size_t>(i)] / p.c[static_cast<std::size_t>(D)];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
  if (es.info() != Eigen::Success) throw ConvergenceFailure({});
  std::vector<cplx> out(static_cast<std::size_t>(D));
  for (int i = 0; i < D; ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return out;
}

namespace detail {

/// A multiple root splits into approximations about eps^{1/m} apart, which
/// can exceed the merge distance. Groups of nearby clusters are merged when
/// Newton on p^{(m-1)} from their centroid lands near it and p, p', ...,
/// p^{(m-1)} all have relative residual below tol there.
inline void merge_certified_clusters(const PolyCoeffs& p, std::vector<std::pair<cplx, int>>& clusters, double tol) {
  const std::size_t N = clusters.size();
  std::vector<std::size_t> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  auto radius = [](cplx z) { return 1e-4 * std::max(1.0, std::abs(z)); };
  bool any = false;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = i + 1; k < N; ++k)
      if (std::abs(clusters[i].first - clusters[k].first) < radius(clusters[i].first)) {
        parent[find(i)] = find(k);
        any = true;
      }
  if (!any) return;

  std::vector<std::vector<std::size_t>> groups(N);
  for (std::size_t i = 0; i < N; ++i) groups[find(i)].push_back(i);
  std::vector<std::pair<cplx, int>> out;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    if (g.size() == 1) {
      out.push_back(clusters[g[0]]);
      continue;
    }
    cplx centroid = 0.0;
    int m = 0;
    for (std::size_t i : g) centroid += clusters[i].first * static_cast<double>(clusters[i].second), m += clusters[i].second;
    centroid /= static_cast<double>(m);
    std::vector<PolyCoeffs> derivs{p};
    for (int k = 1; k < m; ++k) derivs.push_back(derivs.back().derivative());
    const PolyCoeffs& q = derivs.back();
    const PolyCoeffs dq = q.derivative();
    cplx zs = centroid;
    for (int it = 0; it < 30; ++it) {
      const cplx d = dq.eval(zs);
      if (d == cplx(0.0)) break;
      const cplx step = q.eval(zs) / d;
      zs -= step;
      if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(zs))) break;
    }
    bool certified = std::isfinite(zs.real()) && std::isfinite(zs.imag()) && std::abs(zs - centroid) < radius(centroid);
    for (const auto& d : derivs) certified = certified && d.relative_residual(zs) < tol;
    if (certified) {
      out.emplace_back(zs, m);
    } else {
      for (std::size_t i : g) out.push_back(clusters[i]);
    }
  }
  clusters = std::move(out);
}

}  // namespace detail

struct AberthStats {
  int sweeps = 0;
  bool used_fallback = false;
};

/// All roots of p by Aberth-Ehrlich simultaneous iteration. Roots closer
/// than 10*tol (relative to max(1,|z|)) are merged into one zero with
/// summed multiplicity, as are certified multiple roots (see above). Falls back to companion eigenvalues after 500 sweeps.
inline ZeroList roots_aberth(PolyCoeffs p, double tol = 1e-8, AberthStats* stats = nullptr) {
  while (p.c.size() > 1 && p.c.back() == cplx(0.0)) p.c.pop_back();
  if (p.degree() < 1) throw Error("roots_aberth requires degree >= 1", Error::Kind::Usage);

  std::size_t zeros_at_origin = 0;
  while (zeros_at_origin < p.c.size() && p.c[zeros_at_origin] == cplx(0.0)) ++zeros_at_origin;
  PolyCoeffs q{std::vector<cplx>(p.c.begin() + static_cast<std::ptrdiff_t>(zeros_at_origin), p.c.end())};
  const int D = q.degree();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double stop = 4.0 * (D + 1) * eps;

  std::vector<cplx> z;
  AberthStats st;
  if (D == 1) {
    z = {-q.c[0] / q.c[1]};
  } else if (D > 1) {
    z = detail::aberth_initial_guesses(q);
    std::vector<char> done(z.size(), 0);
    std::size_t remaining = z.size();
    for (st.sweeps = 0; st.sweeps < 500 && remaining > 0; ++st.sweeps) {
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (done[i]) continue;
        if (q.relative_residual(z[i]) <= stop) {
          done[i] = 1, --remaining;
          continue;
        }
        const cplx ratio = detail::newton_ratio(q, z[i]);
        cplx s = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k)
          if (k != i) s += 1.0 / (z[i] - z[k]);
        const cplx w = ratio / (1.0 - ratio * s);
        if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) continue;
        z[i] -= w;
        if (std::abs(w) <= 2.0 * eps * std::abs(z[i])) done[i] = 1, --remaining;
      }
    }
    if (remaining > 0) {
      st.used_fallback = true;
      z = companion_roots(q);
      detail::newton_polish(q, z, 8);
    }
  }
  if (stats) *stats = st;

  for (std::size_t k = 0; k < zeros_at_origin; ++k) z.push_back(0.0);

  std::vector<double> res(z.size());
  bool bad = false;
  for (std::size_t i = 0; i < z.size(); ++i) {
    res[i] = p.relative_residual(z[i]);
    bad |= !(res[i] < tol);
  }
  if (bad) throw ConvergenceFailure(res);

  // Merge clusters (union-find over close pairs).
  std::vector<std::size_t> parent(z.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t k = i + 1; k < z.size(); ++k)
      if (std::abs(z[i] - z[k]) < 10.0 * tol * std::max(1.0, std::abs(z[i]))) parent[find(i)] = find(k);

  std::vector<std::pair<cplx, int>> acc(z.size(), {0.0, 0});
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto& a = acc[find(i)];
    a.first += z[i];
    a.second += 1;
  }
  std::vector<std::pair<cplx, int>> clusters;
  for (const auto& [sum, m] : acc)
    if (m > 0) clusters.emplace_back(sum / static_cast<double>(m), m);
  detail::merge_certified_clusters(p, clusters, tol);

  ZeroList out;
  for (const auto& [loc, m] : clusters) out.zeros.push_back({loc, m, p.relative_residual(loc)});
  out.sort();
  return out;
}

// ---------------------------------------------------------------------------
// Argument principle

namespace detail {

enum class WindingStatus { Ok, BoundaryZero, Stall };

struct WindingResult {
  WindingStatus status = WindingStatus::Ok;
  int count = 0;
  int nodes = 0;
};

/// (1/2 pi i) \oint G'/G dz over the rectangle by trapezoid sums on each
/// side with dyadic refinement. Accepted once the raw value is within 0.25
/// of an integer, agrees with the discrete phase winding, and the phase
/// moves less than pi/4 between neighbouring nodes.
template <AnalyticFunction F>
WindingResult winding_attempt(const F& g, const Rect& r, int max_nodes = 1 << 16) {
  const cplx corners[5] = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}, {r.x0, r.y0}};
  const double diam = r.diam();
  // Node k of m sits at a + (b - a) * (k / m); k / m is exact, so nodes from
  // the previous level are reused bit for bit.
  std::array<std::vector<Jet1>, 4> vals;
  for (int m = 16; 4 * m <= max_nodes; m *= 2) {
    cplx integral = 0.0;
    double phase = 0.0, max_step = 0.0, min_newton = std::numeric_limits<double>::infinity();
    cplx prev_val = 0.0;
    bool have_prev = false, degenerate = false;
    for (int side = 0; side < 4 && !degenerate; ++side) {
      const cplx a = corners[side], b = corners[side + 1];
      std::vector<Jet1> next(static_cast<std::size_t>(m) + 1);
      const bool reuse = vals[side].size() == static_cast<std::size_t>(m / 2) + 1;
      for (int k = 0; k <= m && !degenerate; ++k) {
        Jet1& v = next[static_cast<std::size_t>(k)];
        if (reuse && k % 2 == 0) {
          v = vals[side][static_cast<std::size_t>(k / 2)];
          continue;
        }
        v = g(a + (b - a) * (static_cast<double>(k) / m));
        degenerate = v.value == cplx(0.0) || !std::isfinite(std::abs(v.value)) || !std::isfinite(std::abs(v.deriv));
      }
      if (degenerate) break;
      vals[side] = std::move(next);
      const cplx dz = (b - a) / static_cast<double>(m);
      for (int k = 0; k <= m; ++k) {
        const Jet1& v = vals[side][static_cast<std::size_t>(k)];
        const double wk = (k == 0 || k == m) ? 0.5 : 1.0;
        integral += wk * (v.deriv / v.value) * dz;
        min_newton = std::min(min_newton, std::abs(v.value / v.deriv));
        if (k < m || side == 3) {
          if (have_prev) {
            const double step = std::arg(v.value / prev_val);
            phase += step;
            max_step = std::max(max_step, std::abs(step));
          }
          prev_val = v.value;
          have_prev = true;
        }
      }
    }
    if (degenerate) return {WindingStatus::BoundaryZero, 0, 4 * m};
    const cplx raw = integral / cplx(0.0, 2.0 * std::numbers::pi);
    const double nearest = std::round(raw.real());
    const double wound = std::round(phase / (2.0 * std::numbers::pi));
    const bool snapped = std::abs(raw - cplx(nearest, 0.0)) < 0.25;
    if (snapped && nearest == wound && max_step < std::numbers::pi / 4) {
      if (min_newton < 1e-9 * diam) return {WindingStatus::BoundaryZero, 0, 4 * m};
      return {WindingStatus::Ok, static_cast<int>(nearest), 4 * m};
    }
    if (4 * m * 2 > max_nodes) {
      // A zero within the total retry distance (8 nudges of 1e-6*diam) of
      // the contour keeps reporting as a boundary zero.
      if (min_newton < 1e-5 * diam) return {WindingStatus::BoundaryZero, 0, 4 * m};
      return {WindingStatus::Stall, 0, 4 * m};
    }
  }
  return {WindingStatus::Stall, 0, max_nodes};
}

}  // namespace detail

/// Number of zeros (with multiplicity) of g inside the rectangle. A zero
/// close to the contour pushes the contour outward by 1e-6*diam, at most
/// 8 times.
template <AnalyticFunction F>
int count_zeros_argument(const F& g, const Rect& rect, int retries = 8) {
  Rect r = rect;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    const auto res = detail::winding_attempt(g, r);
    if (res.status == detail::WindingStatus::Ok) return res.count;
    if (res.status == detail::WindingStatus::Stall) throw QuadratureStall(res.nodes);
    r = r.inflated(1e-6 * rect.diam());
  }
  throw BoundaryZero(rect);
}

namespace detail {

template <class F>
double function_scale(const F& g, cplx z, const Rect& cell) {
  if constexpr (requires { g.scale(z); }) {
    return g.scale(z);
  } else {
    double s = 0.0;
    for (cplx c : {cplx(cell.x0, cell.y0), cplx(cell.x1, cell.y0), cplx(cell.x1, cell.y1),
                   cplx(cell.x0, cell.y1), cell.center()})
      s = std::max(s, std::abs(g(c).value));
    return s > 0.0 ? s : 1.0;
  }
}

template <AnalyticFunction F>
std::optional<cplx> newton_in_cell(const F& g, cplx start, const Rect& cell) {
  cplx z = start;
  for (int it = 0; it < 80; ++it) {
    const Jet1 v = g(z);
    if (v.value == cplx(0.0)) break;
    if (v.deriv == cplx(0.0)) return std::nullopt;
    const cplx step = v.value / v.deriv;
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    if (it == 79 && std::abs(step) > 1e-10 * std::max(1.0, std::abs(z))) return std::nullopt;
  }
  if (!cell.inflated(1e-9 * cell.diam()).contains(z)) return std::nullopt;
  return z;
}

}  // namespace detail

/// Zeros of g inside w by recursive quadrisection with argument-principle
/// counts, Newton-polished. Cells still holding several zeros below the
/// resolution 1e-7*diam(w), or at depth_max, are reported as one zero
/// with the cell's count as multiplicity; depth-limited cells are also
/// listed in `unresolved`.
template <AnalyticFunction F>
ZeroList zeros_subdivide(const F& g, const Rect& w, int depth_max = 48) {
  struct Cell {
    Rect r;
    int count;
    int depth;
  };
  struct Outcome {
    std::vector<Cell> children;
    std::vector<Zero> zeros;
    std::vector<std::pair<Rect, int>> unresolved;
  };
  const double resolution = 1e-7 * w.diam();

  ZeroList out;
  out.window = w;
  std::vector<Cell> level{{w, count_zeros_argument(g, w), 0}};

  auto record = [&g](Outcome& o, cplx z, int mult, const Rect& cell) {
    const double scale = detail::function_scale(g, z, cell);
    o.zeros.push_back({z, mult, std::abs(g(z).value) / scale});
  };

  auto split = [&g](const Cell& c, std::vector<Cell>& kids) {
    static constexpr double offsets[] = {0.0, 0.0371, -0.0523, 0.0917, -0.1129, 0.1731};
    for (double off : offsets) {
      const double xm = c.r.x0 + (0.5 + off) * c.r.width();
      const double ym = c.r.y0 + (0.5 - 0.7 * off) * c.r.height();
      const Rect parts[4] = {{c.r.x0, xm, c.r.y0, ym}, {xm, c.r.x1, c.r.y0, ym},
                             {c.r.x0, xm, ym, c.r.y1}, {xm, c.r.x1, ym, c.r.y1}};
      kids.clear();
      int total = 0;
      bool ok = true;
      for (const Rect& p : parts) {
        const auto res = detail::winding_attempt(g, p);
        if (res.status != detail::WindingStatus::Ok) {
          ok = false;
          break;
        }
        total += res.count;
        if (res.count > 0) kids.push_back({p, res.count, c.depth + 1});
      }
      if (ok && total == c.count) return true;
    }
    return false;
  };

  while (!level.empty()) {
    std::vector<Outcome> results(level.size());
    parallel_for(level.size(), [&](std::size_t i) {
      const Cell& c = level[i];
      Outcome& o = results[i];
      if (c.count == 1) {
        if (auto z = detail::newton_in_cell(g, c.r.center(), c.r)) {
          record(o, *z, 1, c.r);
          return;
        }
      } else if (c.r.diam() < resolution) {
        const auto z = detail::newton_in_cell(g, c.r.center(), c.r.inflated(c.r.diam()));
        record(o, z.value_or(c.r.center()), c.count, c.r);
        return;
      }
      if (c.depth >= depth_max || !split(c, o.children)) {
        o.children.clear();
        o.unresolved.push_back({c.r, c.count});
        const auto z = detail::newton_in_cell(g, c.r.center(), c.r.inflated(c.r.diam()));
        record(o, z.value_or(c.r.center()), c.count, c.r);
      }
    });
    std::vector<Cell> next;
    for (auto& o : results) {
      out.zeros.insert(out.zeros.end(), o.zeros.begin(), o.zeros.end());
      out.unresolved.insert(out.unresolved.end(), o.unresolved.begin(), o.unresolved.end());
      next.insert(next.end(), o.children.begin(), o.children.end());
    }
    level = std::move(next);
  }
  out.sort();
  return out;
}

}  // namespace zerolab
