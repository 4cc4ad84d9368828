#pragma once

// Deterministic side: the exact finite-n expectation current, the limit
// measure (absolutely continuous part on {|f| > 1} plus the curve measure on
// {|f| = 1}) and their pairings with test functions.
//
// Pairing conventions (dlambda = Lebesgue measure):
//   <E Z(G_n), rho> = (1/(4 pi n)) \iint log h_n * Lap(rho) dlambda
//   <mu, rho>       = (1/(4 pi))   \iint log+|f|^2 * Lap(rho) dlambda

#include <algorithm>
#include <limits>
#include <unordered_map>
#include <vector>

#include "zerolab/common.hpp"
#include "zerolab/ensemble.hpp"
#include "zerolab/holomap.hpp"
#include "zerolab/parallel.hpp"
#include "zerolab/testfn.hpp"

namespace zerolab {

class SupportEscape : public Error {
 public:
  SupportEscape() : Error("test function support leaves the quadrature window", Kind::Usage) {}
};

class OnCurve : public Error {
 public:
  explicit OnCurve(cplx z) : Error("point lies on the curve |f| = 1"), z_(z) {}
  cplx where() const { return z_; }

 private:
  cplx z_;
};

class NegativeMass : public Error {
 public:
  explicit NegativeMass(double m) : Error("negative curve mass on a segment: " + std::to_string(m)) {}
};

/// Radial weight of the absolutely continuous part.
inline double xi(double x) {
  if (x > 1.0) return 2.0 / x;
  if (x == 1.0) return 1.0;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // Richardson estimate
};

/// Composite Simpson on an nx-by-ny interval grid (both rounded up to
/// even). Rows are evaluated in parallel and summed in row order.
template <class F>
double simpson_2d(const F& f, const Rect& r, int nx, int ny) {
  nx += nx & 1;
  ny += ny & 1;
  const double hx = r.width() / nx, hy = r.height() / ny;
  auto weight = [](int i, int n) { return (i == 0 || i == n) ? 1.0 : (i & 1) ? 4.0 : 2.0; };
  std::vector<double> rows(static_cast<std::size_t>(ny + 1));
  parallel_for(rows.size(), [&](std::size_t iy) {
    const double y = r.y0 + hy * static_cast<double>(iy);
    double s = 0.0, comp = 0.0;
    for (int ix = 0; ix <= nx; ++ix) {
      const double term = weight(ix, nx) * f(cplx(r.x0 + hx * ix, y)) - comp;
      const double t = s + term;
      comp = (t - s) - term;
      s = t;
    }
    rows[iy] = weight(static_cast<int>(iy), ny) * s;
  });
  return ordered_sum(rows) * hx * hy / 9.0;
}

/// Simpson at (nx, ny) and (2nx, 2ny), extrapolated once.
template <class F>
QuadratureResult richardson_simpson(const F& f, const Rect& r, int nx, int ny) {
  const double coarse = simpson_2d(f, r, nx, ny);
  const double fine = simpson_2d(f, r, 2 * nx, 2 * ny);
  return {fine + (fine - coarse) / 15.0, std::abs(fine - coarse) / 15.0};
}

namespace detail {
/// Interval counts for the support rectangle: the window's grid spacing,
/// refined so every transition band of rho spans at least 64 intervals.
inline std::pair<int, int> support_grid(const TestFunction& rho, const Window& quad) {
  const Rect support = rho.support();
  const double band = rho.min_transition() / 64.0;
  const double hx = std::min(quad.rect.width() / (quad.nx - 1), band);
  const double hy = std::min(quad.rect.height() / (quad.ny - 1), band);
  const int nx = std::max(16, static_cast<int>(std::ceil(support.width() / hx)));
  const int ny = std::max(16, static_cast<int>(std::ceil(support.height() / hy)));
  return {nx, ny};
}
inline void require_support(const TestFunction& rho, const Window& w) {
  if (!w.rect.contains(rho.support())) throw SupportEscape();
}
}  // namespace detail

/// \iint |Lap rho| dlambda.
inline double laplacian_l1(const TestFunction& rho, int n = 512) {
  return simpson_2d([&](cplx z) { return std::abs(rho.laplacian(z)); }, rho.support(), n, n);
}

/// Exact finite-n pairing of the expected normalized zero divisor.
inline QuadratureResult expectation_pairing(const EnsembleSpec& spec, const TestFunction& rho, const Window& quad) {
  detail::require_support(rho, quad);
  if (spec.n < 1) return {0.0, 0.0};
  const auto [nx, ny] = detail::support_grid(rho, quad);
  const double scale = 1.0 / (4.0 * std::numbers::pi * spec.n);
  const LogHn log_h(spec);
  auto integrand = [&](cplx z) {
    const double lap = rho.laplacian(z);
    return lap == 0.0 ? 0.0 : log_h(z) * lap;
  };
  auto r = richardson_simpson(integrand, rho.support(), nx, ny);
  return {r.value * scale, r.error * scale};
}

/// Limit measure through its potential: (1/4pi) \iint log+|f|^2 Lap rho.
inline QuadratureResult potential_pairing(const HoloMap& map, const TestFunction& rho, const Window& quad) {
  detail::require_support(rho, quad);
  const auto [nx, ny] = detail::support_grid(rho, quad);
  auto integrand = [&](cplx z) {
    const double lap = rho.laplacian(z);
    return lap == 0.0 ? 0.0 : phi(map, z) * lap;
  };
  auto r = richardson_simpson(integrand, rho.support(), nx, ny);
  const double scale = 1.0 / (4.0 * std::numbers::pi);
  return {r.value * scale, r.error * scale};
}

// ---------------------------------------------------------------------------
// Absolutely continuous part

namespace detail {
/// (1/pi) sum_{j<k} |f_j f'_k - f_k f'_j|^2 / |f|^4, the Lebesgue density of
/// (i/2pi) ddbar log|f|^2 (Lagrange identity form; exactly 0 for ell = 1).
inline double fubini_study_density(const std::vector<Jet1>& f) {
  double norm2 = 0.0, gram = 0.0;
  for (const auto& c : f) norm2 += std::norm(c.value);
  for (std::size_t j = 0; j < f.size(); ++j)
    for (std::size_t k = j + 1; k < f.size(); ++k)
      gram += std::norm(f[j].value * f[k].deriv - f[k].value * f[j].deriv);
  return gram / (std::numbers::pi * norm2 * norm2);
}
}  // namespace detail

/// Lebesgue density of the absolutely continuous part at z.
inline double ac_density(const HoloMap& map, cplx z) {
  const auto f = map.eval(z);
  double norm2 = 0.0;
  for (const auto& c : f) norm2 += std::norm(c.value);
  if (std::abs(std::sqrt(norm2) - 1.0) < 1e-10) {
    // Where d|f|^2 vanishes the level set carries no curve mass (e.g. z = 0
    // for f = (z, 1)); report the density from the |f| > 1 side.
    cplx grad = 0.0;
    for (const auto& c : f) grad += std::conj(c.value) * c.deriv;
    if (std::abs(grad) >= 1e-10) throw OnCurve(z);
    return detail::fubini_study_density(f);
  }
  if (norm2 < 1.0) return 0.0;
  return detail::fubini_study_density(f);
}

/// \iint rho * ac_density. Cells the curve crosses are refined so the
/// jump across {|f| = 1} costs O(h/2^depth) instead of O(h).
inline double ac_pairing(const HoloMap& map, const TestFunction& rho, const Window& quad, int refine_depth = 5) {
  detail::require_support(rho, quad);
  const Rect s = rho.support();
  const int nx = std::max(16, static_cast<int>(std::ceil(s.width() * (quad.nx - 1) / quad.rect.width())));
  const int ny = std::max(16, static_cast<int>(std::ceil(s.height() * (quad.ny - 1) / quad.rect.height())));
  const double hx = s.width() / nx, hy = s.height() / ny;
  // 3-point Gauss-Legendre on [-1, 1].
  static constexpr double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

  auto integrand = [&](cplx z) {
    const double r = rho.value(z);
    if (r == 0.0) return 0.0;
    const auto f = map.eval(z);
    double n2 = 0.0;
    for (const auto& c : f) n2 += std::norm(c.value);
    return n2 > 1.0 ? r * detail::fubini_study_density(f) : 0.0;
  };
  auto gauss = [&](const Rect& c) {
    double acc = 0.0;
    const cplx mid = c.center();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        acc += gw[a] * gw[b] *
               integrand(mid + cplx(0.5 * c.width() * gx[a], 0.5 * c.height() * gx[b]));
    return acc * c.width() * c.height() / 4.0;
  };
  auto straddles = [&](const Rect& c) {
    bool pos = false, neg = false;
    for (cplx z : {cplx(c.x0, c.y0), cplx(c.x1, c.y0), cplx(c.x1, c.y1), cplx(c.x0, c.y1), c.center()}) {
      (map.norm2(z) > 1.0 ? pos : neg) = true;
    }
    return pos && neg;
  };
  auto cell = [&](auto&& self, const Rect& c, int depth) -> double {
    if (depth >= refine_depth || !straddles(c)) return gauss(c);
    const double xm = 0.5 * (c.x0 + c.x1), ym = 0.5 * (c.y0 + c.y1);
    return self(self, {c.x0, xm, c.y0, ym}, depth + 1) + self(self, {xm, c.x1, c.y0, ym}, depth + 1) +
           self(self, {c.x0, xm, ym, c.y1}, depth + 1) + self(self, {xm, c.x1, ym, c.y1}, depth + 1);
  };

  std::vector<double> rows(static_cast<std::size_t>(ny));
  parallel_for(rows.size(), [&](std::size_t iy) {
    double acc = 0.0;
    const double y0 = s.y0 + hy * static_cast<double>(iy);
    for (int ix = 0; ix < nx; ++ix) {
      const double x0 = s.x0 + hx * ix;
      acc += cell(cell, {x0, x0 + hx, y0, y0 + hy}, 0);
    }
    rows[iy] = acc;
  });
  return ordered_sum(rows);
}

// ---------------------------------------------------------------------------
// The curve C = {|f| = 1}

struct CurveVertex {
  cplx z{};
  cplx grad{};     // grad of u = |f|^2 - 1 as u_x + i u_y
  cplx tangent{};  // unit, {|f| < 1} on the left
  std::vector<Jet1> f;
  bool degenerate = false;  // |f'(z)| < 1e-8
};

struct Polyline {
  std::vector<CurveVertex> vertices;
  bool closed = false;
};

struct CurveC {
  HoloMap map;
  std::vector<Polyline> polylines;

  std::size_t vertex_count() const {
    std::size_t n = 0;
    for (const auto& p : polylines) n += p.vertices.size();
    return n;
  }
  double length() const {
    double L = 0.0;
    for (const auto& p : polylines) {
      const auto& v = p.vertices;
      for (std::size_t i = 0; i + 1 < v.size(); ++i) L += std::abs(v[i + 1].z - v[i].z);
      if (p.closed && v.size() > 1) L += std::abs(v.front().z - v.back().z);
    }
    return L;
  }
  /// Arc length of segments touching a degenerate vertex.
  double excluded_length() const {
    double L = 0.0;
    for (const auto& p : polylines) {
      const auto& v = p.vertices;
      const std::size_t segs = p.closed ? v.size() : (v.empty() ? 0 : v.size() - 1);
      for (std::size_t i = 0; i < segs; ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % v.size()];
        if (a.degenerate || b.degenerate) L += std::abs(b.z - a.z);
      }
    }
    return L;
  }
};

namespace detail {

struct CurveLocal {
  double u = 0.0;
  cplx grad{};
  std::vector<Jet1> f;
  double fprime_norm = 0.0;
};

inline CurveLocal curve_local(const HoloMap& map, cplx z) {
  CurveLocal c;
  c.f = map.eval(z);
  double n2 = 0.0, d2 = 0.0;
  cplx w = 0.0;  // du/dz = sum conj(f_j) f'_j
  for (const auto& fj : c.f) {
    n2 += std::norm(fj.value);
    d2 += std::norm(fj.deriv);
    w += std::conj(fj.value) * fj.deriv;
  }
  c.u = n2 - 1.0;
  c.grad = 2.0 * std::conj(w);
  c.fprime_norm = std::sqrt(d2);
  return c;
}

/// Newton projection onto u = 0 along grad u.
inline cplx project_to_curve(const HoloMap& map, cplx z, int iters = 40) {
  for (int it = 0; it < iters; ++it) {
    const auto c = curve_local(map, z);
    const double g2 = std::norm(c.grad);
    if (g2 == 0.0 || std::abs(c.u) < 1e-15) break;
    const cplx step = c.u * c.grad / g2;
    z -= step;
    if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

}  // namespace detail

/// Marching squares on u = |f|^2 - 1 over the window grid. Every vertex is
/// Newton-projected onto the level set; chains are oriented with the region
/// {|f| < 1} on their left.
inline CurveC extract_curve(const HoloMap& map, const Window& w) {
  w.validate();
  const int nx = w.nx, ny = w.ny;
  std::vector<double> u(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  parallel_for(static_cast<std::size_t>(ny), [&](std::size_t iy) {
    for (int ix = 0; ix < nx; ++ix) {
      double v = map.norm2(w.node(ix, static_cast<int>(iy))) - 1.0;
      u[iy * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix)] = v;
    }
  });
  auto U = [&](int ix, int iy) { return u[static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix)]; };
  auto positive = [&](int ix, int iy) { return U(ix, iy) >= 0.0; };

  std::unordered_map<long long, int> vertex_of_edge;
  std::vector<cplx> vz;
  auto vertex = [&](long long edge_id, int ax, int ay, int bx, int by) {
    auto it = vertex_of_edge.find(edge_id);
    if (it != vertex_of_edge.end()) return it->second;
    const double ua = U(ax, ay), ub = U(bx, by);
    const double t = ua / (ua - ub);
    const cplx za = w.node(ax, ay), zb = w.node(bx, by);
    vz.push_back(za + t * (zb - za));
    const int id = static_cast<int>(vz.size()) - 1;
    vertex_of_edge.emplace(edge_id, id);
    return id;
  };
  auto h_edge = [&](int ix, int iy) { return 2LL * (static_cast<long long>(iy) * nx + ix); };
  auto v_edge = [&](int ix, int iy) { return 2LL * (static_cast<long long>(iy) * nx + ix) + 1; };

  std::vector<std::pair<int, int>> segs;
  for (int iy = 0; iy + 1 < ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const int cx[5] = {ix, ix + 1, ix + 1, ix, ix};
      const int cy[5] = {iy, iy, iy + 1, iy + 1, iy};
      const long long eid[4] = {h_edge(ix, iy), v_edge(ix + 1, iy), h_edge(ix, iy + 1), v_edge(ix, iy)};
      struct Crossing {
        int vid;
        bool to_negative;  // + -> - along the CCW boundary
      };
      Crossing cr[4];
      int nc = 0;
      for (int e = 0; e < 4; ++e) {
        const bool p0 = positive(cx[e], cy[e]), p1 = positive(cx[e + 1], cy[e + 1]);
        if (p0 == p1) continue;
        cr[nc++] = {vertex(eid[e], cx[e], cy[e], cx[e + 1], cy[e + 1]), p0};
      }
      if (nc == 2) {
        const Crossing& a = cr[0].to_negative ? cr[0] : cr[1];
        const Crossing& b = cr[0].to_negative ? cr[1] : cr[0];
        segs.push_back({b.vid, a.vid});
      } else if (nc == 4) {
        const cplx mid = 0.5 * (w.node(ix, iy) + w.node(ix + 1, iy + 1));
        const bool centre_pos = map.norm2(mid) - 1.0 >= 0.0;
        for (int k = 0; k < 4; ++k) {
          const Crossing& c = cr[k];
          const Crossing& next = cr[(k + 1) % 4];
          if (centre_pos && c.to_negative) segs.push_back({next.vid, c.vid});
          if (!centre_pos && !c.to_negative) segs.push_back({c.vid, next.vid});
        }
      }
    }
  }

  std::vector<int> next(vz.size(), -1), prev(vz.size(), -1);
  for (const auto& [a, b] : segs) next[static_cast<std::size_t>(a)] = b, prev[static_cast<std::size_t>(b)] = a;

  std::vector<CurveVertex> verts(vz.size());
  parallel_for(vz.size(), [&](std::size_t i) {
    CurveVertex& v = verts[i];
    v.z = detail::project_to_curve(map, vz[i]);
    const auto loc = detail::curve_local(map, v.z);
    v.grad = loc.grad;
    v.f = loc.f;
    v.degenerate = loc.fprime_norm < 1e-8;
    // grad u points into {|f| > 1}; rotating it by +90 degrees keeps {|f| < 1} on the left.
    v.tangent = std::abs(v.grad) > 0.0 ? cplx(0.0, 1.0) * v.grad / std::abs(v.grad) : cplx(0.0);
  });

  CurveC curve;
  curve.map = map;
  std::vector<char> used(vz.size(), 0);
  auto walk = [&](int start) {
    Polyline p;
    int v = start;
    while (v >= 0 && !used[static_cast<std::size_t>(v)]) {
      used[static_cast<std::size_t>(v)] = 1;
      p.vertices.push_back(verts[static_cast<std::size_t>(v)]);
      v = next[static_cast<std::size_t>(v)];
    }
    p.closed = v == start;
    curve.polylines.push_back(std::move(p));
  };
  for (std::size_t i = 0; i < vz.size(); ++i)
    if (prev[i] < 0 && next[i] >= 0) walk(static_cast<int>(i));
  for (std::size_t i = 0; i < vz.size(); ++i)
    if (!used[i] && next[i] >= 0) walk(static_cast<int>(i));
  return curve;
}

enum class CurveNormalization {
  Potential,  // (1/2pi) Im(sum conj(f_j) f'_j dz): total mass 1 for f = z
  OneForm     // the bare 1-form Im(sum conj(f_j) f'_j dz): mass 2pi for f = z
};

/// \int_C rho * (1/2pi) Im(sum_j conj(f_j) f'_j dz), segment midpoint rule
/// with midpoints projected onto C. Segments touching degenerate vertices
/// are skipped.
inline double curve_measure_pairing(const CurveC& c, const TestFunction& rho,
                                    CurveNormalization norm = CurveNormalization::Potential) {
  const double factor = norm == CurveNormalization::Potential ? 1.0 / (2.0 * std::numbers::pi) : 1.0;
  std::vector<double> per_chain(c.polylines.size());
  for (std::size_t k = 0; k < c.polylines.size(); ++k) {
    const auto& v = c.polylines[k].vertices;
    const std::size_t segs = c.polylines[k].closed ? v.size() : (v.empty() ? 0 : v.size() - 1);
    std::vector<double> terms;
    terms.reserve(segs);
    for (std::size_t i = 0; i < segs; ++i) {
      const auto& a = v[i];
      const auto& b = v[(i + 1) % v.size()];
      if (a.degenerate || b.degenerate) continue;
      const cplx mid = detail::project_to_curve(c.map, 0.5 * (a.z + b.z), 4);
      const auto loc = detail::curve_local(c.map, mid);
      const cplx w = 0.5 * std::conj(loc.grad);  // sum conj(f_j) f'_j
      const double mass = factor * (w * (b.z - a.z)).imag();
      if (mass < -1e-9) throw NegativeMass(mass);
      terms.push_back(rho.value(mid) * mass);
    }
    per_chain[k] = ordered_sum(terms);
  }
  return ordered_sum(per_chain);
}

// ---------------------------------------------------------------------------
// Limit pairing

struct LimitPairing {
  double ac = 0.0;
  double curve = 0.0;
  double total = 0.0;
  double potential = 0.0;
  double potential_error = 0.0;
  double diff = 0.0;
  double excluded_length = 0.0;
};

/// Limit measure paired with rho, both as AC + curve and through the
/// potential; `diff` is their absolute difference.
inline LimitPairing limit_pairing(const HoloMap& map, const TestFunction& rho, const Window& w,
                                  CurveNormalization norm = CurveNormalization::Potential) {
  detail::require_support(rho, w);
  LimitPairing out;
  out.ac = ac_pairing(map, rho, w);
  const CurveC c = extract_curve(map, w);
  out.curve = curve_measure_pairing(c, rho, norm);
  out.excluded_length = c.excluded_length();
  out.total = out.ac + out.curve;
  const auto pot = potential_pairing(map, rho, w);
  out.potential = pot.value;
  out.potential_error = pot.error;
  out.diff = std::abs(out.total - out.potential);
  return out;
}

// ---------------------------------------------------------------------------
// Convergence rate

/// sup over the region of max(U, D), where with running-max certificates
///   U = 2 kappa_n log B + 2 lambda_n log(1+|f|)             (upper excess of h_n)
///   D = -2 log|g_0|                     on {|f| <= 1}       (lower deficit)
///   D = 2 xi_n log A + 2 eta_n log(1+|f|) - 2 log c_min    on {|f| > 1}
/// so that |(1/n) log h_n - log+|f|^2| <= (log(n+1) + C)/n on the region.
/// c_min is the tail lower bound constant audited over n/2 <= j <= n.
inline double family_rate_constant(const EnsembleSpec& spec, const Rect& region, int grid = 41) {
  if (spec.fam.kind == FamilyKind::Unit) return 0.0;
  const long long n = std::max(1, spec.n);
  const Window w(region, grid, grid);
  const AuditReport audit = audit_hypotheses(spec.map, spec.fam, w, n);
  const double log_cmin = std::log(audit.c_min);
  const double kappa = static_cast<double>(monotone_sequence(spec.fam.kappa, n).back());
  const double lambda = static_cast<double>(monotone_sequence(spec.fam.lambda, n).back());
  const double xi_n = static_cast<double>(monotone_sequence(spec.fam.xi, n).back());
  const double eta = static_cast<double>(monotone_sequence(spec.fam.eta, n).back());
  std::vector<double> rows(static_cast<std::size_t>(grid));
  parallel_for(rows.size(), [&](std::size_t iy) {
    double m = 0.0;
    for (int ix = 0; ix < grid; ++ix) {
      const cplx z = w.node(ix, static_cast<int>(iy));
      const double f2 = spec.map.norm2(z);
      const double l1f = std::log1p(std::sqrt(f2));
      const double up = 2 * kappa * std::log(spec.fam.envelope_B(z)) + 2 * lambda * l1f;
      const double down = f2 <= 1.0 ? -2.0 * std::log(std::abs(spec.fam.g_value(z, 0)))
                                    : 2 * xi_n * std::log(spec.fam.envelope_A(z)) + 2 * eta * l1f - 2 * log_cmin;
      m = std::max({m, up, down});
    }
    rows[iy] = m;
  });
  return *std::max_element(rows.begin(), rows.end());
}

/// Bound on |expectation_pairing(n) - limit_pairing|.
inline double rate_bound(int n, double family_constant, double lap_l1) {
  return (std::log(n + 1.0) + family_constant) / (4.0 * std::numbers::pi * n) * lap_l1;
}

struct MomentCurvePairing {
  double finite = 0.0;
  double limit = 0.0;
  double bound = 0.0;
};

/// The g = 1 special case for the moment curve f = (z, z^2, ..., z^ell):
/// the finite-n current (1/n)(i/2pi) ddbar log sum_j |f|^{2j} against rho,
/// its limit, and the rate bound log(n+1)/(4 pi n) \iint |Lap rho|.
inline MomentCurvePairing prop21_pairing(int ell, int n, const TestFunction& rho, const Window& w) {
  if (ell < 1) throw ConfigError("prop21_pairing requires ell >= 1");
  std::vector<std::string> comps;
  for (int j = 1; j <= ell; ++j) comps.push_back(j == 1 ? "z" : "z^" + std::to_string(j));
  EnsembleSpec spec;
  spec.map = HoloMap::from_strings(comps);
  spec.n = n;
  MomentCurvePairing out;
  out.finite = expectation_pairing(spec, rho, w).value;
  out.limit = potential_pairing(spec.map, rho, w).value;
  out.bound = rate_bound(n, 0.0, laplacian_l1(rho));
  return out;
}

}  // namespace zerolab
