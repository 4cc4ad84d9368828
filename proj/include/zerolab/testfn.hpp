#pragma once

#include <string>
#include <vector>

#include "zerolab/common.hpp"

namespace zerolab {

namespace detail {

/// Value with first and second derivative in one real variable.
struct Dual2 {
  double v = 0, d = 0, dd = 0;
};
inline Dual2 operator+(Dual2 a, Dual2 b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
inline Dual2 operator-(Dual2 a, Dual2 b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
inline Dual2 operator*(Dual2 a, Dual2 b) { return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + 2 * a.d * b.d + a.v * b.dd}; }
inline Dual2 operator/(Dual2 a, Dual2 b) {
  const double q = a.v / b.v;
  const double dq = (a.d - q * b.d) / b.v;
  return {q, dq, (a.dd - 2 * dq * b.d - q * b.dd) / b.v};
}
inline Dual2 exp(Dual2 a) {
  const double e = std::exp(a.v);
  return {e, e * a.d, e * (a.dd + a.d * a.d)};
}

/// C-infinity step: 0 for t <= 0, 1 for t >= 1, psi(t)/(psi(t)+psi(1-t))
/// in between with psi(t) = exp(-1/t).
inline Dual2 smooth_step(double t) {
  // exp(-1/t) underflows to 0 below t = 1e-3.
  if (t <= 1e-3) return {0, 0, 0};
  if (t >= 1.0 - 1e-3) return {1, 0, 0};
  const Dual2 x{t, 1, 0};
  const Dual2 one{1, 0, 0};
  const Dual2 a = exp(Dual2{0, 0, 0} - one / x);
  const Dual2 b = exp(Dual2{0, 0, 0} - one / (one - x));
  return a / (a + b);
}

}  // namespace detail

/// 1-D plateau: 0 below a0, smooth rise on [a0,a1], 1 on [a1,b0], smooth
/// fall on [b0,b1], 0 above b1. a0 == a1 means no rising edge.
struct Plateau {
  double a0 = 0, a1 = 0, b0 = 1, b1 = 2;

  detail::Dual2 eval(double x) const {
    if (a1 > a0 && x < a1) {
      if (x <= a0) return {0, 0, 0};
      const double L = a1 - a0;
      const auto s = detail::smooth_step((x - a0) / L);
      return {s.v, s.d / L, s.dd / (L * L)};
    }
    if (a1 <= a0 && x < a0) return {0, 0, 0};
    if (x <= b0) return {1, 0, 0};
    if (x >= b1) return {0, 0, 0};
    const double L = b1 - b0;
    const auto s = detail::smooth_step((x - b0) / L);
    return {1.0 - s.v, -s.d / L, -s.dd / (L * L)};
  }
};

/// Smooth compactly supported test function with a closed-form Laplacian.
class TestFunction {
 public:
  enum class Kind { Radial, Tensor };

  /// 1 on |z-c| <= r_inner, 0 for |z-c| >= r_outer.
  static TestFunction radial_bump(cplx center, double r_inner, double r_outer, std::string id = "disk") {
    return annulus(center, 0.0, 0.0, r_inner, r_outer, std::move(id));
  }

  /// 0 inside r0, rises on [r0,r1], 1 on [r1,r2], falls on [r2,r3].
  static TestFunction annulus(cplx center, double r0, double r1, double r2, double r3,
                              std::string id = "annulus") {
    if (!(0.0 <= r0 && r0 <= r1 && r1 <= r2 && r2 < r3)) throw ConfigError("radial bump radii must increase");
    TestFunction t;
    t.kind_ = Kind::Radial;
    t.center_ = center;
    t.px_ = {r0, r1, r2, r3};
    t.id_ = std::move(id);
    return t;
  }

  /// 1 on the core rectangle, 0 outside the core inflated by margin.
  static TestFunction tensor_bump(Rect core, double margin, std::string id = "tensor") {
    if (!core.valid() || margin <= 0.0) throw ConfigError("tensor bump needs a valid core and margin > 0");
    TestFunction t;
    t.kind_ = Kind::Tensor;
    t.px_ = {core.x0 - margin, core.x0, core.x1, core.x1 + margin};
    t.py_ = {core.y0 - margin, core.y0, core.y1, core.y1 + margin};
    t.id_ = std::move(id);
    return t;
  }

  Kind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  cplx center() const { return center_; }
  const Plateau& radial_profile() const { return px_; }
  const Plateau& x_profile() const { return px_; }
  const Plateau& y_profile() const { return py_; }

  double value(cplx z) const {
    if (kind_ == Kind::Radial) return px_.eval(std::abs(z - center_)).v;
    return px_.eval(z.real()).v * py_.eval(z.imag()).v;
  }

  double laplacian(cplx z) const {
    if (kind_ == Kind::Radial) {
      const double r = std::abs(z - center_);
      const auto p = px_.eval(r);
      if (r == 0.0) return p.d == 0.0 ? 0.0 : 2.0 * p.dd;
      return p.dd + p.d / r;
    }
    const auto x = px_.eval(z.real());
    const auto y = py_.eval(z.imag());
    return x.dd * y.v + x.v * y.dd;
  }

  /// Width of the narrowest transition band; quadrature resolves this scale.
  double min_transition() const {
    auto edge = [](const Plateau& p) {
      const double fall = p.b1 - p.b0;
      return p.a1 > p.a0 ? std::min(p.a1 - p.a0, fall) : fall;
    };
    return kind_ == Kind::Radial ? edge(px_) : std::min(edge(px_), edge(py_));
  }

  Rect support() const {
    if (kind_ == Kind::Radial)
      return {center_.real() - px_.b1, center_.real() + px_.b1, center_.imag() - px_.b1, center_.imag() + px_.b1};
    return {px_.a0, px_.b1, py_.a0, py_.b1};
  }

 private:
  Kind kind_ = Kind::Radial;
  cplx center_{};
  Plateau px_, py_;
  std::string id_;
};

/// The three standard test functions, all supported inside [-2,2]^2.
inline std::vector<TestFunction> builtin_test_functions() {
  return {TestFunction::annulus(0.0, 0.25, 0.5, 1.5, 1.75, "annulus"),
          TestFunction::radial_bump({0.3, 0.2}, 0.6, 1.1, "disk"),
          TestFunction::tensor_bump({0.0, 0.8, -0.4, 0.6}, 0.35, "tensor")};
}

/// Smoothed indicator of Re z > 0 on the disk |z| <= 1.5: the rising edge
/// is odd about x = 0, so rho(x,y) + rho(-x,y) = 1 near the unit circle.
inline TestFunction half_plane_bump() {
  return TestFunction::tensor_bump({0.25, 1.5, -1.5, 1.5}, 0.5, "half_plane");
}

}  // namespace zerolab
