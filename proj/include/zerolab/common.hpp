#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace zerolab {

using cplx = std::complex<double>;

inline constexpr const char* kVersion = "0.3.0";

/// Base of every error thrown by the library. `code()` maps onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind { Usage, Numerical, Hypothesis };
  explicit Error(const std::string& what, Kind kind = Kind::Numerical)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " at byte " + std::to_string(offset), Kind::Usage), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class PoleError : public Error {
 public:
  explicit PoleError(cplx z)
      : Error("pole (division by zero) at z=(" + std::to_string(z.real()) + "," +
              std::to_string(z.imag()) + ")"),
        z_(z) {}
  cplx where() const noexcept { return z_; }

 private:
  cplx z_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg, Kind::Usage) {}
};

/// Axis-aligned rectangle [x0,x1]x[y0,y1] in the complex plane.
struct Rect {
  double x0 = -1, x1 = 1, y0 = -1, y1 = 1;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double diam() const { return std::hypot(width(), height()); }
  cplx center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  bool contains(cplx z) const {
    return z.real() >= x0 && z.real() <= x1 && z.imag() >= y0 && z.imag() <= y1;
  }
  bool contains(const Rect& o) const {
    return o.x0 >= x0 && o.x1 <= x1 && o.y0 >= y0 && o.y1 <= y1;
  }
  Rect inflated(double d) const { return {x0 - d, x1 + d, y0 - d, y1 + d}; }
  bool valid() const { return x0 < x1 && y0 < y1; }
};

/// A rectangle plus the sampling resolution used for grids over it.
struct Window {
  Rect rect;
  int nx = 2;
  int ny = 2;

  Window() = default;
  Window(Rect r, int nx_, int ny_) : rect(r), nx(nx_), ny(ny_) { validate(); }

  void validate() const {
    if (!rect.valid()) throw ConfigError("window requires x0 < x1 and y0 < y1");
    if (nx < 2 || ny < 2) throw ConfigError("window requires nx, ny >= 2");
  }
  /// Grid node (ix, iy) with ix in [0, nx), iy in [0, ny); corners included.
  cplx node(int ix, int iy) const {
    return {rect.x0 + rect.width() * ix / (nx - 1), rect.y0 + rect.height() * iy / (ny - 1)};
  }
};

}  // namespace zerolab
