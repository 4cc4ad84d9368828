#pragma once

// Independent reference computations used only by the tests.

#include <algorithm>
#include <complex>
#include <limits>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

template <class F>
cplx central_difference(const F& f, cplx z, double h) {
  return (f(z + h) - f(z - h)) / (2.0 * h);
}

/// 5-point Laplacian of a real function of z.
template <class F>
double fd_laplacian(const F& f, cplx z, double h) {
  return (f(z + h) + f(z - h) + f(z + cplx(0, h)) + f(z - cplx(0, h)) - 4.0 * f(z)) / (h * h);
}

/// Fourth-order 9-point Laplacian (5-point second difference per axis).
template <class F>
double fd_laplacian4(const F& f, cplx z, double h) {
  double s = 0.0;
  for (cplx d : {cplx(1, 0), cplx(0, 1)})
    s += -f(z + 2.0 * h * d) + 16.0 * f(z + h * d) - 30.0 * f(z) + 16.0 * f(z - h * d) - f(z - 2.0 * h * d);
  return s / (12.0 * h * h);
}

/// Minimum-cost perfect assignment (Hungarian algorithm, O(n^3)) for a
/// square cost matrix. Returns col[i] assigned to row i.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) u[p[j]] += delta, v[j] -= delta;
        else minv[j] -= delta;
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col(n);
  for (int j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

/// Largest distance between matched points under the optimal pairing
/// (sum of distances minimized). Sizes must agree.
inline double matched_distance(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  if (a.empty()) return 0.0;
  std::vector<std::vector<double>> cost(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) cost[i][j] = std::abs(a[i] - b[j]);
  const auto col = hungarian(cost);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, cost[i][static_cast<std::size_t>(col[i])]);
  return worst;
}

}  // namespace oracle
