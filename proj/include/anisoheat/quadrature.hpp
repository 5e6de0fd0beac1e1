#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "anisoheat/common.hpp"

namespace anisoheat {

struct Rule1d {
  std::vector<double> points;   // in [0, 1]
  std::vector<double> weights;  // sum to 1
};

namespace detail {

/// Legendre polynomial P_n(x) and its derivative.
inline std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

}  // namespace detail

/// n-point Gauss-Legendre rule mapped to [0, 1]; exact for degree 2n - 1.
inline Rule1d gauss_legendre(int n) {
  if (n < 1) throw Error("gauss_legendre: need at least one point");
  Rule1d r;
  r.points.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = detail::legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = detail::legendre(n, x).second;
    r.points[n - 1 - i] = 0.5 * (x + 1.0);
    r.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

struct Rule2d {
  std::vector<Vec2> points;     // reference triangle (0,0), (1,0), (0,1)
  std::vector<double> weights;  // sum to 1/2
};

/// Collapsed (Duffy) Gauss rule on the reference triangle, exact for total
/// degree <= degree.
inline Rule2d triangle_rule(int degree) {
  const int n = std::max(1, (degree + 3) / 2);
  const Rule1d g = gauss_legendre(n);
  Rule2d r;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double u = g.points[a];
      const double v = g.points[b];
      r.points.emplace_back(u, v * (1.0 - u));
      r.weights.push_back(g.weights[a] * g.weights[b] * (1.0 - u));
    }
  }
  return r;
}

struct Rule3d {
  std::vector<Vec3> points;     // reference prism: triangle x [0, 1]
  std::vector<double> weights;  // sum to 1/2
};

/// Tensor rule on the reference prism.
inline Rule3d prism_rule(int tri_degree, int z_points) {
  const Rule2d t = triangle_rule(tri_degree);
  const Rule1d z = gauss_legendre(z_points);
  Rule3d r;
  for (std::size_t a = 0; a < z.points.size(); ++a)
    for (std::size_t q = 0; q < t.points.size(); ++q) {
      r.points.emplace_back(t.points[q].x(), t.points[q].y(), z.points[a]);
      r.weights.push_back(t.weights[q] * z.weights[a]);
    }
  return r;
}

}  // namespace anisoheat
