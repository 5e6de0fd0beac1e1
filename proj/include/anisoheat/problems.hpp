#pragma once

// Analytic test configurations.

#include <cmath>
#include <numbers>

#include "anisoheat/assembly.hpp"

namespace anisoheat {

/// Steady helical-field problem on [0,1]^2 x [0,Lz], periodic in z:
/// T0 = sin(pi x) sin(pi y), B = (-dT0/dy, dT0/dx, Bz), S = -kappa_perp Lap T0.
struct HelicalProblem {
  double Bz = 5.0;
  double Lz = 5.0;

  static double T0(const Vec3& x) {
    return std::sin(std::numbers::pi * x.x()) * std::sin(std::numbers::pi * x.y());
  }
  static Vec3 grad_T0(const Vec3& x) {
    const double pi = std::numbers::pi;
    return Vec3(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()), 0.0);
  }
  MagneticField field() const {
    const double bz = Bz;
    return MagneticField([bz](const Vec3& x) {
      const Vec3 g = grad_T0(x);
      return Vec3(-g.y(), g.x(), bz);
    });
  }
  ProblemData data(double kappa_par, double kappa_perp) const {
    ProblemData pd;
    pd.kappa_par = kappa_par;
    pd.kappa_perp = kappa_perp;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    pd.source = [kappa_perp, pi2](const Vec3& x, double) { return 2.0 * pi2 * kappa_perp * T0(x); };
    pd.T_bc = [](const Vec3&, double) { return 0.0; };
    return pd;
  }
};

/// Open-field-line problem: T0 = 1 + (1 - cos 2 pi y) sin(pi x) / 20 + x + y / 10,
/// B = (-dT0/dy, dT0/dx, Bz), S = 0, T_BC = T0.
struct OpenFieldProblem {
  double Bz = 7.5;
  double Lz = 5.0;

  static double T0(const Vec3& x) {
    const double pi = std::numbers::pi;
    return 1.0 + (1.0 - std::cos(2.0 * pi * x.y())) * std::sin(pi * x.x()) / 20.0 + x.x() + x.y() / 10.0;
  }
  static Vec3 grad_T0(const Vec3& x) {
    const double pi = std::numbers::pi;
    const double dx = (1.0 - std::cos(2.0 * pi * x.y())) * pi * std::cos(pi * x.x()) / 20.0 + 1.0;
    const double dy = 2.0 * pi * std::sin(2.0 * pi * x.y()) * std::sin(pi * x.x()) / 20.0 + 0.1;
    return Vec3(dx, dy, 0.0);
  }
  MagneticField field() const {
    const double bz = Bz;
    return MagneticField([bz](const Vec3& x) {
      const Vec3 g = grad_T0(x);
      return Vec3(-g.y(), g.x(), bz);
    });
  }
  /// In-plane field (B_x, B_y, 0) for the planar mesh.
  MagneticField planar_field() const {
    return MagneticField([](const Vec3& x) {
      const Vec3 g = grad_T0(x);
      return Vec3(-g.y(), g.x(), 0.0);
    });
  }
  ProblemData data(double kappa_par, double kappa_perp) const {
    ProblemData pd;
    pd.kappa_par = kappa_par;
    pd.kappa_perp = kappa_perp;
    pd.T_bc = [](const Vec3& x, double) { return T0(x); };
    return pd;
  }
};

}  // namespace anisoheat
