#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary.

#include <cmath>

#include "anisoheat/assembly.hpp"
#include "test_helpers.hpp"

namespace anisoheat::testing {

/// max |B1 + B2^T| / max |B1| for the independently assembled transport loops.
inline double adjointness_defect(const DgSpace& s, const MagneticField& B) {
  const auto B1 = assemble_transport_trial_upwind(s, B);
  auto B2t = transpose(assemble_transport_test_upwind(s, B));
  B2t.scale(-1.0);
  if (!B1.same_pattern(B2t)) return INFINITY;
  double mx = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < B1.values().size(); ++i) {
    mx = std::max(mx, std::abs(B1.values()[i]));
    diff = std::max(diff, std::abs(B1.values()[i] - B2t.values()[i]));
  }
  return diff / mx;
}

/// Both sides of the discrete L2 and total-energy balances of the purely
/// anisotropic semi-discrete system (kappa_perp = 0, no source).
struct EnergyBalance {
  double l2_lhs = 0.0, l2_rhs = 0.0, l2_scale = 0.0;
  double total_lhs = 0.0, total_rhs = 0.0, total_scale = 0.0;

  double l2_defect() const { return std::abs(l2_lhs - l2_rhs) / l2_scale; }
  double total_defect() const { return std::abs(total_lhs - total_rhs) / total_scale; }
};

inline EnergyBalance energy_balance(const DgSpace& s, const MagneticField& B, double kappa_delta, double kappa_bc,
                                    double dt, std::uint64_t seed) {
  const Eigen::Index n = s.num_dofs();
  const double skd = std::sqrt(kappa_delta);
  const FieldVector T(s, random_vector(n, seed));
  const FieldVector zeta_in(s, random_vector(n, seed + 1));
  const auto T_bc = [](const Vec3& x) { return 1.0 + 0.5 * std::sin(3.0 * x.x()) * std::cos(2.0 * x.y()) + 0.1 * x.z(); };

  ProblemData pd;
  pd.kappa_par = kappa_delta;
  pd.kappa_perp = 0.0;
  pd.kappa_bc = kappa_bc;
  pd.T_bc = [&](const Vec3& x, double) { return T_bc(x); };
  const LoadVectors F = assemble_rhs(s, B, pd, zeta_in, 0.0, dt);

  const auto M = assemble_mass(s);
  const auto Mbc = assemble_boundary_mass(s, FacetWeight::H);
  const auto A1 = assemble_transport_trial_upwind(s, B);
  const auto A2 = assemble_transport_test_upwind(s, B);

  // flux equation: M zeta + sqrt(kd) A2 T = F_zeta
  Vector r = F.F_zeta;
  A2.multiply_add(-skd, T.coeffs, r);
  const FieldVector zeta(s, block_diag_inverse(M) * r);

  // temperature equation right-hand side: M dT/dt = R
  Vector R = F.F_T;
  Mbc.multiply_add(-kappa_bc / dt, T.coeffs, R);
  A1.multiply_add(-skd, zeta.coeffs, R);

  EnergyBalance e;
  e.l2_lhs = T.coeffs.dot(R);
  e.total_lhs = R.sum();

  const double zMz = zeta.coeffs.dot(M * zeta.coeffs);
  e.l2_rhs = -zMz;
  e.l2_scale = zMz;

  const int nd = s.dofs_per_cell();
  auto trace = [&](const FieldVector& u, int cell, const FacetPoints& fp, int q, bool plus) {
    const Eigen::Index base = s.dof(cell, 0);
    double v = 0.0;
    for (int i = 0; i < nd; ++i) v += (plus ? fp.vp(q, i) : fp.vm(q, i)) * u.coeffs[base + i];
    return v;
  };
  FacetPoints fp;
  for (const Facet& Fc : s.mesh().facets()) {
    eval_facet(s, Fc, fp, false);
    for (int q = 0; q < fp.nq; ++q) {
      const double w = fp.w[q];
      if (Fc.boundary()) {
        const Vec3& x = fp.x_plus[q];
        const double bn = B.b(x, Fc.plus).dot(Fc.normal);
        const double kbc = kappa_bc * Fc.h / dt;
        const double Tq = trace(T, Fc.plus, fp, q, true), zq = trace(zeta, Fc.plus, fp, q, true);
        const double zi = trace(zeta_in, Fc.plus, fp, q, true), tb = T_bc(x);
        const double pen = kbc * Tq * (Tq - tb);
        const double in = bn < 0.0 ? skd * zi * bn : 0.0;
        const double out = bn > 0.0 ? skd * zq * bn : 0.0;
        e.l2_rhs += w * (-pen + in * Tq + out * tb);
        e.l2_scale += w * (std::abs(pen) + std::abs(in * Tq) + std::abs(out * tb));
        e.total_rhs += w * (out + in - kbc * (Tq - tb));
        e.total_scale += w * (std::abs(out) + std::abs(in) + kbc * (std::abs(Tq) + std::abs(tb)));
      } else {
        const double sp = B.b(fp.x_plus[q], Fc.plus).dot(Fc.normal);
        const double sm = B.b(fp.x_minus[q], Fc.minus).dot(Fc.normal);
        const double zu = sp > 0.0 ? trace(zeta, Fc.plus, fp, q, true) : trace(zeta, Fc.minus, fp, q, false);
        e.total_rhs += w * skd * (sp - sm) * zu;
        e.total_scale += w * skd * std::abs(sp) * std::abs(zu);
      }
    }
  }
  return e;
}

}  // namespace anisoheat::testing
