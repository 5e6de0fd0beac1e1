#pragma once

// Largest eigenvalues of the transport-preconditioned Schur complement
// components, made symmetric by the exact cell-wise mass similarity
//   x -> M^{1/2} (sqrt(kd) G^T)^{-1} X (sqrt(kd) G)^{-1} M^{1/2} x,
// with X the mass part, the diffusion part, or their sum.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "anisoheat/blocksolve.hpp"

namespace anisoheat {

enum class SchurComponent { Mass, Diffusion, Full };

inline std::string to_string(SchurComponent c) {
  switch (c) {
    case SchurComponent::Mass: return "mass";
    case SchurComponent::Diffusion: return "diffusion";
    case SchurComponent::Full: return "full";
  }
  return "?";
}

/// Per-block M^{1/2} and M^{-1/2} from dense symmetric eigendecompositions.
struct MassRoots {
  BlockDiagonal sqrt_M;
  BlockDiagonal inv_sqrt_M;

  explicit MassRoots(const BlockCsrMatrix& M) : sqrt_M(block_diagonal(M)), inv_sqrt_M(block_diagonal(M)) {
    for (int i = 0; i < M.block_rows(); ++i) {
      const DenseMatrix blk = sqrt_M.block(i);
      const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(blk);
      if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0))
        throw Error("MassRoots: mass block " + std::to_string(i) + " is not positive definite");
      const Vector s = es.eigenvalues().cwiseSqrt();
      sqrt_M.block(i) = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
      inv_sqrt_M.block(i) = es.eigenvectors() * s.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    }
  }
};

/// Symmetrized preconditioned Schur component of one assembled system.
class SymmetrizedOperator {
 public:
  SymmetrizedOperator(const AssembledSystem& sys, const BlockCsrMatrix& M, SchurComponent comp)
      : sys_(&sys), roots_(M), action_(sys), comp_(comp) {}

  Eigen::Index size() const { return sys_->n(); }
  SchurComponent component() const noexcept { return comp_; }
  void set_component(SchurComponent c) noexcept { comp_ = c; }

  void apply(const Vector& x, Vector& y) const {
    // (sqrt(kd) G)^{-1} M M^{-1/2} x = (sqrt(kd) G)^{-1} M^{1/2} x
    const Vector w = action_.solve_G(roots_.sqrt_M * x);
    Vector v;
    switch (comp_) {
      case SchurComponent::Mass: v = sys_->TT_mass * w; break;
      case SchurComponent::Diffusion: v = sys_->TT_diff * w; break;
      case SchurComponent::Full: v = sys_->TT_mass * w + sys_->TT_diff * w; break;
    }
    y = roots_.sqrt_M * action_.solve_Gt(v);
  }

  /// max |<Ax,y> - <x,Ay>| / (||x|| ||y||) over random pairs.
  double symmetry_defect(int samples = 3, std::uint64_t seed = 1) const {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    Vector x(size()), y(size()), Ax, Ay;
    for (int s = 0; s < samples; ++s) {
      for (Eigen::Index i = 0; i < size(); ++i) {
        x[i] = nd(gen);
        y[i] = nd(gen);
      }
      apply(x, Ax);
      apply(y, Ay);
      worst = std::max(worst, std::abs(Ax.dot(y) - x.dot(Ay)) / (x.norm() * y.norm()));
    }
    return worst;
  }

 private:
  const AssembledSystem* sys_;
  MassRoots roots_;
  SchurAction action_;
  SchurComponent comp_;
};

struct EigenEstimate {
  double lambda = 0.0;
  double residual = 0.0;  // ||A v - lambda v||
  int iterations = 0;
  bool converged = false;
};

/// Lanczos with full reorthogonalization; stops when the Ritz residual of the
/// largest Ritz value satisfies residual <= tol * |lambda|.
inline EigenEstimate largest_eigenvalue(const std::function<void(const Vector&, Vector&)>& A, Eigen::Index n,
                                        double tol = 1e-8, int max_lanczos = 300, std::uint64_t seed = 0) {
  if (n <= 0) throw Error("largest_eigenvalue: empty operator");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Vector q(n);
  for (Eigen::Index i = 0; i < n; ++i) q[i] = nd(gen);
  q.normalize();
  const int kmax = static_cast<int>(std::min<Eigen::Index>(max_lanczos, n));
  DenseMatrix Q(n, kmax);
  std::vector<double> alpha, beta;
  EigenEstimate est;
  Vector w(n);
  for (int k = 0; k < kmax; ++k) {
    Q.col(k) = q;
    A(q, w);
    const double a = q.dot(w);
    alpha.push_back(a);
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
    const double b = w.norm();

    DenseMatrix T = DenseMatrix::Zero(k + 1, k + 1);
    for (int i = 0; i <= k; ++i) {
      T(i, i) = alpha[i];
      if (i < k) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    const Eigen::SelfAdjointEigenSolver<DenseMatrix> es(T);
    const Eigen::Index top = k;  // eigenvalues ascending
    est.lambda = es.eigenvalues()[top];
    est.residual = b * std::abs(es.eigenvectors()(k, top));
    est.iterations = k + 1;
    if (est.residual <= tol * std::abs(est.lambda) || b <= 1e-14 * std::abs(est.lambda)) {
      est.converged = true;
      break;
    }
    beta.push_back(b);
    q = w / b;
  }
  return est;
}

inline EigenEstimate largest_eigenvalue(const SymmetrizedOperator& op, double tol = 1e-8, int max_lanczos = 300,
                                        std::uint64_t seed = 0) {
  return largest_eigenvalue([&op](const Vector& x, Vector& y) { op.apply(x, y); }, op.size(), tol, max_lanczos,
                            seed);
}

/// One row of the eigenvalue tables.
struct EigsRow {
  std::string geometry;  // "2d" or "3d"
  int refinement = 0;
  double dt = 0.0;
  double ratio = 0.0;
  bool boundary_mass = true;
  SchurComponent component = SchurComponent::Mass;
  EigenEstimate estimate;
};

struct EigsSettings {
  std::vector<double> dts{1e-3, 1e-2};
  std::vector<double> ratios{1e3, 1e6, 1e9};
  std::vector<bool> boundary_mass{true, false};
  double kappa_perp = 1.0;
  double kappa_bc = 20.0;
  double kappa_p = kDefaultInteriorPenalty;
  double tol = 1e-8;
  int max_lanczos = 300;
  std::uint64_t seed = 0;
};

/// Eigenvalue table on one space: dt x ratio x boundary-mass x component. The
/// mass part uses the midpoint scaling 2/dt.
inline std::vector<EigsRow> eigs_table(const DgSpace& space, const MagneticField& B, const std::string& geometry,
                                       int refinement, const EigsSettings& s) {
  const AssembledOperators ops = assemble_operators(space, B, s.kappa_p);
  std::vector<EigsRow> rows;
  for (bool with_bc : s.boundary_mass) {
    for (double dt : s.dts) {
      for (double ratio : s.ratios) {
        SystemParams p;
        p.kappa_perp = s.kappa_perp;
        p.kappa_par = ratio * s.kappa_perp;
        p.kappa_bc = s.kappa_bc;
        p.mass_coeff = 2.0 / dt;
        p.include_boundary_mass = with_bc;
        const AssembledSystem sys = build_system(ops, p);
        SymmetrizedOperator op(sys, ops.M, SchurComponent::Mass);
        for (SchurComponent c : {SchurComponent::Mass, SchurComponent::Diffusion, SchurComponent::Full}) {
          if (!with_bc && c != SchurComponent::Mass) continue;
          op.set_component(c);
          EigsRow r;
          r.geometry = geometry;
          r.refinement = refinement;
          r.dt = dt;
          r.ratio = ratio;
          r.boundary_mass = with_bc;
          r.component = c;
          r.estimate = largest_eigenvalue(op, s.tol, s.max_lanczos, s.seed);
          rows.push_back(r);
        }
      }
    }
  }
  return rows;
}

/// CSV: geometry,refinement,dt,ratio,boundary_mass,component,lambda_max,residual,iterations,converged
inline void write_eigs_csv(const std::vector<EigsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "geometry,refinement,dt,ratio,boundary_mass,component,lambda_max,residual,iterations,converged\n";
  out << std::setprecision(10);
  for (const auto& r : rows)
    out << r.geometry << "," << r.refinement << "," << r.dt << "," << r.ratio << "," << (r.boundary_mass ? 1 : 0)
        << "," << to_string(r.component) << "," << r.estimate.lambda << "," << r.estimate.residual << ","
        << r.estimate.iterations << "," << (r.estimate.converged ? 1 : 0) << "\n";
}

}  // namespace anisoheat
