#pragma once

// The 2x2 block system for (T, zeta) and its solution strategies.
//
// Standard ordering (rows T-equation, zeta-equation):
//   [ A_TT  A_Tz ] [T   ]   [F_T]
//   [ A_zT  A_zz ] [zeta] = [F_z]
// with A_Tz = sqrt(kd) G^T, A_zT = -sqrt(kd) G. The swapped ordering puts the
// zeta-equation first, which makes the diagonal blocks the transport operators.

#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include <Eigen/SparseLU>

#include "anisoheat/amg.hpp"
#include "anisoheat/assembly.hpp"
#include "anisoheat/krylov.hpp"

namespace anisoheat {

struct SystemParams {
  double kappa_par = 1.0;
  double kappa_perp = 1.0;
  double kappa_bc = 20.0;
  double mass_coeff = 1.0;  // multiplies M (+ kappa_bc M_BC); 1/dt_eff, 0 for steady
  BoundaryKind kind = BoundaryKind::Dirichlet;
  bool include_boundary_mass = true;
};

struct AssembledSystem {
  BlockCsrMatrix TT_mass;  // mass_coeff (M + kappa_bc M_BC_he), or mass_coeff M for Neumann
  BlockCsrMatrix TT_diff;  // kappa_perp L
  BlockCsrMatrix A_TT;
  BlockCsrMatrix A_Tz;
  BlockCsrMatrix A_zT;
  BlockCsrMatrix A_zz;
  BlockCsrMatrix G;  // unscaled transport
  double kappa_delta = 0.0;
  double kappa_perp = 0.0;
  double mass_coeff = 0.0;

  Eigen::Index n() const { return A_TT.rows(); }

  /// Standard-ordering residual operator.
  void apply(const Vector& T, const Vector& z, Vector& yT, Vector& yz) const {
    yT = A_TT * T;
    A_Tz.multiply_add(1.0, z, yT);
    yz = A_zT * T;
    A_zz.multiply_add(1.0, z, yz);
  }

  /// Full matrix in the standard ordering.
  Eigen::SparseMatrix<double> to_eigen() const {
    const Eigen::Index m = n();
    std::vector<Eigen::Triplet<double>> trip;
    auto put = [&](const BlockCsrMatrix& A, Eigen::Index r0, Eigen::Index c0) {
      const Eigen::SparseMatrix<double> S = A.to_eigen();
      for (int k = 0; k < S.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(S, k); it; ++it)
          trip.emplace_back(r0 + it.row(), c0 + it.col(), it.value());
    };
    put(A_TT, 0, 0);
    put(A_Tz, 0, m);
    put(A_zT, m, 0);
    put(A_zz, m, m);
    Eigen::SparseMatrix<double> S(2 * m, 2 * m);
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
  }
};

inline AssembledSystem build_system(const AssembledOperators& ops, const SystemParams& p) {
  if (!(p.kappa_perp >= 0.0) || !(p.kappa_par >= p.kappa_perp))
    throw Error("build_system: need kappa_par >= kappa_perp >= 0");
  AssembledSystem s;
  s.kappa_delta = p.kappa_par - p.kappa_perp;
  s.kappa_perp = p.kappa_perp;
  s.mass_coeff = p.mass_coeff;
  const double skd = std::sqrt(s.kappa_delta);
  const double kbc = p.include_boundary_mass ? p.kappa_bc : 0.0;
  if (p.kind == BoundaryKind::Dirichlet) {
    s.TT_mass = add(p.mass_coeff, ops.M, p.mass_coeff * kbc, ops.M_BC_he);
    s.A_zz = ops.M;
  } else {
    s.TT_mass = ops.M;
    s.TT_mass.scale(p.mass_coeff);
    s.A_zz = add(1.0, ops.M, kbc, ops.M_BC_he);
  }
  s.TT_diff = ops.L;
  s.TT_diff.scale(p.kappa_perp);
  s.A_TT = add(1.0, s.TT_mass, 1.0, s.TT_diff);
  s.G = ops.G;
  s.A_zT = ops.G;
  s.A_zT.scale(-skd);
  s.A_Tz = transpose(s.A_zT);
  s.A_Tz.scale(-1.0);
  return s;
}

enum class Strategy { Air, SchurClassical, Direct };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "air") return Strategy::Air;
  if (s == "schur-classical") return Strategy::SchurClassical;
  if (s == "direct") return Strategy::Direct;
  throw Error("unknown solver strategy '" + s + "' (expected air, schur-classical or direct)");
}

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Air: return "air";
    case Strategy::SchurClassical: return "schur-classical";
    case Strategy::Direct: return "direct";
  }
  return "?";
}

struct BlockSolverOptions {
  double outer_tol = 1e-8;
  int max_outer = 10000;
  int max_inner = 1000;
  double inner_tol = 0.0;  // > 0 overrides the min(1e-3, 1e-3/||b||) policy
  bool upper_triangular = false;
  AmgParams amg;
};

struct BlockSolution {
  Vector T;
  Vector zeta;
  SolveStats outer;
  long inner_first = 0;   // AIR: -sqrt(kd) G solves; Schur: S solves
  long inner_second = 0;  // AIR: sqrt(kd) G^T solves
  int inner_solves = 0;
  bool inner_failed = false;
  long total_inner() const { return inner_first + inner_second; }
  bool converged() const { return outer.converged && !inner_failed; }
};

class BlockSolver {
 public:
  virtual ~BlockSolver() = default;
  virtual BlockSolution solve(const Vector& F_T, const Vector& F_z) = 0;
  virtual Strategy strategy() const = 0;
};

/// Sparse LU of the full system.
class DirectBlockSolver : public BlockSolver {
 public:
  explicit DirectBlockSolver(const AssembledSystem& sys) : n_(sys.n()) {
    A_ = sys.to_eigen();
    A_.makeCompressed();
    lu_.analyzePattern(A_);
    lu_.factorize(A_);
    if (lu_.info() != Eigen::Success) throw Error("direct solver: sparse LU factorization failed (" + lu_.lastErrorMessage() + ")");
  }

  BlockSolution solve(const Vector& F_T, const Vector& F_z) override {
    const auto t0 = std::chrono::steady_clock::now();
    Vector rhs(2 * n_);
    rhs << F_T, F_z;
    const Vector x = lu_.solve(rhs);
    BlockSolution out;
    out.T = x.head(n_);
    out.zeta = x.tail(n_);
    const double bn = rhs.norm();
    out.outer.abs_residual = (A_ * x - rhs).norm();
    out.outer.rel_residual = bn > 0.0 ? out.outer.abs_residual / bn : 0.0;
    out.outer.converged = true;
    out.outer.iterations = 0;
    out.outer.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }
  Strategy strategy() const override { return Strategy::Direct; }

 private:
  Eigen::Index n_;
  Eigen::SparseMatrix<double> A_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

/// FGMRES on the swapped system, preconditioned block-triangularly with
/// AIR-preconditioned GMRES inner solves for the two transport blocks.
class AirBlockSolver : public BlockSolver {
 public:
  AirBlockSolver(const AssembledSystem& sys, const BlockSolverOptions& opt) : sys_(&sys), opt_(opt) {
    if (!(sys.kappa_delta > 0.0))
      throw Error("AIR strategy needs kappa_par > kappa_perp (the transport blocks vanish otherwise)");
    skd_ = std::sqrt(sys.kappa_delta);
    amg_G_ = AmgHierarchy::build_air(sys.G, opt.amg);
    Gt_ = transpose(sys.G);
    amg_Gt_ = AmgHierarchy::build_air(Gt_, opt.amg);
  }

  const AmgHierarchy& hierarchy_G() const { return amg_G_; }
  const AmgHierarchy& hierarchy_Gt() const { return amg_Gt_; }

  /// Solve -sqrt(kd) G y = r.
  SolveStats solve_G(const Vector& r, Vector& y, double tol) const {
    const double s = -skd_;
    return solve_transport(sys_->G, amg_G_, s, r, y, tol);
  }
  /// Solve sqrt(kd) G^T y = r.
  SolveStats solve_Gt(const Vector& r, Vector& y, double tol) const {
    return solve_transport(Gt_, amg_Gt_, skd_, r, y, tol);
  }

  BlockSolution solve(const Vector& F_T, const Vector& F_z) override {
    const Eigen::Index n = sys_->n();
    BlockSolution out;
    // swapped rows: [A_zT A_zz; A_TT A_Tz] [T; z] = [F_z; F_T]
    LinearOperator A = [this, n](const Vector& x, Vector& y) {
      const Vector T = x.head(n), z = x.tail(n);
      Vector yT, yz;
      sys_->apply(T, z, yT, yz);
      y.resize(2 * n);
      y << yz, yT;
    };
    LinearOperator P = [this, n, &out](const Vector& r, Vector& y) {
      const Vector r1 = r.head(n), r2 = r.tail(n);
      Vector yT = Vector::Zero(n), yz = Vector::Zero(n);
      auto tol = [this](const Vector& b) { return opt_.inner_tol > 0.0 ? opt_.inner_tol : inner_tolerance(b.norm()); };
      auto record = [&out](const SolveStats& st, long& counter) {
        counter += st.iterations;
        ++out.inner_solves;
        out.outer.inner_iterations.push_back(st.iterations);
        if (!st.converged) out.inner_failed = true;
      };
      if (!opt_.upper_triangular) {
        record(solve_G(r1, yT, tol(r1)), out.inner_first);
        Vector rhs2 = r2;
        sys_->A_TT.multiply_add(-1.0, yT, rhs2);
        record(solve_Gt(rhs2, yz, tol(rhs2)), out.inner_second);
      } else {
        record(solve_Gt(r2, yz, tol(r2)), out.inner_second);
        Vector rhs1 = r1;
        sys_->A_zz.multiply_add(-1.0, yz, rhs1);
        record(solve_G(rhs1, yT, tol(rhs1)), out.inner_first);
      }
      y.resize(2 * n);
      y << yT, yz;
    };
    Vector b(2 * n);
    b << F_z, F_T;
    Vector x = Vector::Zero(2 * n);
    KrylovOptions ko;
    ko.tol_rel = opt_.outer_tol;
    ko.max_it = opt_.max_outer;
    SolveStats st = fgmres(A, P, b, x, ko);
    st.inner_iterations = std::move(out.outer.inner_iterations);
    out.outer = std::move(st);
    out.T = x.head(n);
    out.zeta = x.tail(n);
    return out;
  }
  Strategy strategy() const override { return Strategy::Air; }

 private:
  SolveStats solve_transport(const BlockCsrMatrix& Gm, const AmgHierarchy& h, double scale, const Vector& r,
                             Vector& y, double tol) const {
    LinearOperator op = [&Gm, scale](const Vector& x, Vector& out) {
      out = Gm * x;
      out *= scale;
    };
    LinearOperator pc = [&h, scale](const Vector& x, Vector& out) {
      out = h.apply(x);
      out /= scale;
    };
    KrylovOptions ko;
    ko.tol_rel = tol;
    ko.max_it = opt_.max_inner;
    y = Vector::Zero(r.size());
    return gmres_right(op, pc, r, y, ko);
  }

  const AssembledSystem* sys_;
  BlockSolverOptions opt_;
  double skd_ = 0.0;
  BlockCsrMatrix Gt_;
  AmgHierarchy amg_G_;
  AmgHierarchy amg_Gt_;
};

/// FGMRES on the standard ordering with an upper block-triangular
/// preconditioner: exact A_zz inverse and an assembled Schur complement
/// S = A_TT - A_Tz A_zz^{-1} A_zT solved by CG with classical AMG.
class SchurClassicalBlockSolver : public BlockSolver {
 public:
  SchurClassicalBlockSolver(const AssembledSystem& sys, const BlockSolverOptions& opt)
      : sys_(&sys), opt_(opt), zz_inv_(block_diag_inverse(sys.A_zz)) {
    const BlockCsrMatrix Zinv = zz_inv_.to_matrix();
    BlockCsrMatrix coupling = multiply(sys.A_Tz, multiply(Zinv, sys.A_zT));
    S_ = add(1.0, sys.A_TT, -1.0, coupling);
    amg_ = AmgHierarchy::build_classical(S_, opt.amg);
    S_scalar_ = to_scalar(S_);
  }

  const BlockCsrMatrix& schur() const { return S_; }
  const AmgHierarchy& hierarchy() const { return amg_; }

  BlockSolution solve(const Vector& F_T, const Vector& F_z) override {
    const Eigen::Index n = sys_->n();
    BlockSolution out;
    LinearOperator A = [this, n](const Vector& x, Vector& y) {
      const Vector T = x.head(n), z = x.tail(n);
      Vector yT, yz;
      sys_->apply(T, z, yT, yz);
      y.resize(2 * n);
      y << yT, yz;
    };
    LinearOperator P = [this, n, &out](const Vector& r, Vector& y) {
      const Vector r1 = r.head(n), r2 = r.tail(n);
      const Vector yz = zz_inv_ * r2;
      Vector rhs1 = r1;
      sys_->A_Tz.multiply_add(-1.0, yz, rhs1);
      Vector yT = Vector::Zero(n);
      LinearOperator Sop = [this](const Vector& x, Vector& o) { o = S_scalar_ * x; };
      LinearOperator pc = [this](const Vector& x, Vector& o) { o = amg_.apply(x); };
      KrylovOptions ko;
      ko.tol_rel = opt_.inner_tol > 0.0 ? opt_.inner_tol : inner_tolerance(rhs1.norm());
      ko.max_it = opt_.max_inner;
      const SolveStats st = cg(Sop, pc, rhs1, yT, ko);
      out.inner_first += st.iterations;
      ++out.inner_solves;
      out.outer.inner_iterations.push_back(st.iterations);
      if (!st.converged) out.inner_failed = true;
      y.resize(2 * n);
      y << yT, yz;
    };
    Vector b(2 * n);
    b << F_T, F_z;
    Vector x = Vector::Zero(2 * n);
    KrylovOptions ko;
    ko.tol_rel = opt_.outer_tol;
    ko.max_it = opt_.max_outer;
    SolveStats st = fgmres(A, P, b, x, ko);
    st.inner_iterations = std::move(out.outer.inner_iterations);
    out.outer = std::move(st);
    out.T = x.head(n);
    out.zeta = x.tail(n);
    return out;
  }
  Strategy strategy() const override { return Strategy::SchurClassical; }

 private:
  const AssembledSystem* sys_;
  BlockSolverOptions opt_;
  BlockDiagonal zz_inv_;
  BlockCsrMatrix S_;
  BlockCsrMatrix S_scalar_;
  AmgHierarchy amg_;
};

inline std::unique_ptr<BlockSolver> make_block_solver(Strategy s, const AssembledSystem& sys,
                                                      const BlockSolverOptions& opt = {}) {
  switch (s) {
    case Strategy::Air: return std::make_unique<AirBlockSolver>(sys, opt);
    case Strategy::SchurClassical: return std::make_unique<SchurClassicalBlockSolver>(sys, opt);
    case Strategy::Direct: return std::make_unique<DirectBlockSolver>(sys);
  }
  throw Error("make_block_solver: unknown strategy");
}

/// Action of the (2,2) Schur complement of the swapped system,
///   S22 x = A_Tz x - A_TT A_zT^{-1} A_zz x,
/// split into the mass part (from TT_mass) and the diffusion part (from
/// TT_diff). Transport solves use a sparse LU of G.
class SchurAction {
 public:
  struct Parts {
    Vector full;
    Vector mass;
    Vector diff;
  };

  explicit SchurAction(const AssembledSystem& sys) : sys_(&sys) {
    if (!(sys.kappa_delta > 0.0)) throw Error("SchurAction: needs kappa_delta > 0");
    Eigen::SparseMatrix<double> G = sys.G.to_eigen();
    G.makeCompressed();
    lu_.compute(G);
    if (lu_.info() != Eigen::Success)
      throw Error("SchurAction: transport matrix is singular; all field lines must be open");
    Eigen::SparseMatrix<double> Gt = G.transpose();
    Gt.makeCompressed();
    lut_.compute(Gt);
    if (lut_.info() != Eigen::Success) throw Error("SchurAction: transposed transport factorization failed");
    skd_ = std::sqrt(sys.kappa_delta);
  }

  /// (sqrt(kd) G)^{-1} v
  Vector solve_G(const Vector& v) const { return Vector(lu_.solve(v)) / skd_; }
  /// (sqrt(kd) G^T)^{-1} v
  Vector solve_Gt(const Vector& v) const { return Vector(lut_.solve(v)) / skd_; }

  Parts apply(const Vector& x) const {
    // -A_zT^{-1} = (sqrt(kd) G)^{-1}
    const Vector w = solve_G(sys_->A_zz * x);
    Parts p;
    p.mass = sys_->TT_mass * w;
    p.diff = sys_->TT_diff * w;
    p.full = sys_->A_Tz * x + p.mass + p.diff;
    return p;
  }

  const AssembledSystem& system() const { return *sys_; }

 private:
  const AssembledSystem* sys_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lut_;
  double skd_ = 1.0;
};

/// Convenience wrapper returning the three actions for one vector.
inline SchurAction::Parts apply_schur_action(const AssembledSystem& sys, const Vector& x) {
  return SchurAction(sys).apply(x);
}

}  // namespace anisoheat
