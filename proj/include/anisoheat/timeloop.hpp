#pragma once

// Implicit midpoint time stepping for the mixed and primal DG schemes.
//
// A step solves for the midpoint state with mass scaling 2/dt and
// extrapolates T^{n+1} = 2 T^{n+1/2} - T^n. The flux at the new time level is
// recovered from the zeta-equation, A_zz zeta^{n+1} = F_z(t^{n+1}) - A_zT T^{n+1},
// and becomes the lagged boundary guess for the next step.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "anisoheat/blocksolve.hpp"

namespace anisoheat {

enum class Scheme { MixedDg, PrimalDg };

inline Scheme parse_scheme(const std::string& s) {
  if (s == "mixed-dg") return Scheme::MixedDg;
  if (s == "primal-dg") return Scheme::PrimalDg;
  throw Error("unknown scheme '" + s + "' (expected mixed-dg or primal-dg)");
}

inline std::string to_string(Scheme s) { return s == Scheme::MixedDg ? "mixed-dg" : "primal-dg"; }

/// Everything that defines a transient problem on a fixed space.
struct TransientSetup {
  const DgSpace* space = nullptr;
  MagneticField B;
  ProblemData pd;
  ScalarFunction T_init;
  std::function<Vec3(const Vec3&)> grad_T_init;  // analytic gradient, for the initial flux
  TimeFunction exact;                             // optional reference solution
};

struct TimeLoopOptions {
  Scheme scheme = Scheme::MixedDg;
  double dt = 1e-3;
  int n_steps = 100;
  Strategy strategy = Strategy::Direct;
  BlockSolverOptions solver;
  double kappa_p_aniso = 10.0;
  bool stop_on_failure = true;
};

struct StepRecord {
  int step = 0;
  double time = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
  int outer_iterations = 0;
  long inner_first = 0;
  long inner_second = 0;
  double wall_time = 0.0;
  bool converged = true;
};

struct TimeState {
  double t = 0.0;
  int n = 0;
  FieldVector T;
  FieldVector zeta;
  FieldVector guess;  // lagged inflow flux (Dirichlet) or outflow temperature (Neumann)
};

/// Raised when a step's linear solve does not converge.
class StepFailure : public ConvergenceError {
 public:
  StepFailure(int step, const std::string& what)
      : ConvergenceError("time step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class MixedDgStepper {
 public:
  MixedDgStepper(const TransientSetup& setup, const TimeLoopOptions& opt) : setup_(setup), opt_(opt) {
    setup_.pd.validate();
    const DgSpace& space = *setup_.space;
    ops_ = assemble_operators(space, setup_.B, setup_.pd.kappa_p, setup_.pd.bc);
    SystemParams sp;
    sp.kappa_par = setup_.pd.kappa_par;
    sp.kappa_perp = setup_.pd.kappa_perp;
    sp.kappa_bc = setup_.pd.kappa_bc;
    sp.mass_coeff = 2.0 / opt.dt;
    sp.kind = setup_.pd.bc;
    sys_ = build_system(ops_, sp);
    solver_ = make_block_solver(opt.strategy, sys_, opt.solver);
    zz_inv_ = block_diag_inverse(sys_.A_zz);

    state_.T = project(space, setup_.T_init);
    const double skd = std::sqrt(setup_.pd.kappa_delta());
    if (setup_.grad_T_init && skd > 0.0) {
      const MagneticField& B = setup_.B;
      const auto& grad = setup_.grad_T_init;
      state_.zeta = project(space, [&](const Vec3& x) { return skd * B.b(x).dot(grad(x)); });
    } else {
      state_.zeta = FieldVector(space);
    }
    state_.guess = setup_.pd.bc == BoundaryKind::Dirichlet ? state_.zeta : state_.T;
  }
  MixedDgStepper(const MixedDgStepper&) = delete;
  MixedDgStepper& operator=(const MixedDgStepper&) = delete;

  const TimeState& state() const { return state_; }
  const AssembledSystem& system() const { return sys_; }
  const AssembledOperators& operators() const { return ops_; }
  BlockSolver& solver() { return *solver_; }

  /// Load vectors of the midpoint system for the current state.
  LoadVectors midpoint_loads() const {
    const double dt_eff = 0.5 * opt_.dt;
    LoadVectors f = assemble_rhs(*setup_.space, setup_.B, setup_.pd, state_.guess, state_.t + dt_eff, dt_eff);
    ops_.M.multiply_add(1.0 / dt_eff, state_.T.coeffs, f.F_T);
    return f;
  }

  StepRecord step() {
    const auto t0 = std::chrono::steady_clock::now();
    const LoadVectors f = midpoint_loads();
    BlockSolution sol = solver_->solve(f.F_T, f.F_zeta);
    StepRecord rec;
    rec.step = state_.n + 1;
    rec.outer_iterations = sol.outer.iterations;
    rec.inner_first = sol.inner_first;
    rec.inner_second = sol.inner_second;
    rec.converged = sol.converged();
    last_ = sol;

    const DgSpace& space = *setup_.space;
    Vector Tn1 = 2.0 * sol.T - state_.T.coeffs;
    state_.t = (state_.n + 1) * opt_.dt;
    state_.n += 1;
    state_.T = FieldVector(space, std::move(Tn1));
    // flux at the new time level from the zeta-equation
    const LoadVectors fe = assemble_rhs(space, setup_.B, setup_.pd, state_.guess, state_.t, 0.5 * opt_.dt);
    Vector rz = fe.F_zeta;
    sys_.A_zT.multiply_add(-1.0, state_.T.coeffs, rz);
    state_.zeta = FieldVector(space, zz_inv_ * rz);
    state_.guess = setup_.pd.bc == BoundaryKind::Dirichlet ? state_.zeta : state_.T;
    if (setup_.exact) {
      const double t = state_.t;
      const auto& ex = setup_.exact;
      rec.error = l2_error(state_.T, [&](const Vec3& x) { return ex(x, t); });
    }
    rec.time = state_.t;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

  const BlockSolution& last_solution() const { return last_; }

 private:
  TransientSetup setup_;
  TimeLoopOptions opt_;
  AssembledOperators ops_;
  AssembledSystem sys_;
  std::unique_ptr<BlockSolver> solver_;
  BlockDiagonal zz_inv_;
  TimeState state_;
  BlockSolution last_;
};

/// Single-field scheme: kappa_perp IP Laplacian plus the symmetric interior
/// penalty anisotropic form, solved directly.
class PrimalDgStepper {
 public:
  PrimalDgStepper(const TransientSetup& setup, const TimeLoopOptions& opt) : setup_(setup), opt_(opt) {
    setup_.pd.validate();
    if (setup_.pd.bc != BoundaryKind::Dirichlet) throw Error("primal DG scheme supports Dirichlet boundaries only");
    const DgSpace& space = *setup_.space;
    M_ = assemble_mass(space);
    const double c = 2.0 / opt.dt;
    const auto Mbc = assemble_boundary_mass(space, FacetWeight::H);
    const auto L = assemble_ip_laplacian(space, setup_.pd.kappa_p);
    const auto IPb = assemble_primal_dg_aniso(space, setup_.B, setup_.pd.kappa_delta(), opt.kappa_p_aniso);
    A_ = add(1.0, add(c, M_, c * setup_.pd.kappa_bc, Mbc), 1.0, add(setup_.pd.kappa_perp, L, -1.0, IPb));
    Eigen::SparseMatrix<double> S = A_.to_eigen();
    S.makeCompressed();
    lu_.compute(S);
    if (lu_.info() != Eigen::Success) throw Error("primal DG: sparse LU factorization failed");
    state_.T = project(space, setup_.T_init);
    state_.zeta = FieldVector(space);
    state_.guess = FieldVector(space);
  }

  const TimeState& state() const { return state_; }
  const BlockCsrMatrix& matrix() const { return A_; }

  Vector midpoint_rhs() const {
    const double dt_eff = 0.5 * opt_.dt;
    const double t = state_.t + dt_eff;
    ProblemData pd = setup_.pd;
    LoadVectors f = assemble_rhs(*setup_.space, setup_.B, pd, FieldVector(*setup_.space), t, dt_eff);
    ScalarFunction Tbc;
    if (pd.T_bc) Tbc = [&pd, t](const Vec3& x) { return pd.T_bc(x, t); };
    f.F_T += assemble_primal_aniso_rhs(*setup_.space, setup_.B, pd.kappa_delta(), Tbc, opt_.kappa_p_aniso);
    M_.multiply_add(1.0 / dt_eff, state_.T.coeffs, f.F_T);
    return f.F_T;
  }

  StepRecord step() {
    const auto t0 = std::chrono::steady_clock::now();
    const Vector mid = lu_.solve(midpoint_rhs());
    StepRecord rec;
    rec.step = state_.n + 1;
    state_.n += 1;
    state_.t = state_.n * opt_.dt;
    state_.T = FieldVector(*setup_.space, 2.0 * mid - state_.T.coeffs);
    if (setup_.exact) {
      const double t = state_.t;
      const auto& ex = setup_.exact;
      rec.error = l2_error(state_.T, [&](const Vec3& x) { return ex(x, t); });
    }
    rec.time = state_.t;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

 private:
  TransientSetup setup_;
  TimeLoopOptions opt_;
  BlockCsrMatrix M_;
  BlockCsrMatrix A_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  TimeState state_;
};

struct TransientResult {
  std::vector<StepRecord> steps;
  FieldVector T;
  FieldVector zeta;
  bool completed = true;
  std::string failure;

  /// Error averaged over the last two steps.
  double final_error() const {
    if (steps.size() < 2) return steps.empty() ? std::numeric_limits<double>::quiet_NaN() : steps.back().error;
    return 0.5 * (steps[steps.size() - 1].error + steps[steps.size() - 2].error);
  }

  struct Averages {
    double outer = 0.0;
    double inner_first = 0.0;
    double inner_second = 0.0;
    double inner_total = 0.0;
    double wall_time = 0.0;
    int count = 0;
  };

  /// Means over steps first..last (1-based, inclusive), e.g. 2..5.
  Averages averages(int first = 2, int last = 5) const {
    Averages a;
    for (const auto& s : steps) {
      if (s.step < first || s.step > last) continue;
      a.outer += s.outer_iterations;
      a.inner_first += s.inner_first;
      a.inner_second += s.inner_second;
      a.wall_time += s.wall_time;
      ++a.count;
    }
    if (a.count > 0) {
      a.outer /= a.count;
      a.inner_first /= a.count;
      a.inner_second /= a.count;
      a.wall_time /= a.count;
    }
    a.inner_total = a.inner_first + a.inner_second;
    return a;
  }
};

/// Runs n_steps of the chosen scheme. on_step is called after each step.
inline TransientResult run_transient(const TransientSetup& setup, const TimeLoopOptions& opt,
                                     const std::function<void(const StepRecord&)>& on_step = {}) {
  TransientResult res;
  auto loop = [&](auto& stepper) {
    for (int i = 0; i < opt.n_steps; ++i) {
      StepRecord rec = stepper.step();
      res.steps.push_back(rec);
      if (on_step) on_step(rec);
      if (!rec.converged) {
        res.completed = false;
        res.failure = "solver did not converge at step " + std::to_string(rec.step);
        if (opt.stop_on_failure) break;
      }
    }
    res.T = stepper.state().T;
    res.zeta = stepper.state().zeta;
  };
  if (opt.scheme == Scheme::MixedDg) {
    MixedDgStepper s(setup, opt);
    loop(s);
  } else {
    PrimalDgStepper s(setup, opt);
    loop(s);
  }
  return res;
}

}  // namespace anisoheat
