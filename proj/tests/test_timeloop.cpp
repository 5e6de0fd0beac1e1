#include <gtest/gtest.h>

#include <Eigen/SparseLU>
#include <numbers>

#include "anisoheat/problems.hpp"
#include "anisoheat/timeloop.hpp"
#include "test_helpers.hpp"

using namespace anisoheat;

namespace {

const double pi = std::numbers::pi;

double sinsin(const Vec3& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); }

struct Planar {
  PrismMesh mesh = PrismMesh::planar(build_base_mesh(7));
  DgSpace space{mesh, 2};
};

const Planar& planar() {
  static const Planar p;
  return p;
}

TransientSetup open_field_setup(double ratio) {
  TransientSetup s;
  s.space = &planar().space;
  s.B = OpenFieldProblem{}.field();
  s.pd.kappa_perp = 1.0;
  s.pd.kappa_par = ratio;
  s.pd.T_bc = [](const Vec3&, double) { return 0.0; };
  s.T_init = sinsin;
  return s;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(TimeLoop, ZeroDataGivesZeroTrajectory) {
  TransientSetup s = open_field_setup(1e3);
  s.T_init = [](const Vec3&) { return 0.0; };
  TimeLoopOptions opt;
  opt.n_steps = 5;
  for (Scheme sc : {Scheme::MixedDg, Scheme::PrimalDg}) {
    opt.scheme = sc;
    const auto res = run_transient(s, opt);
    EXPECT_TRUE(res.completed);
    ASSERT_EQ(res.steps.size(), 5u);
    EXPECT_EQ(res.T.coeffs.norm(), 0.0);
    EXPECT_EQ(res.zeta.coeffs.norm(), 0.0);
  }
}

TEST(TimeLoop, IsotropicLimitMatchesHeatEquationOracle) {
  // kappa_par = kappa_perp: the mixed scheme collapses to the IP heat equation.
  TransientSetup s = open_field_setup(1.0);
  const double kp = s.pd.kappa_perp;
  s.pd.source = [kp](const Vec3& x, double t) { return (1.0 + t) * 2.0 * pi * pi * kp * sinsin(x); };
  TimeLoopOptions opt;
  opt.dt = 1e-2;
  opt.n_steps = 3;
  const auto mixed = run_transient(s, opt);
  opt.scheme = Scheme::PrimalDg;
  const auto primal = run_transient(s, opt);

  const DgSpace& V = planar().space;
  const auto M = assemble_mass(V);
  const double c = 2.0 / opt.dt;
  const auto A = add(1.0, add(c, M, c * s.pd.kappa_bc, assemble_boundary_mass(V, FacetWeight::H)), kp,
                     assemble_ip_laplacian(V, s.pd.kappa_p));
  Eigen::SparseMatrix<double> S = A.to_eigen();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(S);
  Vector T = project(V, sinsin).coeffs;
  for (int n = 0; n < opt.n_steps; ++n) {
    const double tm = (n + 0.5) * opt.dt;
    Vector rhs = assemble_load(V, [&](const Vec3& x) { return s.pd.source(x, tm); });
    M.multiply_add(c, T, rhs);
    const Vector mid = lu.solve(rhs);
    T = 2.0 * mid - T;
  }
  EXPECT_LT(rel(mixed.T.coeffs, T), 1e-10);
  EXPECT_LT(rel(primal.T.coeffs, T), 1e-10);
  EXPECT_EQ(mixed.zeta.coeffs.norm(), 0.0);
}

TEST(TimeLoop, AirStepMatchesDirectStep) {
  for (double ratio : {1e3, 1e6}) {
    const TransientSetup s = open_field_setup(ratio);
    TimeLoopOptions opt;
    opt.n_steps = 1;
    opt.solver.outer_tol = 1e-10;
    MixedDgStepper direct(s, opt);
    opt.strategy = Strategy::Air;
    MixedDgStepper air(s, opt);
    direct.step();
    const auto rec = air.step();
    EXPECT_TRUE(rec.converged);
    EXPECT_GT(rec.outer_iterations, 0);
    EXPECT_LT(rel(air.state().T.coeffs, direct.state().T.coeffs), 1e-6) << ratio;
    EXPECT_LT(rel(air.state().zeta.coeffs, direct.state().zeta.coeffs), 1e-6) << ratio;
    EXPECT_NEAR(air.state().t, 1e-3, 1e-15);
    EXPECT_EQ(air.state().n, 1);
  }
}

TEST(TimeLoop, SteadyHelicalStatePreserved) {
  const HelicalProblem hp;
  const auto mesh = PrismMesh::extrude(build_base_mesh(7), 2, hp.Lz, true);
  const DgSpace V(mesh, 2);
  TransientSetup s;
  s.space = &V;
  s.B = hp.field();
  s.pd = hp.data(1e3, 1.0);
  s.T_init = HelicalProblem::T0;
  s.grad_T_init = HelicalProblem::grad_T0;
  s.exact = [](const Vec3& x, double) { return HelicalProblem::T0(x); };
  TimeLoopOptions opt;
  const double e0 = l2_error(project(V, HelicalProblem::T0), HelicalProblem::T0);
  auto check = [&](auto& stepper, const char* name) {
    std::vector<double> inc;
    double emax = 0.0;
    for (int n = 0; n < 100; ++n) {
      const Vector prev = stepper.state().T.coeffs;
      const auto rec = stepper.step();
      inc.push_back((stepper.state().T.coeffs - prev).norm() / prev.norm());
      emax = std::max(emax, rec.error);
    }
    // the discrete state relaxes towards the discrete steady state
    EXPECT_LT(inc.front(), 10.0 * e0) << name;
    EXPECT_LT(inc.back(), inc.front()) << name;
    EXPECT_LT(emax, 0.05) << name;
  };
  MixedDgStepper mixed(s, opt);
  check(mixed, "mixed-dg");
  PrimalDgStepper primal(s, opt);
  check(primal, "primal-dg");
}

TEST(TimeLoop, MidpointIsSecondOrderInTime) {
  // Neumann data keeps the operator independent of dt, isolating the time error.
  TransientSetup s;
  s.space = &planar().space;
  s.B = OpenFieldProblem{}.field();
  s.pd.kappa_perp = 1.0;
  s.pd.kappa_par = 1.0;
  s.pd.bc = BoundaryKind::Neumann;
  s.T_init = [](const Vec3& x) { return 1.0 + std::cos(pi * x.x()) * std::cos(pi * x.y()); };
  const double t_end = 0.08;
  auto run = [&](int steps) {
    TimeLoopOptions opt;
    opt.dt = t_end / steps;
    opt.n_steps = steps;
    return run_transient(s, opt).T.coeffs;
  };
  const Vector ref = run(512);
  const double e1 = (run(4) - ref).norm();
  const double e2 = (run(8) - ref).norm();
  const double e3 = (run(16) - ref).norm();
  EXPECT_NEAR(e1 / e2, 4.0, 0.5);
  EXPECT_NEAR(e2 / e3, 4.0, 0.5);
}

TEST(TimeLoop, NeumannUniformTemperatureIsSteady) {
  TransientSetup s;
  s.space = &planar().space;
  s.B = OpenFieldProblem{}.field();
  s.pd.kappa_perp = 1.0;
  s.pd.kappa_par = 1e6;
  s.pd.bc = BoundaryKind::Neumann;
  s.T_init = [](const Vec3&) { return 1.0; };
  TimeLoopOptions opt;
  opt.n_steps = 10;
  const auto res = run_transient(s, opt);
  ASSERT_TRUE(res.completed);
  EXPECT_LT((res.T.coeffs - project(planar().space, s.T_init).coeffs).cwiseAbs().maxCoeff(), 1e-10);
  // zeta carries the factor sqrt(kappa_delta)
  EXPECT_LT(res.zeta.coeffs.cwiseAbs().maxCoeff(), 1e-10 * std::sqrt(s.pd.kappa_delta()));
}

TEST(TimeLoop, ReducersAverageTheRightSteps) {
  TransientResult r;
  for (int i = 1; i <= 6; ++i) {
    StepRecord s;
    s.step = i;
    s.outer_iterations = i;
    s.inner_first = 10 * i;
    s.inner_second = 100 * i;
    s.wall_time = 0.5 * i;
    s.error = i;
    r.steps.push_back(s);
  }
  const auto a = r.averages(2, 5);
  EXPECT_EQ(a.count, 4);
  EXPECT_DOUBLE_EQ(a.outer, 3.5);
  EXPECT_DOUBLE_EQ(a.inner_first, 35.0);
  EXPECT_DOUBLE_EQ(a.inner_second, 350.0);
  EXPECT_DOUBLE_EQ(a.inner_total, 385.0);
  EXPECT_DOUBLE_EQ(a.wall_time, 1.75);
  EXPECT_DOUBLE_EQ(r.final_error(), 5.5);
}

TEST(TimeLoop, PrimalRejectsNeumann) {
  TransientSetup s = open_field_setup(10.0);
  s.pd.bc = BoundaryKind::Neumann;
  TimeLoopOptions opt;
  opt.scheme = Scheme::PrimalDg;
  EXPECT_THROW(run_transient(s, opt), Error);
  EXPECT_EQ(parse_scheme("mixed-dg"), Scheme::MixedDg);
  EXPECT_THROW(parse_scheme("cg"), Error);
}
