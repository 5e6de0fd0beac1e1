#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "anisoheat/config.hpp"
#include "anisoheat/experiments.hpp"

using namespace anisoheat;

TEST(Config, EmptyFileGivesDefaults) {
  const auto c = parse_config_string("");
  EXPECT_EQ(c.n, 7);
  EXPECT_EQ(c.geometry, "3d");
  EXPECT_EQ(c.ratios, (std::vector<double>{1e3, 1e6, 1e9}));
  EXPECT_EQ(c.solver.max_outer, 10000);
  EXPECT_DOUBLE_EQ(c.kappa_p, kDefaultInteriorPenalty);
}

TEST(Config, ParsesEverySection) {
  const auto c = parse_config_string(R"(
[mesh]
n = 5
Lz = 2.5
layers = 3
refine_layers = no
periodic_z = false
perturb = 0.1
seed = 4
refinements = 0, 2
geometry = 2d
[physics]
kappa_perp = 0.5
ratios = 1e2,1e4
dt = 1e-2
n_steps = 7
bc = neumann
kappa_bc = 10
[scheme]
schemes = primal-dg
[solver]
strategies = schur-classical, direct
outer_tol = 1e-9
max_outer = 50
upper_triangular = yes
time_cap = 60
[amg]
theta_C = 0.05
max_coarse = 10
[eigs]
dts = 1e-3
boundary_mass = without
max_lanczos = 40
[output]
dir = results
)");
  EXPECT_EQ(c.n, 5);
  EXPECT_DOUBLE_EQ(c.Lz, 2.5);
  EXPECT_EQ(c.layers, 3);
  EXPECT_FALSE(c.periodic_z);
  EXPECT_FALSE(c.refine_layers);
  EXPECT_EQ(c.mesh_seed, 4u);
  EXPECT_EQ(c.refinements, (std::vector<int>{0, 2}));
  EXPECT_EQ(c.geometry, "2d");
  EXPECT_DOUBLE_EQ(c.kappa_perp, 0.5);
  EXPECT_EQ(c.ratios, (std::vector<double>{1e2, 1e4}));
  EXPECT_EQ(c.n_steps, 7);
  EXPECT_EQ(c.bc, BoundaryKind::Neumann);
  EXPECT_EQ(c.schemes, (std::vector<Scheme>{Scheme::PrimalDg}));
  EXPECT_EQ(c.strategies, (std::vector<Strategy>{Strategy::SchurClassical, Strategy::Direct}));
  EXPECT_DOUBLE_EQ(c.solver.outer_tol, 1e-9);
  EXPECT_TRUE(c.solver.upper_triangular);
  EXPECT_DOUBLE_EQ(c.time_cap, 60.0);
  EXPECT_DOUBLE_EQ(c.solver.amg.theta_C, 0.05);
  EXPECT_EQ(c.solver.amg.max_coarse, 10);
  EXPECT_EQ(c.eig_boundary_mass, (std::vector<bool>{false}));
  EXPECT_EQ(c.eig_max_lanczos, 40);
  EXPECT_EQ(c.out_dir, "results");
}

TEST(Config, RejectsUnknownAndMalformedInput) {
  for (const char* text : {"[mesh]\nrefinement = 1\n", "[meshes]\nn = 3\n", "n = 3\n", "[mesh]\nn = three\n",
                           "[mesh]\nn = 2.5\n", "[mesh]\nperiodic_z = maybe\n", "[physics]\nbc = robin\n",
                           "[scheme]\nschemes = cg\n", "[solver]\nstrategies = ilu\n", "[mesh]\nrefinements = 9\n",
                           "[physics]\ndt = -1\n", "[mesh]\ngeometry = 1d\n", "[eigs]\nboundary_mass = some\n",
                           "[mesh\nn = 3\n"}) {
    EXPECT_THROW(parse_config_string(text), ConfigError) << text;
  }
  EXPECT_THROW(load_config("/nonexistent/config.ini"), ConfigError);
}

TEST(Experiments, MeshFollowsGeometryAndRefinement) {
  auto c = parse_config_string("[mesh]\nlayers = 2\n");
  EXPECT_EQ(make_mesh(c, 0).num_cells(), 98 * 2);
  EXPECT_EQ(make_mesh(c, 1).num_cells(), 392 * 4);
  c.refine_layers = false;
  EXPECT_EQ(make_mesh(c, 2).num_cells(), 1568 * 2);
  c.geometry = "2d";
  EXPECT_EQ(make_mesh(c, 1).num_cells(), 392);
}

TEST(Experiments, SteadyAnisotropicSolveIsTwoTransportSolves) {
  auto c = parse_config_string("[mesh]\nrefinements = 0\n[physics]\nkappa_perp = 0\nratios = 1e6\n");
  const auto rows = steady_aniso_study(c);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].converged);
  EXPECT_LE(rows[0].outer, 2);
  EXPECT_LT(rows[0].difference, 1e-6);
  EXPECT_LT(rows[0].residual, 1e-8);
}

TEST(Experiments, SolverStudyReportsAveragesAndCaps) {
  auto c = parse_config_string(
      "[mesh]\ngeometry = 2d\nrefinements = 0\n[physics]\nratios = 1e6\nn_steps = 5\n[solver]\nstrategies = air\n");
  auto rep = solver_study(c);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].status, "ok");
  EXPECT_EQ(rep.rows[0].steps_run, 5);
  EXPECT_EQ(rep.rows[0].avg.count, 4);
  EXPECT_GT(rep.rows[0].avg.inner_total, 0.0);

  c.time_cap = 1e-9;
  rep = solver_study(c);
  EXPECT_EQ(rep.rows[0].status, "dnf");
  EXPECT_EQ(rep.rows[0].steps_run, 1);

  const std::string dir = ::testing::TempDir() + "solver_study_test";
  std::filesystem::create_directories(dir);
  write_solver_csv(rep, dir);
  std::ifstream in(dir + "/solver_study.csv");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header.rfind("refinement,ratio,strategy,status", 0), 0u);
  EXPECT_NE(line.find(",dnf,"), std::string::npos);
}

TEST(Experiments, ConvergenceOrdersFromErrors) {
  auto c = parse_config_string(
      "[mesh]\nrefinements = 0, 1\n[physics]\nratios = 1e3\nn_steps = 2\n[scheme]\nschemes = mixed-dg\n");
  const auto rep = convergence_study(c);
  ASSERT_EQ(rep.rows.size(), 2u);
  ASSERT_EQ(rep.orders.size(), 1u);
  EXPECT_NEAR(rep.orders[0].order, std::log2(rep.rows[0].error / rep.rows[1].error), 1e-12);
  EXPECT_GT(rep.orders[0].order, 2.0);
  EXPECT_TRUE(rep.all_completed());
}

TEST(Config, ShippedConfigsParse) {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(ANISOHEAT_CONFIG_DIR)) {
    if (e.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 6);
}
