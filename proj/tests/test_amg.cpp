#include <gtest/gtest.h>

#include <Eigen/SparseLU>

#include "anisoheat/amg.hpp"
#include "anisoheat/assembly.hpp"
#include "anisoheat/krylov.hpp"
#include "anisoheat/problems.hpp"
#include "test_helpers.hpp"

using namespace anisoheat;
using anisoheat::testing::random_vector;

namespace {

StrengthGraph graph_from_rows(const std::vector<std::vector<int>>& rows) {
  StrengthGraph S;
  S.n = static_cast<int>(rows.size());
  S.ptr.assign(rows.size() + 1, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j : rows[i]) S.idx.push_back(j);
    S.ptr[i + 1] = S.idx.size();
  }
  return S;
}

StrengthGraph chain(int n) {
  std::vector<std::vector<int>> rows(n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) rows[i].push_back(i - 1);
    if (i + 1 < n) rows[i].push_back(i + 1);
  }
  return graph_from_rows(rows);
}

struct CoarseTransport {
  PrismMesh mesh;
  DgSpace space;
  BlockCsrMatrix G;
  CoarseTransport()
      : mesh(PrismMesh::extrude(build_base_mesh(7), 2, 5.0, true)),
        space(mesh, 2),
        G(assemble_transport(space, OpenFieldProblem{}.field())) {}
};

const CoarseTransport& coarse_transport() {
  static const CoarseTransport ct;
  return ct;
}

/// Random block lower-bidiagonal matrix: 1D upwind transport along a chain.
BlockCsrMatrix bidiagonal(int b, int n, std::uint64_t seed) {
  std::vector<std::vector<int>> rows(n);
  for (int i = 0; i < n; ++i) {
    if (i > 0) rows[i].push_back(i - 1);
    rows[i].push_back(i);
  }
  BlockCsrMatrix A = BlockCsrMatrix::from_pattern(b, n, n, std::move(rows));
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    DenseMatrix D = 4.0 * DenseMatrix::Identity(b, b);
    for (int r = 0; r < b; ++r)
      for (int c = 0; c < b; ++c) D(r, c) += 0.5 * u(gen);
    A.block(static_cast<std::size_t>(A.find(i, i))) = D;
    if (i > 0) {
      DenseMatrix O(b, b);
      for (int r = 0; r < b; ++r)
        for (int c = 0; c < b; ++c) O(r, c) = -1.0 + 0.3 * u(gen);
      A.block(static_cast<std::size_t>(A.find(i, i - 1))) = O;
    }
  }
  return A;
}

}  // namespace

TEST(Strength, DiagonalMatrixHasNoStrongEdges) {
  const auto A = BlockCsrMatrix::from_pattern(2, 4, 4, {{0}, {1}, {2}, {3}});
  BlockCsrMatrix B = A;
  for (double& v : B.values()) v = 1.0;
  const auto S = strength(condense(B), 0.25);
  EXPECT_EQ(S.num_edges(), 0u);
}

TEST(Strength, DominantOffDiagonalIsTheOnlyStrongEdge) {
  // scalar row 0: diag 4, a_01 = -10, a_02 = -1e-3
  BlockCsrMatrix A = BlockCsrMatrix::from_pattern(1, 3, 3, {{0, 1, 2}, {1}, {2}});
  A.block(static_cast<std::size_t>(A.find(0, 0)))(0, 0) = 4.0;
  A.block(static_cast<std::size_t>(A.find(0, 1)))(0, 0) = -10.0;
  A.block(static_cast<std::size_t>(A.find(0, 2)))(0, 0) = -1e-3;
  A.block(static_cast<std::size_t>(A.find(1, 1)))(0, 0) = 1.0;
  A.block(static_cast<std::size_t>(A.find(2, 2)))(0, 0) = 1.0;
  for (double theta : {0.01, 0.5, 1.0}) {
    const auto S = strength(condense(A), theta);
    ASSERT_EQ(S.row(0).size(), 1u);
    EXPECT_EQ(S.row(0)[0], 1);
  }
  EXPECT_THROW(strength(condense(A), 0.0), Error);
}

TEST(Strength, TransportRowsAreStrongExactlyWhereFlowLeavesTheCell) {
  // Row i of G couples to cell j iff b carries information from i into j.
  const auto& ct = coarse_transport();
  const MagneticField B = OpenFieldProblem{}.field();
  const auto S = strength(condense(ct.G), 0.01);
  std::vector<char> has_out(ct.space.num_cells(), 0);
  FacetPoints fp;
  for (const Facet& F : ct.mesh.facets()) {
    if (F.boundary()) continue;
    eval_facet(ct.space, F, fp, false);
    for (int q = 0; q < fp.nq; ++q) {
      const double sp = B.b(fp.x_plus[q], F.plus).dot(F.normal);
      if (sp > 1e-12) has_out[F.plus] = 1;
      if (sp < -1e-12) has_out[F.minus] = 1;
    }
  }
  int checked = 0;
  for (int i = 0; i < S.n; ++i) {
    EXPECT_EQ(!S.row(i).empty(), static_cast<bool>(has_out[i])) << "cell " << i;
    checked += has_out[i];
  }
  EXPECT_GT(checked, S.n / 2);
}

TEST(Coarsening, DisconnectedGraphIsAllCoarse) {
  const auto S = graph_from_rows(std::vector<std::vector<int>>(10));
  const auto split = rs_coarsen(S, true);
  for (auto p : split) EXPECT_EQ(p, PointType::C);
}

TEST(Coarsening, ChainsSatisfyInterpolationCondition) {
  for (int n = 2; n <= 20; ++n) {
    for (std::uint64_t seed : {0u, 1u, 7u}) {
      const auto S = chain(n);
      const auto split = rs_coarsen(S, true, seed);
      for (int i = 0; i < n; ++i) {
        if (split[i] != PointType::F) continue;
        bool has_c = false;
        for (int j : S.row(i)) {
          has_c = has_c || split[j] == PointType::C;
          if (split[j] != PointType::F) continue;
          bool common = false;
          for (int k : S.row(i))
            for (int l : S.row(j))
              if (k == l && split[k] == PointType::C) common = true;
          EXPECT_TRUE(common) << "n=" << n << " F-F pair " << i << "," << j;
        }
        EXPECT_TRUE(has_c) << "n=" << n << " point " << i;
      }
    }
  }
}

TEST(Coarsening, EveryFinePointHasAStrongCoarseNeighbour) {
  const auto& ct = coarse_transport();
  const auto S = strength(condense(ct.G), 0.01);
  for (bool second : {false, true}) {
    const auto split = rs_coarsen(S, second, 3);
    for (int i = 0; i < S.n; ++i) {
      if (split[i] != PointType::F) continue;
      bool has_c = false;
      for (int j : S.row(i)) has_c = has_c || split[j] == PointType::C;
      EXPECT_TRUE(has_c) << i;
    }
  }
}

TEST(Interpolation, OnePointStructure) {
  const auto& ct = coarse_transport();
  const auto g = condense(ct.G);
  const auto S = strength(g, 0.01);
  const auto split = rs_coarsen(S, true);
  const auto P = one_point_interp(g, S, split, ct.G.block_size());
  int nc = 0;
  coarse_numbering(split, nc);
  EXPECT_EQ(P.block_cols(), nc);
  for (int i = 0; i < P.block_rows(); ++i) {
    ASSERT_EQ(P.row_ptr()[i + 1] - P.row_ptr()[i], 1u);
    const auto blk = P.block(P.row_ptr()[i]);
    EXPECT_EQ((blk - DenseMatrix::Identity(blk.rows(), blk.cols())).norm(), 0.0);
  }

  const std::vector<PointType> all_c(g.n, PointType::C);
  const auto I = one_point_interp(g, S, all_c, ct.G.block_size());
  EXPECT_EQ((I.to_dense() - DenseMatrix::Identity(I.rows(), I.cols())).norm(), 0.0);
}

TEST(Restriction, LocalIdealResidualVanishes) {
  const auto& ct = coarse_transport();
  const auto& A = ct.G;
  const auto g = condense(A);
  const auto split = rs_coarsen(strength(g, 0.01), true);
  const auto S_R = strength(g, 0.25);
  const auto rr = lair_restriction(A, split, S_R);
  EXPECT_EQ(rr.fallbacks, 0);
  const BlockCsrMatrix RA = multiply(rr.R, A);
  int nc = 0;
  const auto cid = coarse_numbering(split, nc);
  int tested = 0;
  for (int c = 0; c < A.block_rows(); ++c) {
    if (split[c] != PointType::C) continue;
    double num = 0.0, den = 0.0;
    for (int j : S_R.row(c)) {
      if (split[j] != PointType::F) continue;
      const auto k = RA.find(cid[c], j);
      if (k >= 0) num += RA.block(static_cast<std::size_t>(k)).squaredNorm();
    }
    for (std::size_t k = A.row_ptr()[c]; k < A.row_ptr()[c + 1]; ++k)
      if (split[A.col_idx()[k]] == PointType::F) den += A.block(k).squaredNorm();
    if (den == 0.0) continue;
    EXPECT_LE(std::sqrt(num / den), 1e-10) << "C point " << c;
    ++tested;
  }
  EXPECT_GT(tested, 0);
}

TEST(Restriction, EmptyNeighbourhoodGivesInjection) {
  const auto A = bidiagonal(2, 4, 5);
  const std::vector<PointType> split{PointType::C, PointType::C, PointType::C, PointType::C};
  const auto rr = lair_restriction(A, split, graph_from_rows(std::vector<std::vector<int>>(4)));
  EXPECT_EQ((rr.R.to_dense() - DenseMatrix::Identity(8, 8)).norm(), 0.0);
}

TEST(Restriction, ExactForTriangularWithDiagonalFineBlock) {
  const auto A = bidiagonal(3, 9, 11);
  std::vector<PointType> split(9);
  for (int i = 0; i < 9; ++i) split[i] = i % 2 == 0 ? PointType::C : PointType::F;
  const auto S_R = strength(condense(A), 0.25);
  const auto rr = lair_restriction(A, split, S_R);
  const DenseMatrix RA = rr.R.to_dense() * A.to_dense();
  for (int c = 0, ic = 0; c < 9; c += 2, ++ic)
    for (int f = 1; f < 9; f += 2) EXPECT_LT(RA.block(ic * 3, f * 3, 3, 3).norm(), 1e-13);
}

TEST(Relaxation, FfcSolvesBlockDiagonalAndFixesSolution) {
  BlockCsrMatrix A = BlockCsrMatrix::from_pattern(2, 4, 4, {{0}, {1}, {2}, {3}});
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : A.values()) v = u(gen);
  for (int i = 0; i < 4; ++i) A.block(static_cast<std::size_t>(A.find(i, i))).diagonal().array() += 3.0;
  const auto Dinv = block_diag_inverse(A);
  const std::vector<int> f{1, 3}, c{0, 2};
  const Vector b = random_vector(8, 4);
  Vector x = Vector::Zero(8);
  ffc_block_jacobi(A, Dinv, f, c, x, b);
  EXPECT_LT((A * x - b).norm(), 1e-14 * b.norm());

  const auto& G = coarse_transport().G;
  const Vector xs = random_vector(G.rows(), 9);
  const Vector rhs = G * xs;
  Vector y = xs;
  const auto split = rs_coarsen(strength(condense(G), 0.01), true);
  std::vector<int> fp, cp;
  for (int i = 0; i < G.block_rows(); ++i) (split[i] == PointType::F ? fp : cp).push_back(i);
  ffc_block_jacobi(G, block_diag_inverse(G), fp, cp, y, rhs);
  EXPECT_LT((y - xs).norm(), 1e-10 * xs.norm());
}

TEST(Relaxation, FfcErrorDoesNotGrowOnTransport) {
  const auto& G = coarse_transport().G;
  const auto Dinv = block_diag_inverse(G);
  const auto split = rs_coarsen(strength(condense(G), 0.01), true);
  std::vector<int> fp, cp;
  for (int i = 0; i < G.block_rows(); ++i) (split[i] == PointType::F ? fp : cp).push_back(i);
  int grew = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Vector xs = random_vector(G.rows(), 100 + s);
    const Vector b = G * xs;
    Vector x = Vector::Zero(G.rows());
    ffc_block_jacobi(G, Dinv, fp, cp, x, b);
    if ((x - xs).norm() > xs.norm()) ++grew;
  }
  EXPECT_EQ(grew, 0);
}

TEST(Hierarchy, SingleLevelSolvesExactly) {
  const auto A = bidiagonal(2, 10, 1);
  const auto h = AmgHierarchy::build_air(A);
  ASSERT_EQ(h.num_levels(), 1);
  const Vector b = random_vector(A.rows(), 2);
  EXPECT_LT((A * h.apply(b) - b).norm(), 1e-13 * b.norm());
}

TEST(Hierarchy, GalerkinConsistencyAndShrinkingLevels) {
  const auto& G = coarse_transport().G;
  AmgParams p;
  p.max_coarse = 16;
  const auto h = AmgHierarchy::build_air(G, p);
  ASSERT_GE(h.num_levels(), 2);
  for (int l = 0; l + 1 < h.num_levels(); ++l) {
    const auto& L = h.level(l);
    const auto RAP = multiply(L.R, multiply(L.A, L.P));
    EXPECT_EQ((RAP.to_dense() - h.level(l + 1).A.to_dense()).norm(), 0.0);
    EXPECT_LT(h.level(l + 1).A.block_rows(), L.A.block_rows());
  }
  EXPECT_LE(h.level(h.num_levels() - 1).A.block_rows(), p.max_coarse);
}

TEST(Hierarchy, DeterministicForFixedSeed) {
  const auto& G = coarse_transport().G;
  const auto h1 = AmgHierarchy::build_air(G);
  const auto h2 = AmgHierarchy::build_air(G);
  ASSERT_EQ(h1.num_levels(), h2.num_levels());
  for (int l = 0; l < h1.num_levels(); ++l) {
    EXPECT_EQ(h1.level(l).split, h2.level(l).split);
    const auto v1 = h1.level(l).A.values();
    const auto v2 = h2.level(l).A.values();
    ASSERT_EQ(v1.size(), v2.size());
    EXPECT_TRUE(std::equal(v1.begin(), v1.end(), v2.begin()));
  }
}

TEST(Hierarchy, AirSolvesChainTransportInFewCycles) {
  const auto A = bidiagonal(3, 400, 8);
  AmgParams p;
  p.max_coarse = 4;
  const auto h = AmgHierarchy::build_air(A, p);
  EXPECT_GE(h.num_levels(), 3);
  const Vector b = random_vector(A.rows(), 3);
  Vector x = Vector::Zero(A.rows());
  for (int k = 0; k < 3; ++k) h.vcycle(b, x);
  EXPECT_LE((A * x - b).norm(), 1e-10 * b.norm());
}

TEST(Hierarchy, AirPreconditionedGmresOnTransport) {
  const auto& G = coarse_transport().G;
  const auto h = AmgHierarchy::build_air(G);
  EXPECT_EQ(h.restriction_fallbacks(), 0);
  const Vector b = random_vector(G.rows(), 12);
  Vector x;
  KrylovOptions ko;
  ko.tol_rel = 1e-10;
  ko.max_it = 200;
  const auto st = gmres_right([&](const Vector& v, Vector& y) { y = G * v; },
                              [&](const Vector& v, Vector& y) { y = h.apply(v); }, b, x, ko);
  EXPECT_TRUE(st.converged);
  EXPECT_LE(st.iterations, 25);
  EXPECT_LE((G * x - b).norm(), 1e-9 * b.norm());
}

TEST(Hierarchy, ClassicalPreconditionedCgOnHeatOperator) {
  const auto mesh = PrismMesh::extrude(build_base_mesh(7), 2, 5.0, true);
  const DgSpace s(mesh, 2);
  const auto ops = assemble_operators(s, HelicalProblem{}.field());
  const double dt = 1e-3;
  const auto A = add(1.0, add(1.0, ops.L, 20.0, ops.M_BC_heinv), 1.0 / dt, ops.M);
  const auto h = AmgHierarchy::build_classical(A);
  EXPECT_GE(h.num_levels(), 2);
  const auto As = to_scalar(A);
  const Vector b = random_vector(A.rows(), 4);
  Vector x;
  KrylovOptions ko;
  ko.tol_rel = 1e-8;
  ko.max_it = 200;
  const auto st = cg([&](const Vector& v, Vector& y) { y = As * v; },
                     [&](const Vector& v, Vector& y) { y = h.apply(v); }, b, x, ko);
  EXPECT_TRUE(st.converged);
  EXPECT_LE(st.iterations, 30);
}

TEST(Hierarchy, SummaryCsv) {
  const auto h = AmgHierarchy::build_air(coarse_transport().G);
  const std::string path = ::testing::TempDir() + "amg_summary.csv";
  h.write_summary(path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "level,block_rows,rows,nnz_blocks,nnz,c_points,restriction_fallbacks");
  EXPECT_GE(h.operator_complexity(), 1.0);
}
