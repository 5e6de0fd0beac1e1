#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>

#include "anisoheat/space.hpp"
#include "test_helpers.hpp"

using namespace anisoheat;

namespace {

const double pi = std::numbers::pi;

PrismMesh coarse3d() { return PrismMesh::extrude(build_base_mesh(7), 2, 5.0, true); }

double binomial_monomial_triangle(int a, int b) {
  // integral of x^a y^b over the reference triangle = a! b! / (a + b + 2)!
  double num = std::tgamma(a + 1) * std::tgamma(b + 1);
  return num / std::tgamma(a + b + 3);
}

}  // namespace

TEST(Quadrature, GaussLegendreExactness) {
  for (int n = 1; n <= 6; ++n) {
    const auto r = gauss_legendre(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double s = 0.0;
      for (int q = 0; q < n; ++q) s += r.weights[q] * std::pow(r.points[q], d);
      EXPECT_NEAR(s, 1.0 / (d + 1), 1e-14) << "n=" << n << " d=" << d;
    }
  }
}

TEST(Quadrature, TriangleExactness) {
  for (int deg = 0; deg <= 8; ++deg) {
    const auto r = triangle_rule(deg);
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b) {
        double s = 0.0;
        for (std::size_t q = 0; q < r.points.size(); ++q)
          s += r.weights[q] * std::pow(r.points[q].x(), a) * std::pow(r.points[q].y(), b);
        const double exact = binomial_monomial_triangle(a, b);
        EXPECT_NEAR(s, exact, 1e-13 * exact) << a << "," << b;
      }
  }
}

TEST(Space, DofsPerCell) {
  const auto mesh = coarse3d();
  const DgSpace s(mesh, 2);
  EXPECT_EQ(s.dofs_per_cell(), 18);
  EXPECT_EQ(s.num_dofs(), 196 * 18);
  const auto planar = PrismMesh::planar(build_base_mesh(7));
  EXPECT_EQ(DgSpace(planar, 2).dofs_per_cell(), 6);
}

TEST(Space, PartitionOfUnityAndNodality) {
  const auto mesh = coarse3d();
  const DgSpace s(mesh, 2);
  std::vector<double> v;
  std::vector<Vec3> g;
  const auto nodes = s.reference_nodes();
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    s.eval_basis(nodes[n], v, g);
    for (int i = 0; i < s.dofs_per_cell(); ++i) EXPECT_NEAR(v[i], i == static_cast<int>(n) ? 1.0 : 0.0, 1e-13);
  }
  for (const Vec3 p : {Vec3(0.2, 0.3, 0.7), Vec3(0.05, 0.9, 0.1), Vec3(1.0 / 3, 1.0 / 3, 0.5)}) {
    s.eval_basis(p, v, g);
    double sum = 0.0;
    Vec3 gs = Vec3::Zero();
    for (int i = 0; i < s.dofs_per_cell(); ++i) {
      sum += v[i];
      gs += g[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-13);
    EXPECT_LT(gs.norm(), 1e-12);
  }
}

TEST(Space, QuadratureExactOnCells) {
  const auto mesh = PrismMesh::extrude(build_base_mesh(3, 1.0, 0.2, 5), 2, 2.0, false);
  const DgSpace s(mesh, 2);
  // divergence theorem free check: integrate x^a y^b z^c over the whole
  // domain [0,1]^2 x [0,2] and compare with the analytic value
  for (int a = 0; a <= 6; ++a)
    for (int b = 0; a + b <= 6; ++b)
      for (int c = 0; a + b + c <= 6; ++c) {
        const double got = integrate(s, [&](const Vec3& x) {
          return std::pow(x.x(), a) * std::pow(x.y(), b) * std::pow(x.z(), c);
        });
        const double exact = 1.0 / (a + 1) / (b + 1) * std::pow(2.0, c + 1) / (c + 1);
        EXPECT_NEAR(got, exact, 1e-12 * exact) << a << b << c;
      }
}

TEST(Space, GradientOfInterpolantIsExact) {
  const auto mesh = PrismMesh::extrude(build_base_mesh(3, 1.0, 0.2, 5), 2, 2.0, false);
  const DgSpace s(mesh, 2);
  auto f = [](const Vec3& x) { return 1 + x.x() - 2 * x.y() * x.z() + 3 * x.x() * x.x() + x.z() * x.z() * x.y() * x.y(); };
  auto df = [](const Vec3& x) {
    return Vec3(1 + 6 * x.x(), -2 * x.z() + 2 * x.y() * x.z() * x.z(), -2 * x.y() + 2 * x.z() * x.y() * x.y());
  };
  const auto nodes = s.reference_nodes();
  std::vector<double> v;
  std::vector<Vec3> g;
  const Vec3 ref(0.3, 0.25, 0.6);
  s.eval_basis(ref, v, g);
  for (int c = 0; c < s.num_cells(); ++c) {
    const auto& geo = s.geometry(c);
    Vec3 grad = Vec3::Zero();
    for (int i = 0; i < s.dofs_per_cell(); ++i) grad += f(geo.map(nodes[i])) * geo.physical_gradient(g[i]);
    EXPECT_LT((grad - df(geo.map(ref))).norm(), 1e-11);
  }
}

TEST(Space, ProjectionOfConstantIsOnes) {
  const auto mesh = coarse3d();
  const DgSpace s(mesh, 2);
  const auto u = project(s, [](const Vec3&) { return 1.0; });
  EXPECT_LT((u.coeffs - Vector::Ones(s.num_dofs())).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Space, ProjectionOfPolynomialIsExact) {
  const auto mesh = coarse3d();
  const DgSpace s(mesh, 2);
  auto f = [](const Vec3& x) { return 2 + x.x() * x.y() - x.z() * x.z() + x.x() * x.x() * x.z() * x.z(); };
  EXPECT_LT(l2_error(project(s, f), f), 1e-12);
}

TEST(Space, ErrorOfZeroAgainstOne) {
  const auto mesh = coarse3d();
  const DgSpace s(mesh, 2);
  EXPECT_NEAR(l2_error(FieldVector(s), [](const Vec3&) { return 1.0; }), 1.0, 1e-14);
  EXPECT_THROW(l2_error(FieldVector(s), [](const Vec3&) { return 0.0; }), Error);
}

TEST(Space, ProjectionOrder) {
  auto f = [](const Vec3& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  const auto base = build_base_mesh(7);
  double prev = 0.0;
  for (int r = 0; r < 3; ++r) {
    const auto mesh = PrismMesh::planar(refine(base, r));
    const DgSpace s(mesh, 2);
    const double e = l2_error(project(s, f), f);
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, 1.0);
    if (r > 0) EXPECT_GE(std::log2(prev / e), 2.95);  // asymptotic rate 3, approached from below
    prev = e;
  }
}

TEST(Space, FieldVectorCsvRoundTrip) {
  const auto mesh = PrismMesh::planar(build_base_mesh(3));
  const DgSpace s(mesh, 2);
  FieldVector u(s, anisoheat::testing::random_vector(s.num_dofs(), 3));
  const auto path = (std::filesystem::temp_directory_path() / "anisoheat_field.csv").string();
  u.write_csv(path);
  const auto v = FieldVector::read_csv(s, path);
  EXPECT_EQ((u.coeffs - v.coeffs).norm(), 0.0);
  std::filesystem::remove(path);
}

TEST(Space, SingularFieldIsRejected) {
  const MagneticField B([](const Vec3& x) { return Vec3(x.x() - 0.5, 0.0, 0.0); });
  EXPECT_NO_THROW(B.b(Vec3(0.7, 0, 0)));
  try {
    B.b(Vec3(0.5, 0.25, 0.0));
    FAIL();
  } catch (const SingularFieldError& e) {
    EXPECT_EQ(e.point(), Vec3(0.5, 0.25, 0.0));
  }
}

TEST(Space, MassBlocksWellConditioned) {
  const auto mesh = coarse3d();
  const DgSpace s(mesh, 2);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(s.reference_mass());
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_LT(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff(), 1e3);
}
