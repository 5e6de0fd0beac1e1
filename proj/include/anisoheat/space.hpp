#pragma once

// Tensor-product nodal DG space on prisms: Lagrange P_k on the triangle
// times Lagrange P_kz on the extrusion interval.

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "anisoheat/mesh.hpp"
#include "anisoheat/quadrature.hpp"

namespace anisoheat {

/// Affine map from the reference prism to one physical cell.
struct CellGeometry {
  Eigen::Matrix2d J;      // columns: v1 - v0, v2 - v0
  Eigen::Matrix2d JinvT;  // J^{-T}
  Vec2 x0;
  double z0 = 0.0;
  double dz = 1.0;
  double detJ = 0.0;  // 2 |triangle| dz

  Vec3 map(const Vec3& ref) const {
    const Vec2 xy = x0 + J * Vec2(ref.x(), ref.y());
    return Vec3(xy.x(), xy.y(), z0 + ref.z() * dz);
  }
  Vec3 inverse_map(const Vec3& x) const {
    const Vec2 r = J.inverse() * (Vec2(x.x(), x.y()) - x0);
    return Vec3(r.x(), r.y(), (x.z() - z0) / dz);
  }
  Vec3 physical_gradient(const Vec3& g) const {
    const Vec2 gxy = JinvT * Vec2(g.x(), g.y());
    return Vec3(gxy.x(), gxy.y(), g.z() / dz);
  }
};

/// Basis values and physical-independent reference gradients at a point set.
struct BasisTable {
  int npoints = 0;
  int ndofs = 0;
  std::vector<double> values;           // [q * ndofs + i]
  std::vector<Vec3> ref_gradients;      // [q * ndofs + i]
  std::vector<Vec3> ref_points;
  std::vector<double> weights;          // reference measure weights

  double value(int q, int i) const { return values[static_cast<std::size_t>(q) * ndofs + i]; }
  const Vec3& grad(int q, int i) const { return ref_gradients[static_cast<std::size_t>(q) * ndofs + i]; }
};

/// Quadrature on one local facet, as seen from the cell owning it.
/// Facet weights are fractions of the facet measure (they sum to 1).
struct FacetTable {
  BasisTable basis;
  std::vector<double> unit_weights;
};

class DgSpace {
 public:
  DgSpace(const PrismMesh& mesh, int order = 2, int z_order = -1) : mesh_(&mesh), k_(order) {
    if (order < 0) throw Error("DgSpace: negative polynomial order");
    kz_ = z_order >= 0 ? z_order : (mesh.is_planar() ? 0 : order);
    if (mesh.is_planar() && kz_ != 0) throw Error("DgSpace: planar meshes need z_order = 0");
    ntri_ = (k_ + 1) * (k_ + 2) / 2;
    nz_ = kz_ + 1;
    ndofs_ = ntri_ * nz_;
    build_triangle_basis();
    build_interval_basis();

    const int qdeg = 2 * k_ + 2;
    const int zpts = kz_ + 2;
    const Rule3d vr = prism_rule(qdeg, zpts);
    volume_ = tabulate(vr.points, vr.weights);

    const Rule1d edge = gauss_legendre(k_ + 2);
    const Rule1d zr = gauss_legendre(zpts);
    const Rule2d tri = triangle_rule(qdeg);
    const std::array<Vec2, 3> V = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
    for (int e = 0; e < 3; ++e) {
      for (int flip = 0; flip < 2; ++flip) {
        std::vector<Vec3> pts;
        std::vector<double> w;
        for (std::size_t a = 0; a < zr.points.size(); ++a)
          for (std::size_t s = 0; s < edge.points.size(); ++s) {
            const double t = flip ? 1.0 - edge.points[s] : edge.points[s];
            const Vec2 p = V[e] + t * (V[(e + 1) % 3] - V[e]);
            pts.emplace_back(p.x(), p.y(), zr.points[a]);
            w.push_back(edge.weights[s] * zr.weights[a]);
          }
        facet_[e][flip].basis = tabulate(pts, w);
        facet_[e][flip].unit_weights = w;
      }
    }
    for (int side = 0; side < 2; ++side) {
      std::vector<Vec3> pts;
      std::vector<double> w;
      for (std::size_t q = 0; q < tri.points.size(); ++q) {
        pts.emplace_back(tri.points[q].x(), tri.points[q].y(), side == 0 ? 0.0 : 1.0);
        w.push_back(2.0 * tri.weights[q]);
      }
      facet_[3 + side][0].basis = tabulate(pts, w);
      facet_[3 + side][0].unit_weights = w;
      facet_[3 + side][1] = facet_[3 + side][0];
    }

    geometry_.resize(mesh.num_cells());
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const auto& tri_v = mesh.base().triangles[mesh.triangle_of(c)];
      const Vec2& a = mesh.base().vertices[tri_v[0]];
      const Vec2& b = mesh.base().vertices[tri_v[1]];
      const Vec2& d = mesh.base().vertices[tri_v[2]];
      CellGeometry& g = geometry_[c];
      g.J.col(0) = b - a;
      g.J.col(1) = d - a;
      g.JinvT = g.J.inverse().transpose();
      g.x0 = a;
      g.z0 = mesh.z0(c);
      g.dz = mesh.dz();
      g.detJ = g.J.determinant() * g.dz;
    }

    ref_mass_ = DenseMatrix::Zero(ndofs_, ndofs_);
    for (int q = 0; q < volume_.npoints; ++q)
      for (int i = 0; i < ndofs_; ++i)
        for (int j = 0; j < ndofs_; ++j)
          ref_mass_(i, j) += volume_.weights[q] * volume_.value(q, i) * volume_.value(q, j);
    ref_mass_inv_ = ref_mass_.inverse();
  }

  const PrismMesh& mesh() const noexcept { return *mesh_; }
  int order() const noexcept { return k_; }
  int z_order() const noexcept { return kz_; }
  int dofs_per_cell() const noexcept { return ndofs_; }
  int triangle_dofs() const noexcept { return ntri_; }
  int num_cells() const noexcept { return mesh_->num_cells(); }
  Eigen::Index num_dofs() const noexcept { return static_cast<Eigen::Index>(num_cells()) * ndofs_; }
  Eigen::Index dof(int cell, int local) const noexcept {
    return static_cast<Eigen::Index>(cell) * ndofs_ + local;
  }

  const CellGeometry& geometry(int cell) const { return geometry_[cell]; }
  const BasisTable& volume_table() const noexcept { return volume_; }
  /// flip = 1 traverses a vertical facet's edge parameter in reverse, which is
  /// how the minus cell sees a facet described by its plus cell.
  const FacetTable& facet_table(int local, int flip) const { return facet_[local][flip]; }
  const DenseMatrix& reference_mass() const noexcept { return ref_mass_; }
  const DenseMatrix& reference_mass_inverse() const noexcept { return ref_mass_inv_; }

  /// Nodal positions of the local dofs in reference coordinates.
  std::vector<Vec3> reference_nodes() const {
    std::vector<Vec3> out;
    for (int iz = 0; iz < nz_; ++iz)
      for (int it = 0; it < ntri_; ++it) out.emplace_back(tri_nodes_[it].x(), tri_nodes_[it].y(), z_nodes_[iz]);
    return out;
  }

  /// Values and reference gradients of all local basis functions at ref.
  void eval_basis(const Vec3& ref, std::vector<double>& values, std::vector<Vec3>& grads) const {
    std::vector<double> tv(ntri_), tdx(ntri_), tdy(ntri_), zv(nz_), zd(nz_);
    eval_triangle(ref.x(), ref.y(), tv, tdx, tdy);
    eval_interval(ref.z(), zv, zd);
    values.resize(ndofs_);
    grads.resize(ndofs_);
    for (int iz = 0; iz < nz_; ++iz)
      for (int it = 0; it < ntri_; ++it) {
        const int i = iz * ntri_ + it;
        values[i] = tv[it] * zv[iz];
        grads[i] = Vec3(tdx[it] * zv[iz], tdy[it] * zv[iz], tv[it] * zd[iz]);
      }
  }

  BasisTable tabulate(const std::vector<Vec3>& pts, const std::vector<double>& w) const {
    BasisTable t;
    t.npoints = static_cast<int>(pts.size());
    t.ndofs = ndofs_;
    t.ref_points = pts;
    t.weights = w;
    t.values.resize(pts.size() * ndofs_);
    t.ref_gradients.resize(pts.size() * ndofs_);
    std::vector<double> v;
    std::vector<Vec3> g;
    for (std::size_t q = 0; q < pts.size(); ++q) {
      eval_basis(pts[q], v, g);
      for (int i = 0; i < ndofs_; ++i) {
        t.values[q * ndofs_ + i] = v[i];
        t.ref_gradients[q * ndofs_ + i] = g[i];
      }
    }
    return t;
  }

 private:
  void build_triangle_basis() {
    tri_nodes_.clear();
    if (k_ == 0) {
      tri_nodes_.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    } else {
      for (int j = 0; j <= k_; ++j)
        for (int i = 0; i + j <= k_; ++i) tri_nodes_.emplace_back(double(i) / k_, double(j) / k_);
    }
    exps_.clear();
    for (int d = 0; d <= k_; ++d)
      for (int b = 0; b <= d; ++b) exps_.push_back({d - b, b});
    DenseMatrix V(ntri_, ntri_);
    for (int n = 0; n < ntri_; ++n)
      for (int m = 0; m < ntri_; ++m)
        V(n, m) = std::pow(tri_nodes_[n].x(), exps_[m][0]) * std::pow(tri_nodes_[n].y(), exps_[m][1]);
    tri_coeffs_ = V.inverse();  // column i: monomial coefficients of basis i
  }

  void build_interval_basis() {
    z_nodes_.clear();
    if (kz_ == 0) {
      z_nodes_.push_back(0.5);
    } else {
      for (int i = 0; i <= kz_; ++i) z_nodes_.push_back(double(i) / kz_);
    }
  }

  void eval_triangle(double x, double y, std::vector<double>& v, std::vector<double>& dx,
                     std::vector<double>& dy) const {
    std::vector<double> mv(ntri_), mdx(ntri_), mdy(ntri_);
    for (int m = 0; m < ntri_; ++m) {
      const int a = exps_[m][0], b = exps_[m][1];
      const double xa = ipow(x, a), yb = ipow(y, b);
      mv[m] = xa * yb;
      mdx[m] = a > 0 ? a * ipow(x, a - 1) * yb : 0.0;
      mdy[m] = b > 0 ? b * xa * ipow(y, b - 1) : 0.0;
    }
    for (int i = 0; i < ntri_; ++i) {
      double s = 0, sx = 0, sy = 0;
      for (int m = 0; m < ntri_; ++m) {
        s += tri_coeffs_(m, i) * mv[m];
        sx += tri_coeffs_(m, i) * mdx[m];
        sy += tri_coeffs_(m, i) * mdy[m];
      }
      v[i] = s;
      dx[i] = sx;
      dy[i] = sy;
    }
  }

  void eval_interval(double z, std::vector<double>& v, std::vector<double>& d) const {
    for (int i = 0; i < nz_; ++i) {
      double val = 1.0, der = 0.0;
      for (int m = 0; m < nz_; ++m) {
        if (m == i) continue;
        const double denom = z_nodes_[i] - z_nodes_[m];
        der = der * (z - z_nodes_[m]) / denom + val / denom;
        val *= (z - z_nodes_[m]) / denom;
      }
      v[i] = val;
      d[i] = der;
    }
  }

  static double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
  }

  const PrismMesh* mesh_;
  int k_ = 2;
  int kz_ = 2;
  int ntri_ = 0;
  int nz_ = 0;
  int ndofs_ = 0;
  std::vector<Vec2> tri_nodes_;
  std::vector<std::array<int, 2>> exps_;
  DenseMatrix tri_coeffs_;
  std::vector<double> z_nodes_;
  BasisTable volume_;
  std::array<std::array<FacetTable, 2>, 5> facet_;
  std::vector<CellGeometry> geometry_;
  DenseMatrix ref_mass_;
  DenseMatrix ref_mass_inv_;
};

/// Coefficient vector tied to a space.
struct FieldVector {
  const DgSpace* space = nullptr;
  Vector coeffs;

  FieldVector() = default;
  explicit FieldVector(const DgSpace& s) : space(&s), coeffs(Vector::Zero(s.num_dofs())) {}
  FieldVector(const DgSpace& s, Vector c) : space(&s), coeffs(std::move(c)) {
    if (coeffs.size() != s.num_dofs()) throw Error("FieldVector: length does not match the space");
  }

  double evaluate(int cell, const Vec3& ref) const {
    std::vector<double> v;
    std::vector<Vec3> g;
    space->eval_basis(ref, v, g);
    double s = 0.0;
    for (int i = 0; i < space->dofs_per_cell(); ++i) s += v[i] * coeffs[space->dof(cell, i)];
    return s;
  }

  /// CSV with header "dof,value".
  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "dof,value\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) out << i << "," << coeffs[i] << "\n";
  }

  static FieldVector read_csv(const DgSpace& s, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != "dof,value") throw Error(path + ": expected header dof,value");
    FieldVector f(s);
    Eigen::Index count = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      long idx = 0;
      char comma = 0;
      double v = 0.0;
      if (!(ls >> idx >> comma >> v) || comma != ',') throw Error(path + ": malformed line '" + line + "'");
      if (idx < 0 || idx >= f.coeffs.size()) throw Error(path + ": dof index out of range");
      f.coeffs[idx] = v;
      ++count;
    }
    if (count != f.coeffs.size()) throw Error(path + ": wrong number of entries");
    return f;
  }
};

/// Magnetic field given pointwise, optionally per cell (for fields whose
/// normal component jumps across facets).
class MagneticField {
 public:
  using PointFn = std::function<Vec3(const Vec3&)>;
  using CellFn = std::function<Vec3(const Vec3&, int)>;

  MagneticField() = default;
  explicit MagneticField(PointFn f) : cell_fn_([f](const Vec3& x, int) { return f(x); }) {}
  static MagneticField per_cell(CellFn f) {
    MagneticField m;
    m.cell_fn_ = std::move(f);
    return m;
  }

  Vec3 B(const Vec3& x, int cell = -1) const { return cell_fn_(x, cell); }

  /// Unit direction B / |B|; throws SingularFieldError where |B| vanishes.
  Vec3 b(const Vec3& x, int cell = -1) const {
    const Vec3 v = cell_fn_(x, cell);
    const double n = v.norm();
    if (!(n > kMinMagnitude)) throw SingularFieldError(x);
    return v / n;
  }

  static constexpr double kMinMagnitude = 1e-12;

 private:
  CellFn cell_fn_;
};

/// L2 projection onto the space, solved exactly cell by cell.
inline FieldVector project(const DgSpace& space, const ScalarFunction& f) {
  FieldVector u(space);
  const BasisTable& vt = space.volume_table();
  const int nd = space.dofs_per_cell();
  Vector rhs(nd);
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    rhs.setZero();
    for (int q = 0; q < vt.npoints; ++q) {
      const double fq = f(g.map(vt.ref_points[q])) * vt.weights[q];
      for (int i = 0; i < nd; ++i) rhs[i] += fq * vt.value(q, i);
    }
    u.coeffs.segment(space.dof(c, 0), nd) = space.reference_mass_inverse() * rhs;
  }
  return u;
}

/// ||u - exact||_2 / ||exact||_2 by volume quadrature.
inline double l2_error(const FieldVector& u, const ScalarFunction& exact) {
  const DgSpace& space = *u.space;
  const BasisTable& vt = space.volume_table();
  const int nd = space.dofs_per_cell();
  double num = 0.0, den = 0.0;
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    for (int q = 0; q < vt.npoints; ++q) {
      double uh = 0.0;
      for (int i = 0; i < nd; ++i) uh += vt.value(q, i) * u.coeffs[space.dof(c, i)];
      const double e = exact(g.map(vt.ref_points[q]));
      const double w = vt.weights[q] * g.detJ;
      num += w * (uh - e) * (uh - e);
      den += w * e * e;
    }
  }
  if (!(den > 0.0)) throw Error("l2_error: exact solution has zero norm");
  return std::sqrt(num / den);
}

/// Integral of a scalar function over the domain.
inline double integrate(const DgSpace& space, const ScalarFunction& f) {
  const BasisTable& vt = space.volume_table();
  double s = 0.0;
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    for (int q = 0; q < vt.npoints; ++q) s += vt.weights[q] * g.detJ * f(g.map(vt.ref_points[q]));
  }
  return s;
}

}  // namespace anisoheat
