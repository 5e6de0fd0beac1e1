#pragma once

// Matrices and load vectors of the mixed upwind DG discretization.
//
// Sign conventions (rows are test functions, columns trial functions):
//   M        mass
//   M_BC     boundary mass, weighted by h_e or 1/h_e
//   L        symmetric interior penalty Laplacian with kappa_perp factored out
//            (minus the IP form)
//   G        upwind transport with sqrt(kappa_delta) factored out, defined so
//            that the temperature row holds +sqrt(kd) G^T and the flux row
//            holds -sqrt(kd) G

#include <cmath>
#include <vector>

#include "anisoheat/space.hpp"
#include "anisoheat/sparse.hpp"

namespace anisoheat {

enum class BoundaryKind { Dirichlet, Neumann };

/// Interior penalty constant of the IP Laplacian, kappa_p / h_e on interior facets.
inline constexpr double kDefaultInteriorPenalty = 4.0;

using LocalBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Quadrature data on one facet: physical points and weights plus both
/// sides' basis values and physical gradients.
struct FacetPoints {
  int nq = 0;
  int nd = 0;
  std::vector<Vec3> x_plus;
  std::vector<Vec3> x_minus;
  std::vector<double> w;
  const BasisTable* tab_plus = nullptr;
  const BasisTable* tab_minus = nullptr;
  std::vector<Vec3> grad_plus;   // [q * nd + i]
  std::vector<Vec3> grad_minus;  // [q * nd + i]

  double vp(int q, int i) const { return tab_plus->value(q, i); }
  double vm(int q, int i) const { return tab_minus->value(q, i); }
  const Vec3& gp(int q, int i) const { return grad_plus[static_cast<std::size_t>(q) * nd + i]; }
  const Vec3& gm(int q, int i) const { return grad_minus[static_cast<std::size_t>(q) * nd + i]; }
};

inline void eval_facet(const DgSpace& space, const Facet& F, FacetPoints& fp, bool gradients) {
  const int nd = space.dofs_per_cell();
  const FacetTable& tp = space.facet_table(F.local_plus, 0);
  const CellGeometry& gp = space.geometry(F.plus);
  fp.nq = tp.basis.npoints;
  fp.nd = nd;
  fp.tab_plus = &tp.basis;
  fp.x_plus.resize(fp.nq);
  fp.w.resize(fp.nq);
  for (int q = 0; q < fp.nq; ++q) {
    fp.x_plus[q] = gp.map(tp.basis.ref_points[q]);
    fp.w[q] = tp.unit_weights[q] * F.area;
  }
  if (gradients) {
    fp.grad_plus.resize(static_cast<std::size_t>(fp.nq) * nd);
    for (int q = 0; q < fp.nq; ++q)
      for (int i = 0; i < nd; ++i) fp.grad_plus[q * nd + i] = gp.physical_gradient(tp.basis.grad(q, i));
  }
  if (F.boundary()) {
    fp.tab_minus = nullptr;
    return;
  }
  const FacetTable& tm = space.facet_table(F.local_minus, F.horizontal() ? 0 : 1);
  const CellGeometry& gm = space.geometry(F.minus);
  fp.tab_minus = &tm.basis;
  fp.x_minus.resize(fp.nq);
  for (int q = 0; q < fp.nq; ++q) fp.x_minus[q] = gm.map(tm.basis.ref_points[q]);
  if (gradients) {
    fp.grad_minus.resize(static_cast<std::size_t>(fp.nq) * nd);
    for (int q = 0; q < fp.nq; ++q)
      for (int i = 0; i < nd; ++i) fp.grad_minus[q * nd + i] = gm.physical_gradient(tm.basis.grad(q, i));
  }
}

/// Sparsity with the diagonal block and one block per face neighbour.
inline BlockCsrMatrix face_pattern(const DgSpace& space) {
  const PrismMesh& mesh = space.mesh();
  std::vector<std::vector<int>> rows(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) rows[c].push_back(c);
  for (const Facet& F : mesh.facets()) {
    if (F.boundary()) continue;
    rows[F.plus].push_back(F.minus);
    rows[F.minus].push_back(F.plus);
  }
  const int nd = space.dofs_per_cell();
  return BlockCsrMatrix::from_pattern(nd, mesh.num_cells(), mesh.num_cells(), std::move(rows));
}

inline BlockCsrMatrix diagonal_pattern(const DgSpace& space) {
  std::vector<std::vector<int>> rows(space.num_cells());
  for (int c = 0; c < space.num_cells(); ++c) rows[c].push_back(c);
  return BlockCsrMatrix::from_pattern(space.dofs_per_cell(), space.num_cells(), space.num_cells(),
                                      std::move(rows));
}

inline BlockCsrMatrix assemble_mass(const DgSpace& space) {
  BlockCsrMatrix M = diagonal_pattern(space);
  const int nd = space.dofs_per_cell();
  LocalBlock blk(nd, nd);
  for (int c = 0; c < space.num_cells(); ++c) {
    blk = space.reference_mass() * space.geometry(c).detJ;
    M.add_block(c, c, blk.data());
  }
  return M;
}

enum class FacetWeight { H, InverseH };

inline BlockCsrMatrix assemble_boundary_mass(const DgSpace& space, FacetWeight weight) {
  BlockCsrMatrix A = diagonal_pattern(space);
  const int nd = space.dofs_per_cell();
  LocalBlock blk(nd, nd);
  FacetPoints fp;
  for (const Facet& F : space.mesh().facets()) {
    if (!F.boundary()) continue;
    eval_facet(space, F, fp, false);
    const double wf = weight == FacetWeight::H ? F.h : 1.0 / F.h;
    blk.setZero();
    for (int q = 0; q < fp.nq; ++q)
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) blk(i, j) += wf * fp.w[q] * fp.vp(q, i) * fp.vp(q, j);
    A.add_block(F.plus, F.plus, blk.data());
  }
  return A;
}

/// Symmetric interior penalty Laplacian (unit conductivity). With Dirichlet
/// boundaries the boundary consistency terms are included; the Neumann
/// variant omits them, so constants lie in its kernel.
inline BlockCsrMatrix assemble_ip_laplacian(const DgSpace& space, double kappa_p,
                                            BoundaryKind kind = BoundaryKind::Dirichlet) {
  if (!(kappa_p > 0.0)) throw Error("assemble_ip_laplacian: penalty must be positive");
  BlockCsrMatrix L = face_pattern(space);
  const int nd = space.dofs_per_cell();
  const BasisTable& vt = space.volume_table();
  LocalBlock blk(nd, nd);
  std::vector<Vec3> grads(static_cast<std::size_t>(nd));
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    blk.setZero();
    for (int q = 0; q < vt.npoints; ++q) {
      const double w = vt.weights[q] * g.detJ;
      for (int i = 0; i < nd; ++i) grads[i] = g.physical_gradient(vt.grad(q, i));
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) blk(i, j) += w * grads[i].dot(grads[j]);
    }
    L.add_block(c, c, blk.data());
  }

  FacetPoints fp;
  LocalBlock pp(nd, nd), pm(nd, nd), mp(nd, nd), mm(nd, nd);
  for (const Facet& F : space.mesh().facets()) {
    eval_facet(space, F, fp, true);
    const Vec3& n = F.normal;
    if (F.boundary()) {
      if (kind == BoundaryKind::Neumann) continue;
      pp.setZero();
      for (int q = 0; q < fp.nq; ++q)
        for (int i = 0; i < nd; ++i)
          for (int j = 0; j < nd; ++j)
            pp(i, j) -= fp.w[q] * (n.dot(fp.gp(q, i)) * fp.vp(q, j) + n.dot(fp.gp(q, j)) * fp.vp(q, i));
      L.add_block(F.plus, F.plus, pp.data());
      continue;
    }
    const double pen = kappa_p / F.h;
    pp.setZero();
    pm.setZero();
    mp.setZero();
    mm.setZero();
    for (int q = 0; q < fp.nq; ++q) {
      const double w = fp.w[q];
      // jump [[v]] = v+ - v-, average {grad v} = (grad v+ + grad v-)/2 . n
      for (int i = 0; i < nd; ++i) {
        const double ji_p = fp.vp(q, i), ji_m = -fp.vm(q, i);
        const double ai_p = 0.5 * n.dot(fp.gp(q, i)), ai_m = 0.5 * n.dot(fp.gm(q, i));
        for (int j = 0; j < nd; ++j) {
          const double jj_p = fp.vp(q, j), jj_m = -fp.vm(q, j);
          const double aj_p = 0.5 * n.dot(fp.gp(q, j)), aj_m = 0.5 * n.dot(fp.gm(q, j));
          pp(i, j) += w * (-jj_p * ai_p - ji_p * aj_p + pen * ji_p * jj_p);
          pm(i, j) += w * (-jj_m * ai_p - ji_p * aj_m + pen * ji_p * jj_m);
          mp(i, j) += w * (-jj_p * ai_m - ji_m * aj_p + pen * ji_m * jj_p);
          mm(i, j) += w * (-jj_m * ai_m - ji_m * aj_m + pen * ji_m * jj_m);
        }
      }
    }
    L.add_block(F.plus, F.plus, pp.data());
    L.add_block(F.plus, F.minus, pm.data());
    L.add_block(F.minus, F.plus, mp.data());
    L.add_block(F.minus, F.minus, mm.data());
  }
  return L;
}

namespace detail {

/// Unit field at all facet points on both sides.
inline void facet_directions(const MagneticField& B, const Facet& F, const FacetPoints& fp,
                             std::vector<Vec3>& bp, std::vector<Vec3>& bm) {
  bp.resize(fp.nq);
  for (int q = 0; q < fp.nq; ++q) bp[q] = B.b(fp.x_plus[q], F.plus);
  if (F.boundary()) return;
  bm.resize(fp.nq);
  for (int q = 0; q < fp.nq; ++q) bm[q] = B.b(fp.x_minus[q], F.minus);
}

}  // namespace detail

/// Transport block of the temperature equation, -L_b(zeta = phi_j; phi_i),
/// assembled by upwinding the trial function. Equals G^T.
inline BlockCsrMatrix assemble_transport_trial_upwind(const DgSpace& space, const MagneticField& B) {
  BlockCsrMatrix A = face_pattern(space);
  const int nd = space.dofs_per_cell();
  const BasisTable& vt = space.volume_table();
  LocalBlock blk(nd, nd);
  std::vector<Vec3> grads(static_cast<std::size_t>(nd));
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    blk.setZero();
    for (int q = 0; q < vt.npoints; ++q) {
      const Vec3 x = g.map(vt.ref_points[q]);
      const Vec3 b = B.b(x, c);
      const double w = vt.weights[q] * g.detJ;
      for (int i = 0; i < nd; ++i) {
        const double bgi = b.dot(g.physical_gradient(vt.grad(q, i)));
        for (int j = 0; j < nd; ++j) blk(i, j) += w * vt.value(q, j) * bgi;
      }
    }
    A.add_block(c, c, blk.data());
  }

  FacetPoints fp;
  std::vector<Vec3> bp, bm;
  LocalBlock pp(nd, nd), pm(nd, nd), mp(nd, nd), mm(nd, nd);
  for (const Facet& F : space.mesh().facets()) {
    eval_facet(space, F, fp, false);
    detail::facet_directions(B, F, fp, bp, bm);
    const Vec3& n = F.normal;
    if (F.boundary()) {
      pp.setZero();
      for (int q = 0; q < fp.nq; ++q) {
        const double bn = bp[q].dot(n);
        if (bn <= 0.0) continue;  // outflow only; inflow data goes to the load vector
        for (int i = 0; i < nd; ++i)
          for (int j = 0; j < nd; ++j) pp(i, j) -= fp.w[q] * fp.vp(q, i) * bn * fp.vp(q, j);
      }
      A.add_block(F.plus, F.plus, pp.data());
      continue;
    }
    pp.setZero();
    pm.setZero();
    mp.setZero();
    mm.setZero();
    for (int q = 0; q < fp.nq; ++q) {
      const double sp = bp[q].dot(n);
      const double sm = bm[q].dot(n);
      const bool from_plus = sp > 0.0;
      for (int i = 0; i < nd; ++i) {
        // test jump [[phi b.n]] split by side
        const double tp = fp.w[q] * fp.vp(q, i) * sp;
        const double tm = -fp.w[q] * fp.vm(q, i) * sm;
        for (int j = 0; j < nd; ++j) {
          if (from_plus) {
            const double u = fp.vp(q, j);
            pp(i, j) -= tp * u;
            mp(i, j) -= tm * u;
          } else {
            const double u = fp.vm(q, j);
            pm(i, j) -= tp * u;
            mm(i, j) -= tm * u;
          }
        }
      }
    }
    A.add_block(F.plus, F.plus, pp.data());
    A.add_block(F.plus, F.minus, pm.data());
    A.add_block(F.minus, F.plus, mp.data());
    A.add_block(F.minus, F.minus, mm.data());
  }
  return A;
}

/// Transport block of the flux equation, +L_b(psi_i; T = phi_j), assembled by
/// upwinding the test function. Equals -G.
inline BlockCsrMatrix assemble_transport_test_upwind(const DgSpace& space, const MagneticField& B) {
  BlockCsrMatrix A = face_pattern(space);
  const int nd = space.dofs_per_cell();
  const BasisTable& vt = space.volume_table();
  LocalBlock blk(nd, nd);
  std::vector<double> bg(static_cast<std::size_t>(nd));
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    blk.setZero();
    for (int q = 0; q < vt.npoints; ++q) {
      const Vec3 x = g.map(vt.ref_points[q]);
      const Vec3 b = B.b(x, c);
      const double w = vt.weights[q] * g.detJ;
      for (int j = 0; j < nd; ++j) bg[j] = b.dot(g.physical_gradient(vt.grad(q, j)));
      for (int i = 0; i < nd; ++i) {
        const double wi = w * vt.value(q, i);
        for (int j = 0; j < nd; ++j) blk(i, j) -= wi * bg[j];
      }
    }
    A.add_block(c, c, blk.data());
  }

  FacetPoints fp;
  std::vector<Vec3> bp, bm;
  LocalBlock pp(nd, nd), pm(nd, nd), mp(nd, nd), mm(nd, nd);
  for (const Facet& F : space.mesh().facets()) {
    eval_facet(space, F, fp, false);
    detail::facet_directions(B, F, fp, bp, bm);
    const Vec3& n = F.normal;
    if (F.boundary()) {
      pp.setZero();
      for (int q = 0; q < fp.nq; ++q) {
        const double bn = bp[q].dot(n);
        if (bn <= 0.0) continue;
        for (int i = 0; i < nd; ++i)
          for (int j = 0; j < nd; ++j) pp(i, j) += fp.w[q] * fp.vp(q, j) * bn * fp.vp(q, i);
      }
      A.add_block(F.plus, F.plus, pp.data());
      continue;
    }
    pp.setZero();
    pm.setZero();
    mp.setZero();
    mm.setZero();
    for (int q = 0; q < fp.nq; ++q) {
      const double sp = bp[q].dot(n);
      const double sm = bm[q].dot(n);
      const bool from_plus = sp > 0.0;
      for (int i = 0; i < nd; ++i) {
        const double up = from_plus ? fp.w[q] * fp.vp(q, i) : fp.w[q] * fp.vm(q, i);
        for (int j = 0; j < nd; ++j) {
          // trial jump [[phi b.n]] split by side
          const double jp = fp.vp(q, j) * sp;
          const double jm = -fp.vm(q, j) * sm;
          if (from_plus) {
            pp(i, j) += up * jp;
            pm(i, j) += up * jm;
          } else {
            mp(i, j) += up * jp;
            mm(i, j) += up * jm;
          }
        }
      }
    }
    A.add_block(F.plus, F.plus, pp.data());
    A.add_block(F.plus, F.minus, pm.data());
    A.add_block(F.minus, F.plus, mp.data());
    A.add_block(F.minus, F.minus, mm.data());
  }
  return A;
}

/// Upwind transport matrix G (sqrt(kappa_delta) factored out).
inline BlockCsrMatrix assemble_transport(const DgSpace& space, const MagneticField& B) {
  BlockCsrMatrix G = assemble_transport_test_upwind(space, B);
  G.scale(-1.0);
  return G;
}

/// Symmetric interior penalty form of div(kd b (b . grad T)), returned as
/// the (negative semidefinite) IP_b matrix including the factor kd.
inline BlockCsrMatrix assemble_primal_dg_aniso(const DgSpace& space, const MagneticField& B,
                                               double kappa_delta, double kappa_p = 10.0) {
  BlockCsrMatrix A = face_pattern(space);
  if (kappa_delta == 0.0) return A;
  const int nd = space.dofs_per_cell();
  const BasisTable& vt = space.volume_table();
  LocalBlock blk(nd, nd);
  std::vector<double> bg(static_cast<std::size_t>(nd));
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    blk.setZero();
    for (int q = 0; q < vt.npoints; ++q) {
      const Vec3 b = B.b(g.map(vt.ref_points[q]), c);
      const double w = vt.weights[q] * g.detJ;
      for (int i = 0; i < nd; ++i) bg[i] = b.dot(g.physical_gradient(vt.grad(q, i)));
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) blk(i, j) -= kappa_delta * w * bg[i] * bg[j];
    }
    A.add_block(c, c, blk.data());
  }

  FacetPoints fp;
  std::vector<Vec3> bp, bm;
  LocalBlock pp(nd, nd), pm(nd, nd), mp(nd, nd), mm(nd, nd);
  std::vector<double> jp(nd), jm(nd), ap(nd), am(nd);
  for (const Facet& F : space.mesh().facets()) {
    eval_facet(space, F, fp, true);
    detail::facet_directions(B, F, fp, bp, bm);
    const Vec3& n = F.normal;
    if (F.boundary()) {
      const double pen = 2.0 * kappa_p / F.h;
      pp.setZero();
      for (int q = 0; q < fp.nq; ++q) {
        const double bn = bp[q].dot(n);
        const double w = kappa_delta * fp.w[q];
        for (int i = 0; i < nd; ++i) ap[i] = bp[q].dot(fp.gp(q, i));
        for (int i = 0; i < nd; ++i)
          for (int j = 0; j < nd; ++j)
            pp(i, j) += w * (-pen * fp.vp(q, i) * fp.vp(q, j) + bn * ap[i] * fp.vp(q, j) +
                             bn * ap[j] * fp.vp(q, i));
      }
      A.add_block(F.plus, F.plus, pp.data());
      continue;
    }
    const double pen = kappa_p / F.h;
    pp.setZero();
    pm.setZero();
    mp.setZero();
    mm.setZero();
    for (int q = 0; q < fp.nq; ++q) {
      const double sp = bp[q].dot(n), sm = bm[q].dot(n);
      const double w = kappa_delta * fp.w[q];
      for (int i = 0; i < nd; ++i) {
        jp[i] = sp * fp.vp(q, i);   // [[(b.n) v]] plus part
        jm[i] = -sm * fp.vm(q, i);  // minus part
        ap[i] = 0.5 * bp[q].dot(fp.gp(q, i));
        am[i] = 0.5 * bm[q].dot(fp.gm(q, i));
      }
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) {
          pp(i, j) += w * (jp[j] * ap[i] + jp[i] * ap[j] - pen * jp[i] * jp[j]);
          pm(i, j) += w * (jm[j] * ap[i] + jp[i] * am[j] - pen * jp[i] * jm[j]);
          mp(i, j) += w * (jp[j] * am[i] + jm[i] * ap[j] - pen * jm[i] * jp[j]);
          mm(i, j) += w * (jm[j] * am[i] + jm[i] * am[j] - pen * jm[i] * jm[j]);
        }
    }
    A.add_block(F.plus, F.plus, pp.data());
    A.add_block(F.plus, F.minus, pm.data());
    A.add_block(F.minus, F.plus, mp.data());
    A.add_block(F.minus, F.minus, mm.data());
  }
  return A;
}

// ---------------------------------------------------------------------------
// Load vectors

/// <phi_i, f>
inline Vector assemble_load(const DgSpace& space, const ScalarFunction& f) {
  Vector v = Vector::Zero(space.num_dofs());
  const BasisTable& vt = space.volume_table();
  const int nd = space.dofs_per_cell();
  for (int c = 0; c < space.num_cells(); ++c) {
    const CellGeometry& g = space.geometry(c);
    for (int q = 0; q < vt.npoints; ++q) {
      const double fq = f(g.map(vt.ref_points[q])) * vt.weights[q] * g.detJ;
      for (int i = 0; i < nd; ++i) v[space.dof(c, i)] += fq * vt.value(q, i);
    }
  }
  return v;
}

/// Data available at a boundary quadrature point.
struct BoundaryPoint {
  Vec3 x;
  Vec3 n;
  double h;
  int cell;
  int q;
  const FacetPoints* facet = nullptr;
};

/// sum over boundary facets of the integral of g(point) * phi_i, with an
/// optional gradient part: integral of gvec(point) . grad(phi_i).
inline Vector assemble_boundary_load(const DgSpace& space,
                                     const std::function<double(const BoundaryPoint&)>& g,
                                     const std::function<Vec3(const BoundaryPoint&)>& gvec = {}) {
  Vector v = Vector::Zero(space.num_dofs());
  const int nd = space.dofs_per_cell();
  FacetPoints fp;
  for (const Facet& F : space.mesh().facets()) {
    if (!F.boundary()) continue;
    eval_facet(space, F, fp, static_cast<bool>(gvec));
    for (int q = 0; q < fp.nq; ++q) {
      const BoundaryPoint p{fp.x_plus[q], F.normal, F.h, F.plus, q, &fp};
      const double gv = g ? g(p) : 0.0;
      const Vec3 gg = gvec ? gvec(p) : Vec3::Zero();
      for (int i = 0; i < nd; ++i) {
        double s = gv * fp.vp(q, i);
        if (gvec) s += gg.dot(fp.gp(q, i));
        v[space.dof(F.plus, i)] += fp.w[q] * s;
      }
    }
  }
  return v;
}

/// Value of a field at a boundary quadrature point, from its owning cell.
inline double boundary_trace(const FieldVector& u, const BoundaryPoint& p) {
  const int nd = u.space->dofs_per_cell();
  const Eigen::Index base = u.space->dof(p.cell, 0);
  double s = 0.0;
  for (int i = 0; i < nd; ++i) s += p.facet->vp(p.q, i) * u.coeffs[base + i];
  return s;
}

/// Physical data of a time step that enters the load vectors.
struct ProblemData {
  double kappa_par = 1.0;
  double kappa_perp = 1.0;
  double kappa_p = kDefaultInteriorPenalty;
  double kappa_bc = 20.0;  // non-dimensional boundary penalty
  BoundaryKind bc = BoundaryKind::Dirichlet;
  TimeFunction source;          // S(x, t)
  TimeFunction T_bc;            // Dirichlet data
  TimeFunction q_par_bc;        // Neumann parallel flux
  TimeFunction q_perp_bc;       // Neumann perpendicular flux

  double kappa_delta() const noexcept { return kappa_par - kappa_perp; }
  void validate() const {
    if (!(kappa_perp > 0.0)) throw Error("kappa_perp must be positive");
    if (!(kappa_par >= kappa_perp)) throw Error("kappa_par must be at least kappa_perp");
    if (!(kappa_p > 0.0)) throw Error("kappa_p must be positive");
    if (!(kappa_bc >= 0.0)) throw Error("kappa_bc must be non-negative");
  }
};

struct LoadVectors {
  Vector F_T;
  Vector F_zeta;
};

/// Load vectors of the mixed system at time t. dt_eff is the step length
/// appearing in the boundary penalty kappa_bc h_e / dt_eff. boundary_guess is
/// the lagged inflow flux (Dirichlet) or lagged outflow temperature (Neumann).
inline LoadVectors assemble_rhs(const DgSpace& space, const MagneticField& B, const ProblemData& pd,
                                const FieldVector& boundary_guess, double t, double dt_eff) {
  LoadVectors out;
  const double kd = pd.kappa_delta();
  const double skd = std::sqrt(kd);
  out.F_T = pd.source ? assemble_load(space, [&](const Vec3& x) { return pd.source(x, t); })
                      : Vector::Zero(space.num_dofs());
  if (pd.bc == BoundaryKind::Dirichlet) {
    auto Tbc = [&](const Vec3& x) { return pd.T_bc ? pd.T_bc(x, t) : 0.0; };
    out.F_T += assemble_boundary_load(
        space,
        [&](const BoundaryPoint& p) {
          double v = pd.kappa_bc * p.h / dt_eff * Tbc(p.x);
          const double bn = B.b(p.x, p.cell).dot(p.n);
          if (bn < 0.0 && kd > 0.0) v += skd * bn * boundary_trace(boundary_guess, p);
          return v;
        },
        [&](const BoundaryPoint& p) -> Vec3 { return -pd.kappa_perp * Tbc(p.x) * p.n; });
    out.F_zeta = assemble_boundary_load(space, [&](const BoundaryPoint& p) {
      const double bn = B.b(p.x, p.cell).dot(p.n);
      return bn > 0.0 ? skd * bn * Tbc(p.x) : 0.0;
    });
  } else {
    auto qpar = [&](const Vec3& x) { return pd.q_par_bc ? pd.q_par_bc(x, t) : 0.0; };
    auto qperp = [&](const Vec3& x) { return pd.q_perp_bc ? pd.q_perp_bc(x, t) : 0.0; };
    out.F_T += assemble_boundary_load(space, [&](const BoundaryPoint& p) {
      const double bn = B.b(p.x, p.cell).dot(p.n);
      double v = (pd.kappa_perp / pd.kappa_par) * qpar(p.x) + qperp(p.x);
      if (bn < 0.0) v += kd / pd.kappa_par * qpar(p.x);
      return v;
    });
    out.F_zeta = assemble_boundary_load(space, [&](const BoundaryPoint& p) {
      const double bn = B.b(p.x, p.cell).dot(p.n);
      double v = pd.kappa_bc * p.h * bn * skd * qpar(p.x) / pd.kappa_par;
      if (bn > 0.0) v += skd * bn * boundary_trace(boundary_guess, p);
      return v;
    });
  }
  return out;
}

/// Load vector of the primal anisotropic form for Dirichlet data.
inline Vector assemble_primal_aniso_rhs(const DgSpace& space, const MagneticField& B, double kappa_delta,
                                        const ScalarFunction& T_bc, double kappa_p = 10.0) {
  if (kappa_delta == 0.0 || !T_bc) return Vector::Zero(space.num_dofs());
  return assemble_boundary_load(
      space,
      [&](const BoundaryPoint& p) { return 2.0 * kappa_delta * kappa_p / p.h * T_bc(p.x); },
      [&](const BoundaryPoint& p) -> Vec3 {
        const Vec3 b = B.b(p.x, p.cell);
        return -kappa_delta * b.dot(p.n) * T_bc(p.x) * b;
      });
}

/// All matrices of the mixed scheme.
struct AssembledOperators {
  BlockCsrMatrix M;
  BlockCsrMatrix M_BC_he;
  BlockCsrMatrix M_BC_heinv;
  BlockCsrMatrix L;
  BlockCsrMatrix G;
};

inline AssembledOperators assemble_operators(const DgSpace& space, const MagneticField& B,
                                             double kappa_p = kDefaultInteriorPenalty,
                                             BoundaryKind kind = BoundaryKind::Dirichlet) {
  AssembledOperators ops;
  ops.M = assemble_mass(space);
  ops.M_BC_he = assemble_boundary_mass(space, FacetWeight::H);
  ops.M_BC_heinv = assemble_boundary_mass(space, FacetWeight::InverseH);
  ops.L = assemble_ip_laplacian(space, kappa_p, kind);
  ops.G = assemble_transport(space, B);
  return ops;
}

}  // namespace anisoheat
