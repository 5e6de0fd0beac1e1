#pragma once

// Perturbed structured triangle meshes of the unit square, refinement by
// edge splitting, and straight extrusion to prisms.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "anisoheat/common.hpp"

namespace anisoheat {

struct BoundaryEdge {
  std::array<int, 2> vertices;  // counterclockwise w.r.t. the owning triangle
  Vec2 normal;                   // outward unit normal
  int triangle = -1;
  int local_edge = -1;
};

struct BaseMesh2d {
  double length = 1.0;
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;

  std::size_t num_triangles() const noexcept { return triangles.size(); }

  double signed_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Vec2 a = vertices[tri[1]] - vertices[tri[0]];
    const Vec2 b = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }

  double min_area() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < triangles.size(); ++t) m = std::min(m, signed_area(t));
    return m;
  }
};

namespace detail {

inline std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

/// Recomputes the boundary edge list from edge multiplicities.
inline void collect_boundary(BaseMesh2d& m) {
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> owners;
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
    for (int e = 0; e < 3; ++e)
      owners[edge_key(m.triangles[t][e], m.triangles[t][(e + 1) % 3])].push_back({t, e});
  m.boundary_edges.clear();
  for (const auto& [key, list] : owners) {
    if (list.size() > 2) throw Error("mesh: edge shared by more than two triangles");
    if (list.size() != 1) continue;
    const auto [t, e] = list.front();
    BoundaryEdge be;
    be.vertices = {m.triangles[t][e], m.triangles[t][(e + 1) % 3]};
    const Vec2 d = m.vertices[be.vertices[1]] - m.vertices[be.vertices[0]];
    be.normal = Vec2(d.y(), -d.x()) / d.norm();
    be.triangle = t;
    be.local_edge = e;
    m.boundary_edges.push_back(be);
  }
}

}  // namespace detail

/// Regular n x n grid of right triangles (fixed diagonal) with interior
/// vertices displaced uniformly in [-perturb, perturb] * dx per coordinate.
/// Random numbers come from std::mt19937_64(seed) mapped to [0,1) by taking
/// the top 53 bits, so meshes are bit-identical across platforms.
inline BaseMesh2d build_base_mesh(int n, double length = 1.0, double perturb = 0.06,
                                  std::uint64_t seed = 0) {
  if (n < 2) throw Error("build_base_mesh: n must be at least 2");
  if (!(perturb >= 0.0 && perturb < 0.5)) throw Error("build_base_mesh: perturb must lie in [0, 0.5)");
  if (!(length > 0.0)) throw Error("build_base_mesh: length must be positive");
  BaseMesh2d m;
  m.length = length;
  const double dx = length / n;
  std::mt19937_64 gen(seed);
  auto uniform = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  m.vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      Vec2 p(i * dx, j * dx);
      if (i == n) p.x() = length;
      if (j == n) p.y() = length;
      if (i > 0 && i < n && j > 0 && j < n) {
        const double ux = uniform();
        const double uy = uniform();
        p.x() += perturb * dx * (2.0 * ux - 1.0);
        p.y() += perturb * dx * (2.0 * uy - 1.0);
      }
      m.vertices.push_back(p);
    }
  }
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }
  }
  detail::collect_boundary(m);
  if (m.min_area() <= 0.0) throw Error("build_base_mesh: perturbation produced an inverted triangle");
  return m;
}

/// Splits every triangle into four through its edge midpoints.
inline BaseMesh2d refine(const BaseMesh2d& coarse) {
  BaseMesh2d m;
  m.length = coarse.length;
  m.vertices = coarse.vertices;
  std::map<std::pair<int, int>, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto key = detail::edge_key(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    const int id = static_cast<int>(m.vertices.size());
    m.vertices.push_back(0.5 * (coarse.vertices[a] + coarse.vertices[b]));
    mid.emplace(key, id);
    return id;
  };
  m.triangles.reserve(coarse.triangles.size() * 4);
  for (const auto& t : coarse.triangles) {
    const int a = t[0], b = t[1], c = t[2];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    m.triangles.push_back({a, ab, ca});
    m.triangles.push_back({ab, b, bc});
    m.triangles.push_back({ca, bc, c});
    m.triangles.push_back({ab, bc, ca});
  }
  detail::collect_boundary(m);
  return m;
}

inline BaseMesh2d refine(const BaseMesh2d& coarse, int times) {
  BaseMesh2d m = coarse;
  for (int r = 0; r < times; ++r) m = refine(m);
  return m;
}

/// Prism facet. Local facet ids: 0..2 vertical (triangle edge e from vertex e
/// to e+1), 3 bottom, 4 top.
struct Facet {
  int plus = -1;
  int minus = -1;  // -1 on the domain boundary
  int local_plus = -1;
  int local_minus = -1;
  Vec3 normal = Vec3::Zero();  // unit normal, outward from the plus cell
  double area = 0.0;
  double h = 0.0;  // (|K+| + |K-|) / (2 area), with |K-| = 0 on the boundary
  bool boundary() const noexcept { return minus < 0; }
  bool horizontal() const noexcept { return local_plus >= 3; }
};

class PrismMesh {
 public:
  /// Straight extrusion of base over [0, Lz] with n_layers layers.
  static PrismMesh extrude(BaseMesh2d base, int n_layers, double Lz, bool periodic_z) {
    if (n_layers < 1) throw Error("extrude: need at least one layer");
    if (periodic_z && n_layers < 2) throw Error("extrude: periodic extrusion needs at least two layers");
    if (!(Lz > 0.0)) throw Error("extrude: Lz must be positive");
    PrismMesh m;
    m.base_ = std::move(base);
    m.layers_ = n_layers;
    m.Lz_ = Lz;
    m.periodic_ = periodic_z;
    m.planar_ = false;
    m.build();
    return m;
  }

  /// A single unit-height layer without horizontal facets. Combined with a
  /// z-constant space this is an exact two-dimensional discretization.
  static PrismMesh planar(BaseMesh2d base) {
    PrismMesh m;
    m.base_ = std::move(base);
    m.layers_ = 1;
    m.Lz_ = 1.0;
    m.periodic_ = false;
    m.planar_ = true;
    m.build();
    return m;
  }

  const BaseMesh2d& base() const noexcept { return base_; }
  int num_layers() const noexcept { return layers_; }
  double Lz() const noexcept { return Lz_; }
  double dz() const noexcept { return Lz_ / layers_; }
  bool periodic_z() const noexcept { return periodic_; }
  bool is_planar() const noexcept { return planar_; }
  int num_triangles() const noexcept { return static_cast<int>(base_.triangles.size()); }
  int num_cells() const noexcept { return num_triangles() * layers_; }

  int triangle_of(int cell) const noexcept { return cell % num_triangles(); }
  int layer_of(int cell) const noexcept { return cell / num_triangles(); }
  int cell_index(int tri, int layer) const noexcept { return layer * num_triangles() + tri; }
  double z0(int cell) const noexcept { return layer_of(cell) * dz(); }
  double volume(int cell) const { return base_.signed_area(triangle_of(cell)) * dz(); }

  const std::vector<Facet>& facets() const noexcept { return facets_; }
  /// Facet index for (cell, local facet); -1 for omitted planar horizontals.
  int cell_facet(int cell, int local) const noexcept { return cell_facets_[cell][local]; }

  std::array<Vec3, 6> cell_vertices(int cell) const {
    const auto& t = base_.triangles[triangle_of(cell)];
    const double za = z0(cell), zb = za + dz();
    std::array<Vec3, 6> v;
    for (int q = 0; q < 3; ++q) {
      const Vec2& p = base_.vertices[t[q]];
      v[q] = Vec3(p.x(), p.y(), za);
      v[q + 3] = Vec3(p.x(), p.y(), zb);
    }
    return v;
  }

  /// Physical corner coordinates of a facet as seen from the given side.
  std::vector<Vec3> facet_vertices(int cell, int local) const {
    const auto v = cell_vertices(cell);
    if (local < 3) {
      const int a = local, b = (local + 1) % 3;
      return {v[a], v[b], v[b + 3], v[a + 3]};
    }
    if (local == 3) return {v[0], v[1], v[2]};
    return {v[3], v[4], v[5]};
  }

  /// Plain-text dump: vertices, prisms (six vertex coordinates), facets.
  void write_text(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << std::setprecision(17);
    out << "# base vertices: index x y\n";
    out << "vertices " << base_.vertices.size() << "\n";
    for (std::size_t i = 0; i < base_.vertices.size(); ++i)
      out << i << " " << base_.vertices[i].x() << " " << base_.vertices[i].y() << "\n";
    out << "# base triangles: index v0 v1 v2 (counterclockwise)\n";
    out << "triangles " << base_.triangles.size() << "\n";
    for (std::size_t t = 0; t < base_.triangles.size(); ++t)
      out << t << " " << base_.triangles[t][0] << " " << base_.triangles[t][1] << " "
          << base_.triangles[t][2] << "\n";
    out << "# extrusion: layers Lz periodic planar\n";
    out << "extrusion " << layers_ << " " << Lz_ << " " << (periodic_ ? 1 : 0) << " "
        << (planar_ ? 1 : 0) << "\n";
    out << "# facets: index plus local_plus minus local_minus nx ny nz area h\n";
    out << "facets " << facets_.size() << "\n";
    for (std::size_t f = 0; f < facets_.size(); ++f) {
      const Facet& F = facets_[f];
      out << f << " " << F.plus << " " << F.local_plus << " " << F.minus << " " << F.local_minus
          << " " << F.normal.x() << " " << F.normal.y() << " " << F.normal.z() << " " << F.area
          << " " << F.h << "\n";
    }
  }

 private:
  void build() {
    const int nt = num_triangles();
    if (nt == 0) throw Error("extrude: empty base mesh");
    cell_facets_.assign(static_cast<std::size_t>(num_cells()), {-1, -1, -1, -1, -1});

    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> owners;
    for (int t = 0; t < nt; ++t)
      for (int e = 0; e < 3; ++e)
        owners[detail::edge_key(base_.triangles[t][e], base_.triangles[t][(e + 1) % 3])].push_back({t, e});

    const double h_z = dz();
    for (int layer = 0; layer < layers_; ++layer) {
      for (const auto& [key, list] : owners) {
        const auto [t0, e0] = list.front();
        const auto& tri = base_.triangles[t0];
        const Vec2 d = base_.vertices[tri[(e0 + 1) % 3]] - base_.vertices[tri[e0]];
        Facet F;
        F.plus = cell_index(t0, layer);
        F.local_plus = e0;
        F.normal = Vec3(d.y(), -d.x(), 0.0) / d.norm();
        F.area = d.norm() * h_z;
        if (list.size() == 2) {
          F.minus = cell_index(list[1].first, layer);
          F.local_minus = list[1].second;
          F.h = (volume(F.plus) + volume(F.minus)) / (2.0 * F.area);
        } else {
          F.h = volume(F.plus) / (2.0 * F.area);
        }
        add_facet(F);
      }
    }
    if (planar_) return;

    for (int layer = 0; layer < layers_; ++layer) {
      for (int t = 0; t < nt; ++t) {
        const double tri_area = base_.signed_area(t);
        const int cell = cell_index(t, layer);
        if (layer + 1 < layers_ || periodic_) {
          Facet F;
          F.plus = cell;
          F.local_plus = 4;
          F.minus = cell_index(t, (layer + 1) % layers_);
          F.local_minus = 3;
          F.normal = Vec3(0, 0, 1);
          F.area = tri_area;
          F.h = (volume(F.plus) + volume(F.minus)) / (2.0 * F.area);
          add_facet(F);
        } else {
          Facet F;
          F.plus = cell;
          F.local_plus = 4;
          F.normal = Vec3(0, 0, 1);
          F.area = tri_area;
          F.h = volume(cell) / (2.0 * F.area);
          add_facet(F);
        }
        if (layer == 0 && !periodic_) {
          Facet F;
          F.plus = cell;
          F.local_plus = 3;
          F.normal = Vec3(0, 0, -1);
          F.area = tri_area;
          F.h = volume(cell) / (2.0 * F.area);
          add_facet(F);
        }
      }
    }
  }

  void add_facet(const Facet& F) {
    const int id = static_cast<int>(facets_.size());
    facets_.push_back(F);
    cell_facets_[F.plus][F.local_plus] = id;
    if (F.minus >= 0) cell_facets_[F.minus][F.local_minus] = id;
  }

  BaseMesh2d base_;
  int layers_ = 1;
  double Lz_ = 1.0;
  bool periodic_ = false;
  bool planar_ = false;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 5>> cell_facets_;
};

}  // namespace anisoheat
