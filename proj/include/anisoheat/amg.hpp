#pragma once

// Algebraic multigrid on block matrices: reduction-based AIR for upwind
// transport operators and a scalar Ruge-Stueben hierarchy for SPD operators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/LU>

#include "anisoheat/sparse.hpp"

namespace anisoheat {

/// For each row i, the points j that i depends on strongly (j != i).
struct StrengthGraph {
  int n = 0;
  std::vector<std::size_t> ptr{0};
  std::vector<int> idx;

  std::span<const int> row(int i) const { return {idx.data() + ptr[i], idx.data() + ptr[i + 1]}; }
  std::size_t num_edges() const noexcept { return idx.size(); }
};

inline StrengthGraph transpose(const StrengthGraph& S) {
  StrengthGraph T;
  T.n = S.n;
  T.ptr.assign(S.n + 1, 0);
  for (int j : S.idx) ++T.ptr[j + 1];
  std::partial_sum(T.ptr.begin(), T.ptr.end(), T.ptr.begin());
  T.idx.resize(S.idx.size());
  std::vector<std::size_t> next(T.ptr.begin(), T.ptr.end() - 1);
  for (int i = 0; i < S.n; ++i)
    for (int j : S.row(i)) T.idx[next[j]++] = i;
  return T;
}

/// Block strength: w_ij >= theta * max_{k != i} w_ik on the condensed weights.
inline StrengthGraph strength(const CondensedGraph& g, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error("strength: theta must lie in (0, 1]");
  StrengthGraph S;
  S.n = g.n;
  S.ptr.assign(g.n + 1, 0);
  for (int i = 0; i < g.n; ++i) {
    double mx = 0.0;
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k)
      if (g.col_idx[k] != i) mx = std::max(mx, g.weights[k]);
    if (mx > 0.0) {
      for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k)
        if (g.col_idx[k] != i && g.weights[k] >= theta * mx) S.idx.push_back(g.col_idx[k]);
    }
    S.ptr[i + 1] = S.idx.size();
  }
  return S;
}

/// Classical scalar strength: -a_ij >= theta * max_{k != i} (-a_ik).
inline StrengthGraph classical_strength(const BlockCsrMatrix& A, double theta) {
  if (A.block_size() != 1) throw Error("classical_strength: scalar matrix expected");
  StrengthGraph S;
  S.n = A.block_rows();
  S.ptr.assign(S.n + 1, 0);
  const auto rp = A.row_ptr();
  const auto ci = A.col_idx();
  const auto v = A.values();
  for (int i = 0; i < S.n; ++i) {
    double mx = 0.0;
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
      if (ci[k] != i) mx = std::max(mx, -v[k]);
    if (mx > 0.0) {
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k)
        if (ci[k] != i && -v[k] >= theta * mx) S.idx.push_back(ci[k]);
    }
    S.ptr[i + 1] = S.idx.size();
  }
  return S;
}

enum class PointType : std::int8_t { F = 0, C = 1 };

/// Ruge-Stueben C/F splitting. Measures are |S^T_i| plus a uniform [0,1)
/// tie-breaker drawn from mt19937_64(seed). Undecided points left after the
/// first pass (including isolated ones) become C.
inline std::vector<PointType> rs_coarsen(const StrengthGraph& S, bool second_pass, std::uint64_t seed = 0) {
  const int n = S.n;
  const StrengthGraph ST = transpose(S);
  std::mt19937_64 gen(seed);
  std::vector<double> lambda(n);
  for (int i = 0; i < n; ++i)
    lambda[i] = static_cast<double>(ST.ptr[i + 1] - ST.ptr[i]) + static_cast<double>(gen() >> 11) * 0x1.0p-53;

  enum : std::int8_t { Undecided = -1 };
  std::vector<std::int8_t> state(n, Undecided);
  std::set<std::pair<double, int>> queue;
  for (int i = 0; i < n; ++i)
    if (ST.ptr[i + 1] > ST.ptr[i]) queue.insert({lambda[i], i});
  auto bump = [&](int k, double delta) {
    if (state[k] != Undecided) return;
    auto it = queue.find({lambda[k], k});
    if (it != queue.end()) queue.erase(it);
    lambda[k] += delta;
    if (lambda[k] > 0.0) queue.insert({lambda[k], k});
  };

  while (!queue.empty()) {
    const int i = std::prev(queue.end())->second;
    queue.erase(std::prev(queue.end()));
    if (state[i] != Undecided) continue;
    state[i] = static_cast<std::int8_t>(PointType::C);
    for (int j : ST.row(i)) {
      if (state[j] != Undecided) continue;
      auto it = queue.find({lambda[j], j});
      if (it != queue.end()) queue.erase(it);
      state[j] = static_cast<std::int8_t>(PointType::F);
      for (int k : S.row(j)) bump(k, 1.0);
    }
    for (int k : S.row(i)) bump(k, -1.0);
  }
  std::vector<PointType> split(n);
  for (int i = 0; i < n; ++i)
    split[i] = state[i] == static_cast<std::int8_t>(PointType::F) ? PointType::F : PointType::C;

  if (second_pass) {
    std::vector<int> mark(n, -1);
    for (int i = 0; i < n; ++i) {
      if (split[i] != PointType::F) continue;
      for (int k : S.row(i))
        if (split[k] == PointType::C) mark[k] = i;
      int tentative = -1;
      bool promote_self = false;
      for (int j : S.row(i)) {
        if (split[j] != PointType::F) continue;
        bool shared = false;
        for (int k : S.row(j))
          if (mark[k] == i) {
            shared = true;
            break;
          }
        if (shared) continue;
        if (tentative >= 0) {
          promote_self = true;
          break;
        }
        tentative = j;
        mark[j] = i;
      }
      if (promote_self) {
        split[i] = PointType::C;
      } else if (tentative >= 0) {
        split[tentative] = PointType::C;
      }
    }
  }
  return split;
}

/// Coarse numbering of C points (-1 for F points).
inline std::vector<int> coarse_numbering(const std::vector<PointType>& split, int& nc) {
  std::vector<int> id(split.size(), -1);
  nc = 0;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == PointType::C) id[i] = nc++;
  return id;
}

/// Injection at C points; each F point copies its strongest strong C
/// neighbour (largest weight, ties to the lowest index).
inline BlockCsrMatrix one_point_interp(const CondensedGraph& g, const StrengthGraph& S,
                                       const std::vector<PointType>& split, int block_size) {
  int nc = 0;
  const auto cid = coarse_numbering(split, nc);
  std::vector<std::size_t> ptr(g.n + 1, 0);
  std::vector<int> cols;
  for (int i = 0; i < g.n; ++i) {
    if (split[i] == PointType::C) {
      cols.push_back(cid[i]);
    } else {
      int best = -1;
      double bw = -1.0;
      for (int j : S.row(i)) {
        if (split[j] != PointType::C) continue;
        double w = 0.0;
        for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k)
          if (g.col_idx[k] == j) w = g.weights[k];
        if (w > bw || (w == bw && j < best)) {
          bw = w;
          best = j;
        }
      }
      if (best >= 0) cols.push_back(cid[best]);
    }
    ptr[i + 1] = cols.size();
  }
  const std::size_t bb = static_cast<std::size_t>(block_size) * block_size;
  std::vector<double> vals(cols.size() * bb, 0.0);
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (int r = 0; r < block_size; ++r) vals[k * bb + r * block_size + r] = 1.0;
  return BlockCsrMatrix(block_size, g.n, nc, std::move(ptr), std::move(cols), std::move(vals));
}

struct RestrictionResult {
  BlockCsrMatrix R;
  int fallbacks = 0;     // rows reduced to injection
  int regularized = 0;   // local systems shifted before solving
};

/// Distance-one local AIR. For each C point c with strong F neighbours N_c
/// (taken from S_R) the block row is [-W_c, I] where W_c A[N_c, N_c] = A[c, N_c].
inline RestrictionResult lair_restriction(const BlockCsrMatrix& A, const std::vector<PointType>& split,
                                          const StrengthGraph& S_R) {
  const int b = A.block_size();
  const std::size_t bb = A.block_area();
  int nc = 0;
  const auto cid = coarse_numbering(split, nc);
  RestrictionResult res;
  std::vector<std::size_t> ptr(nc + 1, 0);
  std::vector<int> cols;
  std::vector<double> vals;
  std::vector<std::pair<int, const double*>> row_entries;
  for (int c = 0; c < A.block_rows(); ++c) {
    if (split[c] != PointType::C) continue;
    std::vector<int> N;
    for (int j : S_R.row(c))
      if (split[j] == PointType::F) N.push_back(j);
    std::sort(N.begin(), N.end());
    const int m = static_cast<int>(N.size());
    DenseMatrix W;
    bool ok = m > 0;
    if (ok) {
      DenseMatrix K = DenseMatrix::Zero(static_cast<Eigen::Index>(m) * b, static_cast<Eigen::Index>(m) * b);
      DenseMatrix rhs = DenseMatrix::Zero(b, static_cast<Eigen::Index>(m) * b);
      for (int p = 0; p < m; ++p) {
        for (int q = 0; q < m; ++q) {
          const auto k = A.find(N[p], N[q]);
          if (k >= 0) K.block(p * b, q * b, b, b) = A.block(static_cast<std::size_t>(k));
        }
        const auto k = A.find(c, N[p]);
        if (k >= 0) rhs.block(0, p * b, b, b) = A.block(static_cast<std::size_t>(k));
      }
      // W K = rhs  <=>  K^T W^T = rhs^T
      const DenseMatrix Kt = K.transpose();
      Eigen::PartialPivLU<DenseMatrix> lu(Kt);
      if (!(lu.rcond() > 1e-14)) {
        ++res.regularized;
        DenseMatrix Kr = Kt;
        Kr.diagonal().array() += 1e-12 * K.norm();
        lu.compute(Kr);
      }
      if (lu.rcond() > 1e-14) {
        W = lu.solve(DenseMatrix(rhs.transpose())).transpose();
        ok = W.allFinite();
      } else {
        ok = false;
      }
      if (!ok) ++res.fallbacks;
    }
    // assemble row in sorted column order: F neighbours and c itself
    std::vector<std::pair<int, int>> order;  // (fine column, position in N or -1)
    if (ok)
      for (int p = 0; p < m; ++p) order.push_back({N[p], p});
    order.push_back({c, -1});
    std::sort(order.begin(), order.end());
    for (const auto& [col, p] : order) {
      cols.push_back(col);
      const std::size_t base = vals.size();
      vals.resize(base + bb, 0.0);
      if (p < 0) {
        for (int r = 0; r < b; ++r) vals[base + r * b + r] = 1.0;
      } else {
        for (int r = 0; r < b; ++r)
          for (int s = 0; s < b; ++s) vals[base + r * b + s] = -W(r, p * b + s);
      }
    }
    ptr[cid[c] + 1] = cols.size();
  }
  res.R = BlockCsrMatrix(b, nc, A.block_rows(), std::move(ptr), std::move(cols), std::move(vals));
  return res;
}

/// Block Jacobi sweeps over F, F, C with the residual frozen within a sweep.
inline void ffc_block_jacobi(const BlockCsrMatrix& A, const BlockDiagonal& Dinv, std::span<const int> f_points,
                             std::span<const int> c_points, Vector& x, const Vector& b) {
  const int bs = A.block_size();
  Vector r(x.size());
  Vector corr(bs);
  auto sweep = [&](std::span<const int> pts) {
    A.residual_rows(pts, x, b, r);
    for (int i : pts) {
      const auto D = Dinv.block(i);
      const auto seg = r.segment(static_cast<Eigen::Index>(i) * bs, bs);
      corr.noalias() = D * seg;
      x.segment(static_cast<Eigen::Index>(i) * bs, bs) += corr;
    }
  };
  sweep(f_points);
  sweep(f_points);
  sweep(c_points);
}

/// Classical direct interpolation with separate scaling of negative and
/// positive couplings.
inline BlockCsrMatrix direct_interp(const BlockCsrMatrix& A, const StrengthGraph& S,
                                    const std::vector<PointType>& split) {
  if (A.block_size() != 1) throw Error("direct_interp: scalar matrix expected");
  int nc = 0;
  const auto cid = coarse_numbering(split, nc);
  const auto rp = A.row_ptr();
  const auto ci = A.col_idx();
  const auto v = A.values();
  std::vector<std::size_t> ptr(A.block_rows() + 1, 0);
  std::vector<int> cols;
  std::vector<double> vals;
  std::vector<char> strong_c(A.block_rows(), 0);
  for (int i = 0; i < A.block_rows(); ++i) {
    if (split[i] == PointType::C) {
      cols.push_back(cid[i]);
      vals.push_back(1.0);
      ptr[i + 1] = cols.size();
      continue;
    }
    for (int j : S.row(i))
      if (split[j] == PointType::C) strong_c[j] = 1;
    double diag = 0.0, neg_all = 0.0, pos_all = 0.0, neg_c = 0.0, pos_c = 0.0;
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      const int j = ci[k];
      if (j == i) {
        diag += v[k];
        continue;
      }
      if (v[k] < 0.0) {
        neg_all += v[k];
        if (strong_c[j]) neg_c += v[k];
      } else {
        pos_all += v[k];
        if (strong_c[j]) pos_c += v[k];
      }
    }
    double alpha = 0.0, beta = 0.0;
    if (neg_c != 0.0) alpha = neg_all / neg_c;
    else diag += neg_all;
    if (pos_c != 0.0) beta = pos_all / pos_c;
    else diag += pos_all;
    std::vector<std::pair<int, double>> entries;
    if (diag != 0.0) {
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
        const int j = ci[k];
        if (j == i || !strong_c[j]) continue;
        const double w = v[k] < 0.0 ? -alpha * v[k] / diag : -beta * v[k] / diag;
        if (w != 0.0) entries.push_back({cid[j], w});
      }
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& [c, w] : entries) {
      cols.push_back(c);
      vals.push_back(w);
    }
    for (int j : S.row(i)) strong_c[j] = 0;
    ptr[i + 1] = cols.size();
  }
  return BlockCsrMatrix(1, A.block_rows(), nc, std::move(ptr), std::move(cols), std::move(vals));
}

enum class AmgVariant { AIR, Classical };

struct AmgParams {
  double theta_C = 0.01;
  double theta_R = 0.25;
  double theta_classical = 0.25;
  int max_coarse = 64;  // block rows on the coarsest level
  int max_levels = 25;
  bool second_pass = true;
  std::uint64_t seed = 0;
};

struct AmgLevel {
  BlockCsrMatrix A;
  BlockCsrMatrix P;
  BlockCsrMatrix R;
  std::vector<PointType> split;
  std::vector<int> f_points;
  std::vector<int> c_points;
  BlockDiagonal Dinv;
  int restriction_fallbacks = 0;
};

class AmgHierarchy {
 public:
  AmgHierarchy() = default;

  /// AIR hierarchy: block strength, RS splitting, one-point P, local AIR R.
  static AmgHierarchy build_air(const BlockCsrMatrix& A, const AmgParams& p = {}) {
    AmgHierarchy h;
    h.variant_ = AmgVariant::AIR;
    h.params_ = p;
    BlockCsrMatrix cur = A;
    while (true) {
      AmgLevel lvl;
      lvl.A = std::move(cur);
      const bool last = lvl.A.block_rows() <= p.max_coarse || static_cast<int>(h.levels_.size()) + 1 >= p.max_levels;
      if (!last) {
        const CondensedGraph g = condense(lvl.A);
        const StrengthGraph S_C = strength(g, p.theta_C);
        lvl.split = rs_coarsen(S_C, p.second_pass, p.seed + h.levels_.size());
        int nc = 0;
        coarse_numbering(lvl.split, nc);
        if (nc == 0 || nc == lvl.A.block_rows()) {
          h.levels_.push_back(std::move(lvl));
          break;
        }
        const StrengthGraph S_R = strength(g, p.theta_R);
        lvl.P = one_point_interp(g, S_C, lvl.split, lvl.A.block_size());
        RestrictionResult rr = lair_restriction(lvl.A, lvl.split, S_R);
        lvl.R = std::move(rr.R);
        lvl.restriction_fallbacks = rr.fallbacks;
        h.fallbacks_ += rr.fallbacks;
        lvl.Dinv = block_diag_inverse(lvl.A);
        for (int i = 0; i < lvl.A.block_rows(); ++i)
          (lvl.split[i] == PointType::F ? lvl.f_points : lvl.c_points).push_back(i);
        cur = multiply(lvl.R, multiply(lvl.A, lvl.P));
        h.levels_.push_back(std::move(lvl));
        continue;
      }
      h.levels_.push_back(std::move(lvl));
      break;
    }
    h.factor_coarsest();
    return h;
  }

  /// Scalar classical hierarchy: RS splitting with second pass, direct
  /// interpolation, Galerkin R = P^T, symmetric Gauss-Seidel smoothing.
  static AmgHierarchy build_classical(const BlockCsrMatrix& A_block, const AmgParams& p = {}) {
    AmgHierarchy h;
    h.variant_ = AmgVariant::Classical;
    h.params_ = p;
    BlockCsrMatrix cur = to_scalar(A_block);
    while (true) {
      AmgLevel lvl;
      lvl.A = std::move(cur);
      const bool last = lvl.A.block_rows() <= p.max_coarse || static_cast<int>(h.levels_.size()) + 1 >= p.max_levels;
      if (!last) {
        const StrengthGraph S = classical_strength(lvl.A, p.theta_classical);
        lvl.split = rs_coarsen(S, p.second_pass, p.seed + h.levels_.size());
        int nc = 0;
        coarse_numbering(lvl.split, nc);
        if (nc == 0 || nc == lvl.A.block_rows()) {
          h.levels_.push_back(std::move(lvl));
          break;
        }
        lvl.P = direct_interp(lvl.A, S, lvl.split);
        lvl.R = transpose(lvl.P);
        cur = multiply(lvl.R, multiply(lvl.A, lvl.P));
        h.levels_.push_back(std::move(lvl));
        continue;
      }
      h.levels_.push_back(std::move(lvl));
      break;
    }
    h.factor_coarsest();
    return h;
  }

  AmgVariant variant() const noexcept { return variant_; }
  int num_levels() const noexcept { return static_cast<int>(levels_.size()); }
  const AmgLevel& level(int l) const { return levels_[l]; }
  int restriction_fallbacks() const noexcept { return fallbacks_; }
  Eigen::Index size() const { return levels_.front().A.rows(); }

  double operator_complexity() const {
    double total = 0.0;
    for (const auto& l : levels_) total += static_cast<double>(l.A.nnz_blocks()) * l.A.block_area();
    return total / (static_cast<double>(levels_.front().A.nnz_blocks()) * levels_.front().A.block_area());
  }

  /// One V-cycle starting from the current x.
  void vcycle(const Vector& b, Vector& x) const { cycle(0, b, x); }

  /// One V-cycle from a zero initial guess.
  Vector apply(const Vector& b) const {
    Vector x = Vector::Zero(b.size());
    cycle(0, b, x);
    return x;
  }

  /// CSV summary: level, block_rows, rows, nnz_blocks, nnz, c_points.
  void write_summary(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "level,block_rows,rows,nnz_blocks,nnz,c_points,restriction_fallbacks\n";
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      const auto& L = levels_[l];
      out << l << "," << L.A.block_rows() << "," << L.A.rows() << "," << L.A.nnz_blocks() << ","
          << L.A.nnz_blocks() * L.A.block_area() << "," << L.c_points.size() << ","
          << L.restriction_fallbacks << "\n";
    }
    out << "# operator_complexity," << std::setprecision(6) << operator_complexity() << "\n";
  }

 private:
  void factor_coarsest() {
    const DenseMatrix D = levels_.back().A.to_dense();
    coarse_lu_.compute(D);
  }

  void cycle(std::size_t l, const Vector& b, Vector& x) const {
    const AmgLevel& L = levels_[l];
    if (l + 1 == levels_.size()) {
      x = coarse_lu_.solve(b);
      return;
    }
    if (variant_ == AmgVariant::Classical) gauss_seidel(L.A, b, x, true);
    Vector r = b;
    L.A.multiply_add(-1.0, x, r);
    const Vector bc = L.R * r;
    Vector xc = Vector::Zero(bc.size());
    cycle(l + 1, bc, xc);
    L.P.multiply_add(1.0, xc, x);
    if (variant_ == AmgVariant::Classical) {
      gauss_seidel(L.A, b, x, false);
    } else {
      ffc_block_jacobi(L.A, L.Dinv, L.f_points, L.c_points, x, b);
    }
  }

  static void gauss_seidel(const BlockCsrMatrix& A, const Vector& b, Vector& x, bool forward) {
    const auto rp = A.row_ptr();
    const auto ci = A.col_idx();
    const auto v = A.values();
    const int n = A.block_rows();
    auto relax = [&](int i) {
      double s = b[i], d = 0.0;
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
        if (ci[k] == i) d = v[k];
        else s -= v[k] * x[ci[k]];
      }
      if (d != 0.0) x[i] = s / d;
    };
    if (forward) {
      for (int i = 0; i < n; ++i) relax(i);
    } else {
      for (int i = n - 1; i >= 0; --i) relax(i);
    }
  }

  AmgVariant variant_ = AmgVariant::AIR;
  AmgParams params_;
  std::vector<AmgLevel> levels_;
  Eigen::PartialPivLU<DenseMatrix> coarse_lu_;
  int fallbacks_ = 0;
};

}  // namespace anisoheat
