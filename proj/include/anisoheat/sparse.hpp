#pragma once

// Block compressed-row storage with dense b x b blocks. One block row per
// mesh cell; a block size of 1 is an ordinary scalar CSR matrix.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "anisoheat/common.hpp"

namespace anisoheat {

class BlockCsrMatrix {
 public:
  using BlockMap =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstBlockMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  BlockCsrMatrix() = default;

  BlockCsrMatrix(int block_size, int block_rows, int block_cols,
                 std::vector<std::size_t> row_ptr, std::vector<int> col_idx,
                 std::vector<double> values)
      : b_(block_size),
        nbr_(block_rows),
        nbc_(block_cols),
        row_ptr_(std::move(row_ptr)),
        col_idx_(std::move(col_idx)),
        values_(std::move(values)) {
    if (b_ < 1) throw Error("BlockCsrMatrix: block size must be positive");
    if (row_ptr_.size() != static_cast<std::size_t>(nbr_) + 1)
      throw Error("BlockCsrMatrix: row pointer length mismatch");
    if (row_ptr_.back() != col_idx_.size())
      throw Error("BlockCsrMatrix: column index length mismatch");
    if (values_.size() != col_idx_.size() * block_area())
      throw Error("BlockCsrMatrix: value length mismatch");
    for (int i = 0; i < nbr_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        if (col_idx_[k] < 0 || col_idx_[k] >= nbc_)
          throw Error("BlockCsrMatrix: column index out of range");
        if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1])
          throw Error("BlockCsrMatrix: column indices must be sorted and unique");
      }
    }
  }

  /// Zero-valued matrix with the given per-row column lists (sorted on entry).
  static BlockCsrMatrix from_pattern(int block_size, int block_rows, int block_cols,
                                     std::vector<std::vector<int>> rows) {
    std::vector<std::size_t> ptr(block_rows + 1, 0);
    std::vector<int> cols;
    for (int i = 0; i < block_rows; ++i) {
      auto& r = rows[i];
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      cols.insert(cols.end(), r.begin(), r.end());
      ptr[i + 1] = cols.size();
    }
    std::vector<double> vals(cols.size() * static_cast<std::size_t>(block_size) * block_size, 0.0);
    return BlockCsrMatrix(block_size, block_rows, block_cols, std::move(ptr), std::move(cols),
                          std::move(vals));
  }

  static BlockCsrMatrix identity(int block_size, int n) {
    std::vector<std::size_t> ptr(n + 1);
    std::vector<int> cols(n);
    std::vector<double> vals(static_cast<std::size_t>(n) * block_size * block_size, 0.0);
    for (int i = 0; i < n; ++i) {
      ptr[i + 1] = i + 1;
      cols[i] = i;
      for (int r = 0; r < block_size; ++r)
        vals[static_cast<std::size_t>(i) * block_size * block_size + r * block_size + r] = 1.0;
    }
    return BlockCsrMatrix(block_size, n, n, std::move(ptr), std::move(cols), std::move(vals));
  }

  int block_size() const noexcept { return b_; }
  int block_rows() const noexcept { return nbr_; }
  int block_cols() const noexcept { return nbc_; }
  Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(nbr_) * b_; }
  Eigen::Index cols() const noexcept { return static_cast<Eigen::Index>(nbc_) * b_; }
  std::size_t nnz_blocks() const noexcept { return col_idx_.size(); }
  std::size_t block_area() const noexcept { return static_cast<std::size_t>(b_) * b_; }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const int> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  const double* block_data(std::size_t k) const noexcept { return values_.data() + k * block_area(); }
  double* block_data(std::size_t k) noexcept { return values_.data() + k * block_area(); }
  ConstBlockMap block(std::size_t k) const { return ConstBlockMap(block_data(k), b_, b_); }
  BlockMap block(std::size_t k) { return BlockMap(block_data(k), b_, b_); }

  /// Storage position of block (i, j), or -1 when it is not in the pattern.
  std::ptrdiff_t find(int i, int j) const noexcept {
    auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return -1;
    return it - col_idx_.begin();
  }

  /// Adds a row-major b x b block into position (i, j), which must exist.
  void add_block(int i, int j, const double* blk) {
    const auto k = find(i, j);
    if (k < 0) throw Error("BlockCsrMatrix::add_block: block not in sparsity pattern");
    double* dst = block_data(static_cast<std::size_t>(k));
    for (std::size_t e = 0; e < block_area(); ++e) dst[e] += blk[e];
  }

  /// y += alpha * A x
  void multiply_add(double alpha, const Vector& x, Vector& y) const {
    if (x.size() != cols() || y.size() != rows())
      throw Error("BlockCsrMatrix::multiply: dimension mismatch");
    const int b = b_;
    const double* xv = x.data();
    double* yv = y.data();
    if (b == 1) {
      for (int i = 0; i < nbr_; ++i) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * xv[col_idx_[k]];
        yv[i] += alpha * s;
      }
      return;
    }
    std::vector<double> acc(b);
    for (int i = 0; i < nbr_; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const double* blk = block_data(k);
        const double* xj = xv + static_cast<std::size_t>(col_idx_[k]) * b;
        for (int r = 0; r < b; ++r) {
          const double* row = blk + static_cast<std::size_t>(r) * b;
          double s = 0.0;
          for (int c = 0; c < b; ++c) s += row[c] * xj[c];
          acc[r] += s;
        }
      }
      double* yi = yv + static_cast<std::size_t>(i) * b;
      for (int r = 0; r < b; ++r) yi[r] += alpha * acc[r];
    }
  }

  void multiply(const Vector& x, Vector& y) const {
    y.setZero(rows());
    multiply_add(1.0, x, y);
  }

  Vector operator*(const Vector& x) const {
    Vector y = Vector::Zero(rows());
    multiply_add(1.0, x, y);
    return y;
  }

  /// Row-restricted residual r_i = b_i - (A x)_i for the listed block rows only.
  void residual_rows(std::span<const int> block_rows_subset, const Vector& x, const Vector& rhs,
                     Vector& r) const {
    const int b = b_;
    for (int i : block_rows_subset) {
      for (int q = 0; q < b; ++q) r[static_cast<Eigen::Index>(i) * b + q] = rhs[static_cast<Eigen::Index>(i) * b + q];
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const double* blk = block_data(k);
        const double* xj = x.data() + static_cast<std::size_t>(col_idx_[k]) * b;
        for (int q = 0; q < b; ++q) {
          double s = 0.0;
          for (int c = 0; c < b; ++c) s += blk[q * b + c] * xj[c];
          r[static_cast<Eigen::Index>(i) * b + q] -= s;
        }
      }
    }
  }

  void scale(double alpha) {
    for (double& v : values_) v *= alpha;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  /// Max absolute row sum over scalar rows.
  double inf_norm() const {
    double best = 0.0;
    for (int i = 0; i < nbr_; ++i) {
      for (int r = 0; r < b_; ++r) {
        double s = 0.0;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
          for (int c = 0; c < b_; ++c) s += std::abs(block_data(k)[r * b_ + c]);
        best = std::max(best, s);
      }
    }
    return best;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d = DenseMatrix::Zero(rows(), cols());
    for (int i = 0; i < nbr_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        d.block(static_cast<Eigen::Index>(i) * b_, static_cast<Eigen::Index>(col_idx_[k]) * b_, b_, b_) = block(k);
    return d;
  }

  Eigen::SparseMatrix<double> to_eigen() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(values_.size());
    for (int i = 0; i < nbr_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        for (int r = 0; r < b_; ++r)
          for (int c = 0; c < b_; ++c) {
            const double v = block_data(k)[r * b_ + c];
            if (v != 0.0)
              trips.emplace_back(static_cast<int>(i * b_ + r), static_cast<int>(col_idx_[k] * b_ + c), v);
          }
    Eigen::SparseMatrix<double> s(rows(), cols());
    s.setFromTriplets(trips.begin(), trips.end());
    return s;
  }

  bool same_pattern(const BlockCsrMatrix& o) const noexcept {
    return b_ == o.b_ && nbr_ == o.nbr_ && nbc_ == o.nbc_ && row_ptr_ == o.row_ptr_ &&
           col_idx_ == o.col_idx_;
  }

  friend bool operator==(const BlockCsrMatrix& a, const BlockCsrMatrix& b) {
    return a.same_pattern(b) && a.values_ == b.values_;
  }

 private:
  int b_ = 1;
  int nbr_ = 0;
  int nbc_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

inline BlockCsrMatrix transpose(const BlockCsrMatrix& a) {
  const int b = a.block_size();
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  std::vector<std::size_t> ptr(a.block_cols() + 1, 0);
  for (int j : ci) ++ptr[j + 1];
  std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
  std::vector<std::size_t> next(ptr.begin(), ptr.end() - 1);
  std::vector<int> cols(ci.size());
  std::vector<double> vals(a.values().size());
  const std::size_t bb = a.block_area();
  for (int i = 0; i < a.block_rows(); ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      const std::size_t dst = next[ci[k]]++;
      cols[dst] = i;
      const double* src = a.block_data(k);
      double* out = vals.data() + dst * bb;
      for (int r = 0; r < b; ++r)
        for (int c = 0; c < b; ++c) out[c * b + r] = src[r * b + c];
    }
  }
  return BlockCsrMatrix(b, a.block_cols(), a.block_rows(), std::move(ptr), std::move(cols),
                        std::move(vals));
}

/// Sparse product C = A B on matching block sizes.
inline BlockCsrMatrix multiply(const BlockCsrMatrix& a, const BlockCsrMatrix& bm) {
  if (a.block_size() != bm.block_size() || a.block_cols() != bm.block_rows())
    throw Error("multiply: incompatible block matrices");
  const int b = a.block_size();
  const std::size_t bb = a.block_area();
  const auto arp = a.row_ptr();
  const auto aci = a.col_idx();
  const auto brp = bm.row_ptr();
  const auto bci = bm.col_idx();

  std::vector<std::size_t> ptr(a.block_rows() + 1, 0);
  std::vector<int> cols;
  std::vector<double> vals;
  std::vector<std::ptrdiff_t> slot(bm.block_cols(), -1);
  std::vector<int> row_cols;
  std::vector<double> acc;
  for (int i = 0; i < a.block_rows(); ++i) {
    row_cols.clear();
    for (std::size_t ka = arp[i]; ka < arp[i + 1]; ++ka) {
      const int k = aci[ka];
      for (std::size_t kb = brp[k]; kb < brp[k + 1]; ++kb) {
        const int j = bci[kb];
        if (slot[j] < 0) {
          slot[j] = 0;
          row_cols.push_back(j);
        }
      }
    }
    std::sort(row_cols.begin(), row_cols.end());
    for (std::size_t q = 0; q < row_cols.size(); ++q) slot[row_cols[q]] = static_cast<std::ptrdiff_t>(q);
    acc.assign(row_cols.size() * bb, 0.0);
    for (std::size_t ka = arp[i]; ka < arp[i + 1]; ++ka) {
      const int k = aci[ka];
      const double* ablk = a.block_data(ka);
      for (std::size_t kb = brp[k]; kb < brp[k + 1]; ++kb) {
        const double* bblk = bm.block_data(kb);
        double* cblk = acc.data() + static_cast<std::size_t>(slot[bci[kb]]) * bb;
        if (b == 1) {
          cblk[0] += ablk[0] * bblk[0];
          continue;
        }
        for (int r = 0; r < b; ++r)
          for (int m = 0; m < b; ++m) {
            const double av = ablk[r * b + m];
            if (av == 0.0) continue;
            const double* brow = bblk + static_cast<std::size_t>(m) * b;
            double* crow = cblk + static_cast<std::size_t>(r) * b;
            for (int c = 0; c < b; ++c) crow[c] += av * brow[c];
          }
      }
    }
    cols.insert(cols.end(), row_cols.begin(), row_cols.end());
    vals.insert(vals.end(), acc.begin(), acc.end());
    ptr[i + 1] = cols.size();
    for (int j : row_cols) slot[j] = -1;
  }
  return BlockCsrMatrix(b, a.block_rows(), bm.block_cols(), std::move(ptr), std::move(cols),
                        std::move(vals));
}

/// alpha A + beta B over the union of both patterns.
inline BlockCsrMatrix add(double alpha, const BlockCsrMatrix& a, double beta, const BlockCsrMatrix& bm) {
  if (a.block_size() != bm.block_size() || a.block_rows() != bm.block_rows() ||
      a.block_cols() != bm.block_cols())
    throw Error("add: incompatible block matrices");
  const std::size_t bb = a.block_area();
  std::vector<std::size_t> ptr(a.block_rows() + 1, 0);
  std::vector<int> cols;
  std::vector<double> vals;
  const auto arp = a.row_ptr();
  const auto brp = bm.row_ptr();
  const auto aci = a.col_idx();
  const auto bci = bm.col_idx();
  for (int i = 0; i < a.block_rows(); ++i) {
    std::size_t ka = arp[i], kb = brp[i];
    while (ka < arp[i + 1] || kb < brp[i + 1]) {
      const int ja = ka < arp[i + 1] ? aci[ka] : std::numeric_limits<int>::max();
      const int jb = kb < brp[i + 1] ? bci[kb] : std::numeric_limits<int>::max();
      const int j = std::min(ja, jb);
      cols.push_back(j);
      const std::size_t base = vals.size();
      vals.resize(base + bb, 0.0);
      if (ja == j) {
        const double* s = a.block_data(ka++);
        for (std::size_t e = 0; e < bb; ++e) vals[base + e] += alpha * s[e];
      }
      if (jb == j) {
        const double* s = bm.block_data(kb++);
        for (std::size_t e = 0; e < bb; ++e) vals[base + e] += beta * s[e];
      }
    }
    ptr[i + 1] = cols.size();
  }
  return BlockCsrMatrix(a.block_size(), a.block_rows(), a.block_cols(), std::move(ptr),
                        std::move(cols), std::move(vals));
}

/// Dense diagonal blocks, one per block row.
class BlockDiagonal {
 public:
  BlockDiagonal() = default;
  BlockDiagonal(int block_size, int n) : b_(block_size), n_(n), data_(static_cast<std::size_t>(n) * block_size * block_size, 0.0) {}

  int block_size() const noexcept { return b_; }
  int size() const noexcept { return n_; }
  BlockCsrMatrix::BlockMap block(int i) {
    return BlockCsrMatrix::BlockMap(data_.data() + static_cast<std::size_t>(i) * b_ * b_, b_, b_);
  }
  BlockCsrMatrix::ConstBlockMap block(int i) const {
    return BlockCsrMatrix::ConstBlockMap(data_.data() + static_cast<std::size_t>(i) * b_ * b_, b_, b_);
  }

  /// y = D x
  void apply(const Vector& x, Vector& y) const {
    y.resize(x.size());
    for (int i = 0; i < n_; ++i) apply_block(i, x, y);
  }
  Vector operator*(const Vector& x) const {
    Vector y;
    apply(x, y);
    return y;
  }
  /// y_i = D_i x_i for a single block row.
  void apply_block(int i, const Vector& x, Vector& y) const {
    const double* d = data_.data() + static_cast<std::size_t>(i) * b_ * b_;
    const double* xi = x.data() + static_cast<std::size_t>(i) * b_;
    double* yi = y.data() + static_cast<std::size_t>(i) * b_;
    for (int r = 0; r < b_; ++r) {
      double s = 0.0;
      for (int c = 0; c < b_; ++c) s += d[r * b_ + c] * xi[c];
      yi[r] = s;
    }
  }

  BlockCsrMatrix to_matrix() const {
    std::vector<std::size_t> ptr(n_ + 1);
    std::vector<int> cols(n_);
    for (int i = 0; i < n_; ++i) {
      ptr[i + 1] = i + 1;
      cols[i] = i;
    }
    return BlockCsrMatrix(b_, n_, n_, std::move(ptr), std::move(cols), data_);
  }

 private:
  int b_ = 1;
  int n_ = 0;
  std::vector<double> data_;
};

inline BlockDiagonal block_diagonal(const BlockCsrMatrix& a) {
  BlockDiagonal d(a.block_size(), a.block_rows());
  for (int i = 0; i < a.block_rows(); ++i) {
    const auto k = a.find(i, i);
    if (k >= 0) d.block(i) = a.block(static_cast<std::size_t>(k));
  }
  return d;
}

/// Inverts every diagonal block with a rank-revealing dense LU.
inline BlockDiagonal block_diag_inverse(const BlockCsrMatrix& a) {
  if (a.block_rows() != a.block_cols()) throw Error("block_diag_inverse: matrix is not square");
  BlockDiagonal inv(a.block_size(), a.block_rows());
  for (int i = 0; i < a.block_rows(); ++i) {
    const auto k = a.find(i, i);
    if (k < 0) throw SingularBlockError(static_cast<std::size_t>(i), "block_diag_inverse");
    Eigen::FullPivLU<DenseMatrix> lu(DenseMatrix(a.block(static_cast<std::size_t>(k))));
    if (!lu.isInvertible()) throw SingularBlockError(static_cast<std::size_t>(i), "block_diag_inverse");
    inv.block(i) = lu.inverse();
  }
  return inv;
}

/// Scalar graph over block rows carrying one Frobenius-norm weight per block.
struct CondensedGraph {
  int n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<int> col_idx;
  std::vector<double> weights;
};

inline CondensedGraph condense(const BlockCsrMatrix& a) {
  CondensedGraph g;
  g.n = a.block_rows();
  g.row_ptr.assign(a.row_ptr().begin(), a.row_ptr().end());
  g.col_idx.assign(a.col_idx().begin(), a.col_idx().end());
  g.weights.resize(a.nnz_blocks());
  for (std::size_t k = 0; k < a.nnz_blocks(); ++k) g.weights[k] = a.block(k).norm();
  return g;
}

/// Scalar CSR view (block size 1) of a block matrix; exact zeros are dropped.
inline BlockCsrMatrix to_scalar(const BlockCsrMatrix& a) {
  const int b = a.block_size();
  if (b == 1) return a;
  std::vector<std::size_t> ptr(a.rows() + 1, 0);
  std::vector<int> cols;
  std::vector<double> vals;
  for (int i = 0; i < a.block_rows(); ++i) {
    for (int r = 0; r < b; ++r) {
      for (std::size_t k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
        const double* blk = a.block_data(k);
        for (int c = 0; c < b; ++c) {
          const double v = blk[r * b + c];
          if (v == 0.0) continue;
          cols.push_back(a.col_idx()[k] * b + c);
          vals.push_back(v);
        }
      }
      ptr[static_cast<std::size_t>(i) * b + r + 1] = cols.size();
    }
  }
  return BlockCsrMatrix(1, static_cast<int>(a.rows()), static_cast<int>(a.cols()), std::move(ptr),
                        std::move(cols), std::move(vals));
}

// ---------------------------------------------------------------------------
// Matrix Market coordinate I/O. The block layout is written to a JSON-free
// sidecar "<path>.block" holding "block_size block_rows block_cols".

inline void write_matrix_market(const BlockCsrMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  std::size_t nnz = 0;
  for (double v : a.values())
    if (v != 0.0) ++nnz;
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << "% block_size " << a.block_size() << "\n";
  out << a.rows() << " " << a.cols() << " " << nnz << "\n";
  out << std::setprecision(17);
  const int b = a.block_size();
  for (int i = 0; i < a.block_rows(); ++i)
    for (std::size_t k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k)
      for (int r = 0; r < b; ++r)
        for (int c = 0; c < b; ++c) {
          const double v = a.block_data(k)[r * b + c];
          if (v != 0.0)
            out << (i * b + r + 1) << " " << (a.col_idx()[k] * b + c + 1) << " " << v << "\n";
        }
  std::ofstream side(path + ".block");
  side << a.block_size() << " " << a.block_rows() << " " << a.block_cols() << "\n";
}

inline BlockCsrMatrix read_matrix_market(const std::string& path, int block_size = 0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("%%MatrixMarket matrix coordinate real general", 0) != 0)
    throw Error(path + ": unsupported Matrix Market header");
  int header_block = 1;
  while (std::getline(in, line) && !line.empty() && line[0] == '%') {
    std::istringstream ls(line.substr(1));
    std::string key;
    ls >> key;
    if (key == "block_size") ls >> header_block;
  }
  const int b = block_size > 0 ? block_size : header_block;
  long rows = 0, cols = 0;
  std::size_t nnz = 0;
  std::istringstream hs(line);
  hs >> rows >> cols >> nnz;
  if (rows % b != 0 || cols % b != 0) throw Error(path + ": size not divisible by block size");
  const int nbr = static_cast<int>(rows / b);
  const int nbc = static_cast<int>(cols / b);
  std::vector<std::map<int, std::vector<double>>> blocks(nbr);
  for (std::size_t e = 0; e < nnz; ++e) {
    long r = 0, c = 0;
    double v = 0.0;
    if (!(in >> r >> c >> v)) throw Error(path + ": truncated entry list");
    --r;
    --c;
    auto& blk = blocks[r / b][static_cast<int>(c / b)];
    if (blk.empty()) blk.assign(static_cast<std::size_t>(b) * b, 0.0);
    blk[(r % b) * b + (c % b)] += v;
  }
  std::vector<std::size_t> ptr(nbr + 1, 0);
  std::vector<int> ci;
  std::vector<double> vals;
  for (int i = 0; i < nbr; ++i) {
    for (auto& [j, blk] : blocks[i]) {
      ci.push_back(j);
      vals.insert(vals.end(), blk.begin(), blk.end());
    }
    ptr[i + 1] = ci.size();
  }
  return BlockCsrMatrix(b, nbr, nbc, std::move(ptr), std::move(ci), std::move(vals));
}

}  // namespace anisoheat
