#pragma once

// Flexible and right-preconditioned GMRES and preconditioned CG.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>
#include <vector>

#include "anisoheat/common.hpp"

namespace anisoheat {

/// y = Op(x). Implementations may assume y is already sized.
using LinearOperator = std::function<void(const Vector& x, Vector& y)>;

struct SolveStats {
  int iterations = 0;
  double rel_residual = 0.0;
  double abs_residual = 0.0;
  double wall_time = 0.0;
  bool converged = false;
  std::vector<double> residual_history;  // relative residual, entry 0 is the initial one
  std::vector<int> inner_iterations;      // per preconditioner application, when nested

  void write_history(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "iteration,residual\n" << std::setprecision(12);
    for (std::size_t i = 0; i < residual_history.size(); ++i) out << i << "," << residual_history[i] << "\n";
  }
};

struct KrylovOptions {
  double tol_rel = 1e-8;
  int max_it = 1000;
  int restart = 0;  // 0: no restarting
};

/// Relative tolerance giving three digits in both the relative and the
/// absolute residual.
inline double inner_tolerance(double rhs_norm) {
  if (rhs_norm <= 0.0) return 1e-3;
  return std::min(1e-3, 1e-3 / rhs_norm);
}

namespace detail {

/// GMRES with right preconditioning. flexible = true stores the
/// preconditioned directions; otherwise the correction is formed once at the
/// end of each cycle.
inline SolveStats gmres_impl(const LinearOperator& A, const LinearOperator& P, const Vector& b, Vector& x,
                             const KrylovOptions& opt, bool flexible) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveStats st;
  const Eigen::Index n = b.size();
  if (x.size() != n) x = Vector::Zero(n);
  const double bnorm = b.norm();
  auto finish = [&](double rnorm) {
    st.abs_residual = rnorm;
    st.rel_residual = bnorm > 0.0 ? rnorm / bnorm : 0.0;
    st.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return st;
  };
  if (bnorm == 0.0) {
    x.setZero();
    st.converged = true;
    st.residual_history.push_back(0.0);
    return finish(0.0);
  }
  const int m_max = opt.restart > 0 ? opt.restart : std::max(1, opt.max_it);
  Vector r(n), w(n), z(n);
  A(x, w);
  r = b - w;
  double beta = r.norm();
  st.residual_history.push_back(beta / bnorm);
  if (beta / bnorm <= opt.tol_rel) {
    st.converged = true;
    return finish(beta);
  }

  std::vector<Vector> V, Z;
  DenseMatrix H;
  Vector cs, sn, g;
  while (st.iterations < opt.max_it) {
    const int m = std::min(m_max, opt.max_it - st.iterations);
    V.assign(1, r / beta);
    Z.clear();
    H = DenseMatrix::Zero(m + 1, m);
    cs = Vector::Zero(m);
    sn = Vector::Zero(m);
    g = Vector::Zero(m + 1);
    g[0] = beta;
    int j = 0;
    double res = beta;
    for (; j < m; ++j) {
      P(V[j], z);
      A(z, w);
      if (flexible) Z.push_back(z);
      const double wnorm0 = w.norm();
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V[i].dot(w);
        w.noalias() -= H(i, j) * V[i];
      }
      double wnorm = w.norm();
      // second Gram-Schmidt pass when orthogonality is visibly lost
      double loss = 0.0;
      std::vector<double> c(j + 1);
      for (int i = 0; i <= j; ++i) {
        c[i] = V[i].dot(w);
        loss = std::max(loss, std::abs(c[i]));
      }
      if (wnorm > 0.0 && loss > 1e-8 * wnorm) {
        for (int i = 0; i <= j; ++i) {
          w.noalias() -= c[i] * V[i];
          H(i, j) += c[i];
        }
        wnorm = w.norm();
      }
      H(j + 1, j) = wnorm;
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double den = std::hypot(H(j, j), H(j + 1, j));
      if (den == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = H(j, j) / den;
        sn[j] = H(j + 1, j) / den;
      }
      H(j, j) = den;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      res = std::abs(g[j + 1]);
      ++st.iterations;
      st.residual_history.push_back(res / bnorm);
      const bool breakdown = wnorm <= 1e-14 * wnorm0;
      if (res / bnorm <= opt.tol_rel || breakdown) {
        ++j;
        break;
      }
      V.push_back(w / wnorm);
    }
    // solve the triangular least-squares system and update x
    const int k = j;
    Vector y = Vector::Zero(k);
    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int l = i + 1; l < k; ++l) s -= H(i, l) * y[l];
      y[i] = H(i, i) != 0.0 ? s / H(i, i) : 0.0;
    }
    if (flexible) {
      for (int i = 0; i < k; ++i) x.noalias() += y[i] * Z[i];
    } else {
      Vector u = Vector::Zero(n);
      for (int i = 0; i < k; ++i) u.noalias() += y[i] * V[i];
      P(u, z);
      x += z;
    }
    A(x, w);
    r = b - w;
    beta = r.norm();
    if (beta / bnorm <= opt.tol_rel) {
      st.converged = true;
      break;
    }
    if (beta == 0.0) break;
  }
  st.converged = st.converged || beta / bnorm <= opt.tol_rel;
  return finish(beta);
}

}  // namespace detail

/// Flexible GMRES; the preconditioner may change between iterations.
inline SolveStats fgmres(const LinearOperator& A, const LinearOperator& P, const Vector& b, Vector& x,
                         const KrylovOptions& opt = {}) {
  return detail::gmres_impl(A, P, b, x, opt, true);
}

/// Right-preconditioned GMRES with a fixed preconditioner.
inline SolveStats gmres_right(const LinearOperator& A, const LinearOperator& P, const Vector& b, Vector& x,
                              const KrylovOptions& opt = {}) {
  return detail::gmres_impl(A, P, b, x, opt, false);
}

/// Preconditioned conjugate gradients for SPD A and SPD P.
inline SolveStats cg(const LinearOperator& A, const LinearOperator& P, const Vector& b, Vector& x,
                     const KrylovOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveStats st;
  const Eigen::Index n = b.size();
  if (x.size() != n) x = Vector::Zero(n);
  const double bnorm = b.norm();
  auto finish = [&](double rnorm) {
    st.abs_residual = rnorm;
    st.rel_residual = bnorm > 0.0 ? rnorm / bnorm : 0.0;
    st.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return st;
  };
  if (bnorm == 0.0) {
    x.setZero();
    st.converged = true;
    st.residual_history.push_back(0.0);
    return finish(0.0);
  }
  Vector r(n), z(n), p(n), q(n);
  A(x, q);
  r = b - q;
  double rnorm = r.norm();
  st.residual_history.push_back(rnorm / bnorm);
  if (rnorm / bnorm <= opt.tol_rel) {
    st.converged = true;
    return finish(rnorm);
  }
  P(r, z);
  p = z;
  double rz = r.dot(z);
  while (st.iterations < opt.max_it) {
    A(p, q);
    const double pq = p.dot(q);
    if (!(pq > 0.0)) throw Error("cg: operator is not positive definite (p^T A p = " + std::to_string(pq) + ")");
    const double alpha = rz / pq;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * q;
    ++st.iterations;
    rnorm = r.norm();
    st.residual_history.push_back(rnorm / bnorm);
    if (rnorm / bnorm <= opt.tol_rel) {
      st.converged = true;
      break;
    }
    P(r, z);
    const double rz_new = r.dot(z);
    if (!(rz_new > 0.0)) throw Error("cg: preconditioner is not positive definite");
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return finish(rnorm);
}

/// Identity preconditioner.
inline void identity_op(const Vector& x, Vector& y) { y = x; }

}  // namespace anisoheat
