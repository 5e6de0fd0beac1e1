#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace anisoheat {

using Vector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using DenseMatrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a dense diagonal block cannot be factorized.
class SingularBlockError : public Error {
 public:
  SingularBlockError(std::size_t block_row, const std::string& context)
      : Error(context + ": singular diagonal block at block row " +
              std::to_string(block_row)),
        block_row_(block_row) {}
  std::size_t block_row() const noexcept { return block_row_; }

 private:
  std::size_t block_row_;
};

/// Raised when the magnetic field vanishes where its direction is needed.
class SingularFieldError : public Error {
 public:
  SingularFieldError(const Vec3& x)
      : Error("magnetic field |B| = 0 at (" + std::to_string(x[0]) + ", " +
              std::to_string(x[1]) + ", " + std::to_string(x[2]) +
              "); the upwind transport needs a nonvanishing field direction"),
        point_(x) {}
  const Vec3& point() const noexcept { return point_; }

 private:
  Vec3 point_;
};

/// Raised by iterative solvers when asked to fail hard on non-convergence.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

using ScalarFunction = std::function<double(const Vec3&)>;
using TimeFunction = std::function<double(const Vec3&, double)>;

}  // namespace anisoheat
