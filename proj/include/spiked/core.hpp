#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace spiked {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

// Errors ----------------------------------------------------------------------

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the arguments was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap without meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Index iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}
  Index iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  Index iterations_;
  double residual_;
};

/// A non-finite value appeared during an iteration.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, Index iteration)
      : Error(what), iteration_(iteration) {}
  Index iteration() const noexcept { return iteration_; }

 private:
  Index iteration_;
};

/// Clipping to the box left nothing but zeros, so the vector cannot be renormalized.
class ProjectionFailure : public Error {
 public:
  using Error::Error;
};

/// The secular equation has no root to the right of the largest atom.
class SecularError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a matrix/vector file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Parts>
std::string concat(const Parts&... parts) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << parts);
  return os.str();
}

template <typename... Parts>
void require(bool condition, const Parts&... parts) {
  if (!condition) throw InvalidArgument(concat(parts...));
}

}  // namespace detail

// Seed ------------------------------------------------------------------------

/// Master or per-trial seed. Equal seeds and equal parameters give bit-identical output.
struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(Seed, Seed) = default;
};

// SymmetricMatrix -------------------------------------------------------------

/// Dense real symmetric matrix. Symmetry is exact: M(i,j) and M(j,i) hold the same bits.
template <typename Scalar>
class SymmetricMatrix {
 public:
  using MatrixType = Matrix<Scalar>;

  SymmetricMatrix() = default;

  /// Zero matrix of dimension n.
  explicit SymmetricMatrix(Index n) : m_(MatrixType::Zero(n, n)) {}

  /// Builds from the upper triangle of `m`; the strict lower triangle is overwritten.
  template <typename Derived>
  static SymmetricMatrix from_upper(const Eigen::MatrixBase<Derived>& m) {
    detail::require(m.rows() == m.cols(), "from_upper: matrix is ", m.rows(), "x", m.cols());
    SymmetricMatrix s;
    s.m_ = m.template cast<Scalar>();
    s.m_.template triangularView<Eigen::StrictlyLower>() = s.m_.transpose();
    return s;
  }

  /// Builds from the lower triangle of `m`; the strict upper triangle is overwritten.
  template <typename Derived>
  static SymmetricMatrix from_lower(const Eigen::MatrixBase<Derived>& m) {
    detail::require(m.rows() == m.cols(), "from_lower: matrix is ", m.rows(), "x", m.cols());
    SymmetricMatrix s;
    s.m_ = m.template cast<Scalar>();
    s.m_.template triangularView<Eigen::StrictlyUpper>() = s.m_.transpose();
    return s;
  }

  /// Accepts `m` only if it is exactly symmetric; otherwise throws InvalidArgument
  /// carrying the largest |m(i,j) - m(j,i)|.
  template <typename Derived>
  static SymmetricMatrix checked(const Eigen::MatrixBase<Derived>& m) {
    detail::require(m.rows() == m.cols(), "matrix is not square: ", m.rows(), "x", m.cols());
    const Scalar gap = max_asymmetry(m);
    detail::require(gap == Scalar(0), "matrix is not symmetric: max |M(i,j) - M(j,i)| = ", gap);
    SymmetricMatrix s;
    s.m_ = m.template cast<Scalar>();
    return s;
  }

  template <typename Derived>
  static Scalar max_asymmetry(const Eigen::MatrixBase<Derived>& m) {
    if (m.size() == 0) return Scalar(0);
    return static_cast<Scalar>((m - m.transpose()).cwiseAbs().maxCoeff());
  }

  Index dim() const noexcept { return m_.rows(); }
  const MatrixType& matrix() const noexcept { return m_; }
  Scalar operator()(Index i, Index j) const { return m_(i, j); }

  Scalar frobenius_norm() const { return m_.norm(); }
  /// Max absolute column sum.
  Scalar norm1() const {
    if (m_.size() == 0) return Scalar(0);
    return m_.cwiseAbs().colwise().sum().maxCoeff();
  }
  Scalar trace() const { return m_.trace(); }

  friend bool operator==(const SymmetricMatrix& a, const SymmetricMatrix& b) {
    return a.m_.rows() == b.m_.rows() && a.m_ == b.m_;
  }

 private:
  MatrixType m_;
};

template <typename Scalar, typename Derived>
auto operator*(const SymmetricMatrix<Scalar>& a, const Eigen::MatrixBase<Derived>& x) {
  return a.matrix() * x;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace spiked
