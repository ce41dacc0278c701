#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spiked/core.hpp"
#include "spiked/random.hpp"

namespace spiked {

/// Eigenvalue with a unit eigenvector. The sign of `vector` is whatever the iteration
/// produced; use sign_align() when a reference direction is known.
template <typename Scalar = double>
struct EigenPair {
  Scalar value = 0;
  Vector<Scalar> vector;
  Index iterations = 0;
  /// ||M v - value v||_2 at return.
  Scalar residual = 0;
  /// True when the shifted power iteration had to finish the job.
  bool used_fallback = false;
};

/// All eigenvalues, ascending.
template <typename Scalar = double>
struct Spectrum {
  Vector<Scalar> values;

  Index size() const noexcept { return values.size(); }
  Scalar max() const { return values[values.size() - 1]; }
  Scalar min() const { return values[0]; }
};

struct EigenOptions {
  /// Converged when ||M v - theta v|| <= tol * ||M||_F.
  double tol = 1e-10;
  /// Cap on Lanczos steps, and separately on fallback power-iteration steps.
  Index max_iter = 1000;
  /// Seeds the Lanczos starting vector.
  Seed start_seed{0x5eed};
};

inline constexpr Index kDefaultSpectrumCap = 4000;

namespace detail {

/// Solves (T - shift I) y = b in place for symmetric tridiagonal T given by `diag` and
/// `off`, using Gaussian elimination with partial pivoting. Zero pivots are replaced by
/// `tiny`, which is what inverse iteration wants.
template <typename Scalar>
void tridiagonal_shifted_solve(const std::vector<Scalar>& diag, const std::vector<Scalar>& off, Scalar shift,
                               Scalar tiny, std::vector<Scalar>& b) {
  const std::size_t m = diag.size();
  std::vector<Scalar> d(m), du(off), dl(off), du2(m, Scalar(0));
  for (std::size_t i = 0; i < m; ++i) d[i] = diag[i] - shift;
  if (m == 1) {
    b[0] /= (d[0] != Scalar(0) ? d[0] : tiny);
    return;
  }
  for (std::size_t i = 0; i + 1 < m; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (d[i] == Scalar(0)) d[i] = tiny;
      const Scalar fact = dl[i] / d[i];
      d[i + 1] -= fact * du[i];
      b[i + 1] -= fact * b[i];
      du2[i] = Scalar(0);
    } else {
      const Scalar fact = d[i] / dl[i];
      d[i] = dl[i];
      const Scalar temp = d[i + 1];
      d[i + 1] = du[i] - fact * temp;
      if (i + 2 < m) {
        du2[i] = du[i + 1];
        du[i + 1] = -fact * du2[i];
      }
      du[i] = temp;
      const Scalar tb = b[i];
      b[i] = b[i + 1];
      b[i + 1] = tb - fact * b[i + 1];
    }
  }
  if (d[m - 1] == Scalar(0)) d[m - 1] = tiny;
  b[m - 1] /= d[m - 1];
  b[m - 2] = (b[m - 2] - du[m - 2] * b[m - 1]) / d[m - 2];
  for (std::size_t i = m - 2; i-- > 0;) b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
}

/// Largest eigenvalue of the Lanczos tridiagonal and its unit eigenvector.
/// `betas` holds the alphas.size() - 1 off-diagonal entries.
template <typename Scalar>
std::pair<Scalar, std::vector<Scalar>> top_ritz_pair(const std::vector<Scalar>& alphas,
                                                     const std::vector<Scalar>& betas) {
  const std::size_t m = alphas.size();
  Vector<Scalar> diag = Eigen::Map<const Vector<Scalar>>(alphas.data(), static_cast<Index>(m));
  Vector<Scalar> sub(static_cast<Index>(m > 0 ? m - 1 : 0));
  for (std::size_t i = 0; i + 1 < m; ++i) sub[static_cast<Index>(i)] = betas[i];
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  const Scalar theta = solver.eigenvalues()[static_cast<Index>(m - 1)];

  Scalar scale = std::abs(theta);
  for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(alphas[i]));
  for (std::size_t i = 0; i + 1 < m; ++i) scale = std::max(scale, std::abs(betas[i]));
  if (scale == Scalar(0)) scale = Scalar(1);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar shift = theta + Scalar(4) * eps * scale;
  std::vector<Scalar> y(m, Scalar(1));
  for (int pass = 0; pass < 3; ++pass) {
    tridiagonal_shifted_solve(alphas, betas, shift, eps * scale, y);
    Scalar nrm = 0;
    for (Scalar v : y) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (Scalar& v : y) v /= nrm;
  }
  return {theta, std::move(y)};
}

}  // namespace detail

/// Leading eigenpair by shifted power iteration on M + sigma I, sigma = ||M||_1, which
/// makes every eigenvalue non-negative so the iteration targets the algebraically
/// largest one. Slow near-degenerate edges; mainly a fallback for Lanczos.
template <typename Scalar, typename Derived>
EigenPair<Scalar> leading_eigenpair_power(const SymmetricMatrix<Scalar>& m, const Eigen::MatrixBase<Derived>& start,
                                          const EigenOptions& opts = {}) {
  detail::require(opts.tol > 0, "leading_eigenpair: tol must be positive");
  detail::require(start.size() == m.dim(), "leading_eigenpair_power: start vector has wrong length");
  const Scalar sigma = m.norm1();
  const Scalar target = static_cast<Scalar>(opts.tol) * m.frobenius_norm();
  Vector<Scalar> x = start.template cast<Scalar>();
  Scalar nx = x.norm();
  if (nx == Scalar(0)) {
    x.setOnes();
    nx = x.norm();
  }
  x /= nx;
  EigenPair<Scalar> out;
  out.used_fallback = true;
  Vector<Scalar> mx(m.dim());
  for (Index it = 1; it <= opts.max_iter; ++it) {
    mx.noalias() = m.matrix() * x;
    const Scalar rq = x.dot(mx);
    const Scalar res = (mx - rq * x).norm();
    out.value = rq;
    out.residual = res;
    out.iterations = it;
    if (res <= target) {
      out.vector = x;
      return out;
    }
    x = mx + sigma * x;
    nx = x.norm();
    if (!(nx > Scalar(0)) || !std::isfinite(static_cast<double>(nx)))
      throw NumericalFailure("leading_eigenpair_power: iterate vanished or overflowed", it);
    x /= nx;
  }
  throw ConvergenceError("leading_eigenpair_power: no convergence within max_iter", opts.max_iter,
                         static_cast<double>(out.residual));
}

/// Eigenpair of the algebraically largest eigenvalue of M.
///
/// Lanczos with full reorthogonalization (Gram-Schmidt applied twice per step); the
/// residual of the top Ritz pair is checked every step and confirmed on the assembled
/// vector before returning. If the Lanczos budget runs out, shifted power iteration
/// continues from the best Ritz vector. For a repeated leading eigenvalue, any unit
/// vector in its eigenspace may be returned.
template <typename Scalar>
EigenPair<Scalar> leading_eigenpair(const SymmetricMatrix<Scalar>& m, const EigenOptions& opts = {}) {
  detail::require(opts.tol > 0, "leading_eigenpair: tol must be positive, got ", opts.tol);
  detail::require(opts.max_iter >= 1, "leading_eigenpair: max_iter must be >= 1");
  const Index n = m.dim();
  detail::require(n >= 1, "leading_eigenpair: empty matrix");
  const Scalar norm_f = m.frobenius_norm();
  const Scalar target = static_cast<Scalar>(opts.tol) * norm_f;
  const Index cap = std::min(n, opts.max_iter);

  Matrix<Scalar> basis(n, std::min<Index>(cap, 64));
  std::vector<Scalar> alphas, betas;
  Vector<Scalar> q = standard_normal_vector<Scalar>(n, opts.start_seed);
  q /= q.norm();
  Vector<Scalar> w(n), coeff;
  Vector<Scalar> best;

  for (Index k = 0; k < cap; ++k) {
    if (k >= basis.cols()) basis.conservativeResize(Eigen::NoChange, std::min(cap, 2 * basis.cols()));
    basis.col(k) = q;
    w.noalias() = m.matrix() * q;
    const Scalar alpha = q.dot(w);
    w -= alpha * q;
    if (k > 0) w -= betas.back() * basis.col(k - 1);
    for (int pass = 0; pass < 2; ++pass) {
      coeff.noalias() = basis.leftCols(k + 1).transpose() * w;
      w.noalias() -= basis.leftCols(k + 1) * coeff;
    }
    const Scalar beta = w.norm();
    alphas.push_back(alpha);

    auto [theta, y] = detail::top_ritz_pair(alphas, betas);
    const Scalar estimate = beta * std::abs(y.back());
    const bool invariant = beta <= std::numeric_limits<Scalar>::epsilon() * std::max(norm_f, Scalar(1));
    if (estimate <= target || invariant || k + 1 == cap) {
      Vector<Scalar> v = basis.leftCols(k + 1) * Eigen::Map<const Vector<Scalar>>(y.data(), k + 1);
      v /= v.norm();
      const Vector<Scalar> mv = m.matrix() * v;
      const Scalar rq = v.dot(mv);
      const Scalar res = (mv - rq * v).norm();
      if (res <= target) {
        return EigenPair<Scalar>{rq, std::move(v), k + 1, res, false};
      }
      best = std::move(v);
      if (invariant || k + 1 == cap) break;
    }
    betas.push_back(beta);
    q = w / beta;
  }
  EigenPair<Scalar> out = leading_eigenpair_power(m, best, opts);
  out.iterations += cap;
  return out;
}

/// All eigenvalues, ascending (Householder tridiagonalization + implicit symmetric QR).
template <typename Scalar>
Spectrum<Scalar> full_spectrum(const SymmetricMatrix<Scalar>& m, Index cap = kDefaultSpectrumCap) {
  detail::require(m.dim() >= 1, "full_spectrum: empty matrix");
  detail::require(m.dim() <= cap, "full_spectrum: dimension ", m.dim(), " exceeds cap ", cap);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(m.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("full_spectrum: implicit QR did not converge", m.dim(), 0.0);
  return Spectrum<Scalar>{solver.eigenvalues()};
}

/// |<v, x>| for unit vectors; rejects inputs whose norms deviate from 1 by more than 1e-6.
template <typename DerivedV, typename DerivedX>
typename DerivedV::Scalar overlap(const Eigen::MatrixBase<DerivedV>& v, const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedV::Scalar;
  detail::require(v.size() == x.size(), "overlap: length mismatch ", v.size(), " vs ", x.size());
  detail::require(std::abs(v.norm() - Scalar(1)) <= Scalar(1e-6), "overlap: first vector is not unit, norm ",
                  v.norm());
  detail::require(std::abs(x.norm() - Scalar(1)) <= Scalar(1e-6), "overlap: second vector is not unit, norm ",
                  x.norm());
  return std::min(Scalar(1), std::abs(v.dot(x.template cast<Scalar>())));
}

/// v * sign(<v, x>), with sign(0) = +1.
template <typename DerivedV, typename DerivedX>
Vector<typename DerivedV::Scalar> sign_align(const Eigen::MatrixBase<DerivedV>& v,
                                             const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedV::Scalar;
  detail::require(v.size() == x.size(), "sign_align: length mismatch");
  return v.dot(x.template cast<Scalar>()) < Scalar(0) ? Vector<Scalar>(-v) : Vector<Scalar>(v);
}

}  // namespace spiked
