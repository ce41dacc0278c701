#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "spiked/core.hpp"
#include "spiked/random.hpp"

namespace spiked {

/// Planted unit vector with entries expected in [0, tau].
///
/// Unit norm is enforced. Entries above tau are tolerated and counted, because the
/// block construction at small n (e.g. n = 500, 2% block) produces entries 1/sqrt(10)
/// which exceed tau = 0.2. Callers surface `tau_violations()` as a warning.
template <typename Scalar = double>
class SignalVector {
 public:
  SignalVector(Vector<Scalar> entries, Scalar tau) : entries_(std::move(entries)), tau_(tau) {
    detail::require(tau_ > Scalar(0), "SignalVector: tau must be positive, got ", tau_);
    detail::require(entries_.size() >= 1, "SignalVector: empty vector");
    const Scalar norm = entries_.norm();
    const Scalar tol = std::max(Scalar(1e-12), Scalar(16) * std::numeric_limits<Scalar>::epsilon());
    detail::require(std::abs(norm - Scalar(1)) <= tol, "SignalVector: L2 norm must be 1, got ", norm);
    detail::require(entries_.minCoeff() >= Scalar(0), "SignalVector: negative entry ", entries_.minCoeff());
  }

  const Vector<Scalar>& entries() const noexcept { return entries_; }
  Scalar tau() const noexcept { return tau_; }
  Index size() const noexcept { return entries_.size(); }
  Scalar operator[](Index i) const { return entries_[i]; }

  /// Number of entries strictly above tau.
  Index tau_violations() const { return (entries_.array() > tau_).count(); }

 private:
  Vector<Scalar> entries_;
  Scalar tau_;
};

/// Number of nonzero entries in the block signal: round-half-up of fraction * n.
inline Index block_size(Index n, double block_fraction) {
  return static_cast<Index>(std::floor(block_fraction * static_cast<double>(n) + 0.5));
}

/// Block signal: the leading k = round(block_fraction * n) entries equal 1/sqrt(k), the rest 0.
template <typename Scalar = double>
SignalVector<Scalar> make_signal_block(Index n, double block_fraction, Scalar tau = Scalar(0.2)) {
  detail::require(n >= 1, "make_signal_block: n must be >= 1, got ", n);
  detail::require(block_fraction > 0.0 && block_fraction <= 1.0,
                  "make_signal_block: block_fraction must be in (0, 1], got ", block_fraction);
  const Index k = block_size(n, block_fraction);
  detail::require(k >= 1, "make_signal_block: block of ", block_fraction, " x ", n, " rounds to zero entries");
  Vector<Scalar> x = Vector<Scalar>::Zero(n);
  x.head(k).setConstant(Scalar(1) / std::sqrt(static_cast<Scalar>(k)));
  return SignalVector<Scalar>(std::move(x), tau);
}

/// GOE sample scaled so that off-diagonal entries are N(0, 1/n) and diagonal entries
/// N(0, 2/n). Draw order: upper triangle column by column, diagonal last in each column.
template <typename Scalar = double>
SymmetricMatrix<Scalar> sample_goe(Index n, Seed seed) {
  detail::require(n >= 1, "sample_goe: n must be >= 1, got ", n);
  Rng rng(seed);
  const double off = std::sqrt(1.0 / static_cast<double>(n));
  const double diag = std::sqrt(2.0 / static_cast<double>(n));
  Matrix<Scalar> g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < j; ++i) g(i, j) = static_cast<Scalar>(off * rng.normal());
    g(j, j) = static_cast<Scalar>(diag * rng.normal());
  }
  return SymmetricMatrix<Scalar>::from_upper(g);
}

/// X = lambda * x1 x1^T + G.
template <typename Scalar, typename Derived>
SymmetricMatrix<Scalar> assemble_spiked(Scalar lambda, const Eigen::MatrixBase<Derived>& x1,
                                        const SymmetricMatrix<Scalar>& noise) {
  detail::require(x1.size() == noise.dim(), "assemble_spiked: signal length ", x1.size(),
                  " does not match noise dimension ", noise.dim());
  const Vector<Scalar> x = x1.template cast<Scalar>();
  Matrix<Scalar> m = noise.matrix();
  // Upper triangle only, then mirror: keeps the result exactly symmetric.
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i <= j; ++i) m(i, j) += lambda * x[i] * x[j];
  return SymmetricMatrix<Scalar>::from_upper(m);
}

template <typename Scalar>
SymmetricMatrix<Scalar> assemble_spiked(Scalar lambda, const SignalVector<Scalar>& x1,
                                        const SymmetricMatrix<Scalar>& noise) {
  return assemble_spiked(lambda, x1.entries(), noise);
}

/// Population model for the spiked sample covariance: Sigma = diag(spikes, 1, ..., 1), size p.
struct CovarianceModel {
  Index p = 0;
  Index n = 0;
  std::vector<double> spikes;

  double aspect_ratio() const { return static_cast<double>(p) / static_cast<double>(n); }

  /// Throws on hard violations (dimensions, spike ordering, spikes <= 1).
  void validate() const {
    detail::require(p >= 1 && n >= 1, "CovarianceModel: p and n must be >= 1, got p=", p, " n=", n);
    detail::require(static_cast<Index>(spikes.size()) <= p, "CovarianceModel: more spikes (", spikes.size(),
                    ") than dimensions (", p, ")");
    for (std::size_t i = 0; i < spikes.size(); ++i) {
      detail::require(spikes[i] > 1.0, "CovarianceModel: spike ", i, " = ", spikes[i], " must exceed 1");
      if (i > 0)
        detail::require(spikes[i] <= spikes[i - 1], "CovarianceModel: spikes must be sorted non-increasing");
    }
  }

  /// True when p >= n, i.e. outside the 0 < c < 1 regime the limit theorems assume.
  bool aspect_ratio_warning() const { return p >= n; }

  double population_variance(Index i) const {
    return i < static_cast<Index>(spikes.size()) ? spikes[static_cast<std::size_t>(i)] : 1.0;
  }
};

/// S = (1/n) X X^T with n i.i.d. N(0, Sigma) columns in X (p x n). Column-major draw order.
template <typename Scalar = double>
SymmetricMatrix<Scalar> sample_spiked_covariance(const CovarianceModel& model, Seed seed) {
  model.validate();
  Rng rng(seed);
  Vector<double> scale(model.p);
  for (Index i = 0; i < model.p; ++i) scale[i] = std::sqrt(model.population_variance(i));
  Matrix<Scalar> x(model.p, model.n);
  for (Index j = 0; j < model.n; ++j)
    for (Index i = 0; i < model.p; ++i) x(i, j) = static_cast<Scalar>(scale[i] * rng.normal());
  Matrix<Scalar> s = Matrix<Scalar>::Zero(model.p, model.p);
  s.template selfadjointView<Eigen::Lower>().rankUpdate(x, Scalar(1) / static_cast<Scalar>(model.n));
  return SymmetricMatrix<Scalar>::from_lower(s);
}

}  // namespace spiked
