#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "spiked/core.hpp"
#include "spiked/eig.hpp"

namespace spiked {

// Limit predictors ------------------------------------------------------------

template <typename Scalar = double>
struct WignerPrediction {
  Scalar lambda = 0;
  Scalar eigenvalue_limit = 0;
  Scalar overlap_limit = 0;
};

template <typename Scalar = double>
struct CovariancePrediction {
  Scalar lambda1 = 0;
  Scalar c = 0;
  Scalar eigenvalue_limit = 0;
};

/// Large-n limits for the top eigenvalue and |<v1, x1>| of lambda x1 x1^T + GOE.
/// lambda <= 1 is sub-critical: (2, 0). Above it: (lambda + 1/lambda, sqrt(1 - 1/lambda^2)).
template <typename Scalar>
WignerPrediction<Scalar> bbp_wigner_prediction(Scalar lambda) {
  detail::require(lambda > Scalar(0), "bbp_wigner_prediction: lambda must be positive, got ", lambda);
  if (lambda <= Scalar(1)) return {lambda, Scalar(2), Scalar(0)};
  return {lambda, lambda + Scalar(1) / lambda, std::sqrt(Scalar(1) - Scalar(1) / (lambda * lambda))};
}

/// Large-n limit of the top sample-covariance eigenvalue for a top population spike
/// lambda1 and aspect ratio c = p/n in (0, 1).
template <typename Scalar>
CovariancePrediction<Scalar> bbp_covariance_prediction(Scalar lambda1, Scalar c) {
  detail::require(c > Scalar(0) && c < Scalar(1), "bbp_covariance_prediction: c must be in (0, 1), got ", c);
  detail::require(lambda1 >= Scalar(1), "bbp_covariance_prediction: lambda1 must be >= 1, got ", lambda1);
  const Scalar threshold = Scalar(1) + std::sqrt(c);
  if (lambda1 <= threshold) return {lambda1, c, threshold * threshold};
  return {lambda1, c, lambda1 * (Scalar(1) + c / (lambda1 - Scalar(1)))};
}

// Semicircle law ----------------------------------------------------------------

template <typename Scalar>
Scalar semicircle_density(Scalar x) {
  if (std::abs(x) >= Scalar(2)) return Scalar(0);
  return std::sqrt(Scalar(4) - x * x) / (Scalar(2) * std::numbers::pi_v<Scalar>);
}

/// CDF of the semicircle law on [-2, 2]; 0 below, 1 above.
template <typename Scalar>
Scalar semicircle_cdf(Scalar x) {
  if (x <= Scalar(-2)) return Scalar(0);
  if (x >= Scalar(2)) return Scalar(1);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return Scalar(0.5) + x * std::sqrt(Scalar(4) - x * x) / (Scalar(4) * pi) + std::asin(x / Scalar(2)) / pi;
}

/// S(z) = integral of dmu(t) / (z - t) for the semicircle law, real z outside [-2, 2].
/// Evaluated as 2 / (z + sign(z) sqrt(z^2 - 4)), which avoids cancellation at large |z|.
template <typename Scalar>
Scalar semicircle_stieltjes(Scalar z) {
  detail::require(std::abs(z) > Scalar(2), "semicircle_stieltjes: |z| must exceed 2 (support of the measure), got ",
                  z);
  const Scalar root = std::sqrt((z - Scalar(2)) * (z + Scalar(2)));
  return Scalar(2) / (z + std::copysign(root, z));
}

/// Inverse of semicircle_stieltjes on (2, inf): z = s + 1/s for s in (0, 1).
template <typename Scalar>
Scalar inverse_semicircle_stieltjes(Scalar s) {
  detail::require(s > Scalar(0) && s < Scalar(1),
                  "inverse_semicircle_stieltjes: s must be in (0, 1), no real preimage beyond the bulk edge; got ", s);
  return Scalar(1) / s + s;
}

// Spectral measures ---------------------------------------------------------------

/// Atoms at eigenvalue/normalization, each of mass 1/n.
template <typename Scalar = double>
struct ESD {
  std::vector<Scalar> points;  // ascending

  Index size() const noexcept { return static_cast<Index>(points.size()); }
  Scalar weight() const { return Scalar(1) / static_cast<Scalar>(points.size()); }
};

template <typename Scalar>
ESD<Scalar> esd_of(const Spectrum<Scalar>& spectrum, Scalar normalization = Scalar(1)) {
  detail::require(normalization > Scalar(0), "esd_of: normalization must be positive, got ", normalization);
  detail::require(spectrum.size() >= 1, "esd_of: empty spectrum");
  ESD<Scalar> esd;
  esd.points.resize(static_cast<std::size_t>(spectrum.size()));
  for (Index i = 0; i < spectrum.size(); ++i) esd.points[static_cast<std::size_t>(i)] = spectrum.values[i] / normalization;
  std::sort(esd.points.begin(), esd.points.end());
  return esd;
}

/// Kolmogorov-Smirnov distance sup |F_esd - F_sc|, attained at an atom (from the left or right).
template <typename Scalar>
Scalar ks_distance_to_semicircle(const ESD<Scalar>& esd) {
  detail::require(!esd.points.empty(), "ks_distance_to_semicircle: empty ESD");
  const auto n = static_cast<Scalar>(esd.points.size());
  Scalar worst = 0;
  for (std::size_t i = 0; i < esd.points.size(); ++i) {
    const Scalar f = semicircle_cdf(esd.points[i]);
    const Scalar below = static_cast<Scalar>(i) / n;
    const Scalar above = static_cast<Scalar>(i + 1) / n;
    worst = std::max({worst, above - f, f - below});
  }
  return worst;
}

/// Discrete measure sum_k w_k delta(x - location_k) with w_k >= 0 and sum 1.
template <typename Scalar = double>
class WeightedSpectralMeasure {
 public:
  struct Atom {
    Scalar location;
    Scalar weight;
  };

  explicit WeightedSpectralMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    detail::require(!atoms_.empty(), "WeightedSpectralMeasure: no atoms");
    Scalar total = 0;
    for (const Atom& a : atoms_) {
      detail::require(a.weight >= Scalar(0), "WeightedSpectralMeasure: negative weight ", a.weight);
      detail::require(std::isfinite(static_cast<double>(a.location)), "WeightedSpectralMeasure: non-finite location");
      total += a.weight;
    }
    detail::require(std::abs(total - Scalar(1)) <= Scalar(1e-10), "WeightedSpectralMeasure: weights sum to ", total);
  }

  /// Uniform weights 1/n on the given eigenvalues.
  static WeightedSpectralMeasure uniform(const Spectrum<Scalar>& spectrum) {
    const Index n = spectrum.size();
    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) atoms.push_back({spectrum.values[i], Scalar(1) / static_cast<Scalar>(n)});
    return WeightedSpectralMeasure(std::move(atoms));
  }

  /// Locations d_k with weights u_k^2 for a unit vector u (the measure of diag(d) seen from u).
  template <typename DerivedD, typename DerivedU>
  static WeightedSpectralMeasure from_diagonal(const Eigen::MatrixBase<DerivedD>& d,
                                               const Eigen::MatrixBase<DerivedU>& u) {
    detail::require(d.size() == u.size(), "from_diagonal: length mismatch");
    std::vector<Atom> atoms;
    atoms.reserve(static_cast<std::size_t>(d.size()));
    for (Index i = 0; i < d.size(); ++i) atoms.push_back({static_cast<Scalar>(d[i]), static_cast<Scalar>(u[i] * u[i])});
    return WeightedSpectralMeasure(std::move(atoms));
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }

  /// Largest location and the total weight sitting there.
  std::pair<Scalar, Scalar> top() const {
    Scalar loc = atoms_.front().location;
    for (const Atom& a : atoms_) loc = std::max(loc, a.location);
    Scalar w = 0;
    for (const Atom& a : atoms_)
      if (a.location == loc) w += a.weight;
    return {loc, w};
  }

  Scalar spread() const {
    Scalar lo = atoms_.front().location, hi = lo;
    for (const Atom& a : atoms_) {
      lo = std::min(lo, a.location);
      hi = std::max(hi, a.location);
    }
    return hi - lo;
  }

 private:
  std::vector<Atom> atoms_;
};

namespace detail {

/// f(z) = lambda * sum w_k / (z - l_k) - 1 and f'(z), with compensated summation.
template <typename Scalar>
std::pair<Scalar, Scalar> secular_value(const WeightedSpectralMeasure<Scalar>& mu, Scalar lambda, Scalar z) {
  Scalar sum = 0, comp = 0, dsum = 0;
  for (const auto& a : mu.atoms()) {
    if (a.weight == Scalar(0)) continue;
    const Scalar inv = Scalar(1) / (z - a.location);
    const Scalar term = a.weight * inv - comp;
    const Scalar t = sum + term;
    comp = (t - sum) - term;
    sum = t;
    dsum += a.weight * inv * inv;
  }
  return {lambda * sum - Scalar(1), -lambda * dsum};
}

}  // namespace detail

/// Unique root z* > max location of lambda * sum w_k / (z - l_k) = 1, i.e. the top
/// eigenvalue of diag(l) + lambda u u^T when w_k = u_k^2.
///
/// f is strictly decreasing and convex to the right of the top atom, with f -> +inf at
/// the pole and f -> -1 at infinity; the root also satisfies z* <= max + lambda. The
/// bracket is narrowed by bisection, then Newton steps (kept inside the bracket) polish
/// to rounding level, well inside |f(z*)| <= 1e-12.
template <typename Scalar>
Scalar secular_largest_root(const WeightedSpectralMeasure<Scalar>& mu, Scalar lambda) {
  detail::require(lambda > Scalar(0), "secular_largest_root: lambda must be positive, got ", lambda);
  const auto [top, top_weight] = mu.top();
  if (!(top_weight > Scalar(0)))
    throw SecularError("secular_largest_root: the largest atom has zero weight; no root is guaranteed beyond it");

  const Scalar spread = mu.spread();
  const Scalar unit = spread > Scalar(0) ? spread : std::max(std::abs(top), Scalar(1));
  Scalar lo = top + Scalar(1e-9) * unit;
  Scalar hi = top + lambda;
  // Tiny top weights can put the root inside (top, top + 1e-9 * spread].
  while (detail::secular_value(mu, lambda, lo).first <= Scalar(0) && lo > top) {
    hi = lo;
    lo = top + (lo - top) * Scalar(1e-3);
    if (lo == top) break;
  }
  if (detail::secular_value(mu, lambda, hi).first > Scalar(0)) hi = top + Scalar(2) * lambda;

  const Scalar width0 = hi - lo;
  for (int i = 0; i < 60 && (hi - lo) > width0 * Scalar(1e-4); ++i) {
    const Scalar mid = lo + (hi - lo) / Scalar(2);
    const Scalar f = detail::secular_value(mu, lambda, mid).first;
    if (f == Scalar(0)) return mid;
    (f > Scalar(0) ? lo : hi) = mid;
  }
  // Newton from the left end is monotone for a convex decreasing f. Iterate until the
  // step is at rounding level rather than stopping at the first |f| <= 1e-12.
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Scalar z = lo;
  for (int i = 0; i < 200; ++i) {
    const auto [f, df] = detail::secular_value(mu, lambda, z);
    if (f == Scalar(0)) return z;
    if (f > Scalar(0)) lo = z; else hi = z;
    Scalar next = z - f / df;
    if (!(next > lo && next < hi)) next = lo + (hi - lo) / Scalar(2);
    if (std::abs(next - z) <= Scalar(2) * eps * std::abs(z) || hi - lo <= eps * std::abs(z)) return next;
    z = next;
  }
  return z;
}

}  // namespace spiked
