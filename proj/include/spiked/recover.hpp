#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spiked/core.hpp"
#include "spiked/matgen.hpp"
#include "spiked/random.hpp"

namespace spiked {

/// Which penalty term enters the update.
enum class PenaltyVariant {
  /// gamma * (x^T x) * 1: the printed rule, applied as a constant shift of every entry.
  Literal,
  /// 2 * gamma * x: the gradient of gamma * ||x||^2, for comparison.
  Gradient,
};

inline std::string to_string(PenaltyVariant p) { return p == PenaltyVariant::Literal ? "literal" : "gradient"; }

inline PenaltyVariant penalty_from_string(const std::string& s) {
  if (s == "literal") return PenaltyVariant::Literal;
  if (s == "gradient") return PenaltyVariant::Gradient;
  throw InvalidArgument("unknown penalty variant '" + s + "' (expected literal or gradient)");
}

struct RecoveryConfig {
  double alpha = 0.1;
  double gamma = 0.1;
  /// Stop once ||x_{k+1} - x_k|| / ||x_{k+1}|| <= tol.
  double tol = 1e-5;
  Index max_iter = 10000;
  double tau = 0.2;
  PenaltyVariant penalty = PenaltyVariant::Literal;
  bool record_trajectory = false;

  void validate() const {
    detail::require(alpha > 0.0 && alpha <= 1.0, "RecoveryConfig: alpha must be in (0, 1], got ", alpha);
    detail::require(gamma >= 0.0, "RecoveryConfig: gamma must be >= 0, got ", gamma);
    detail::require(tol > 0.0, "RecoveryConfig: tol must be positive, got ", tol);
    detail::require(max_iter >= 1, "RecoveryConfig: max_iter must be >= 1, got ", max_iter);
    detail::require(tau > 0.0, "RecoveryConfig: tau must be positive, got ", tau);
  }
};

/// Unprojected output of the descent loop.
template <typename Scalar = double>
struct DescentTrace {
  Vector<Scalar> x;
  Index iterations = 0;
  bool converged = false;
  std::vector<Scalar> trajectory;  // per-step relative change, if recorded
};

template <typename Scalar = double>
struct RecoveryResult {
  Vector<Scalar> x_hat;
  Index iterations = 0;
  bool converged = false;
  std::vector<Scalar> trajectory;
  /// Entries of x_hat above tau + 1e-9; renormalizing after the clip can push entries past tau.
  Index tau_violations = 0;
};

/// Uniform draws on [0, tau], then scaled to unit L2 norm (entries may then exceed tau).
template <typename Scalar = double>
Vector<Scalar> init_iterate(Index n, Scalar tau, Seed seed) {
  detail::require(n >= 1, "init_iterate: n must be >= 1, got ", n);
  detail::require(tau > Scalar(0), "init_iterate: tau must be positive, got ", tau);
  Rng rng(seed);
  Vector<Scalar> x(n);
  for (Index i = 0; i < n; ++i) x[i] = static_cast<Scalar>(rng.uniform(0.0, static_cast<double>(tau)));
  const Scalar nrm = x.norm();
  if (nrm == Scalar(0)) x.setConstant(Scalar(1) / std::sqrt(static_cast<Scalar>(n)));
  else x /= nrm;
  return x;
}

/// One step x - alpha * [(x x^T - X) x + penalty], where penalty is gamma (x^T x) 1 for
/// the literal rule. The rank-one product is formed as x (x^T x), never as a matrix.
template <typename Scalar, typename Derived>
Vector<Scalar> gd_step(const Eigen::MatrixBase<Derived>& x, const SymmetricMatrix<Scalar>& observed, Scalar alpha,
                       Scalar gamma, PenaltyVariant penalty = PenaltyVariant::Literal) {
  detail::require(x.size() == observed.dim(), "gd_step: iterate length ", x.size(), " does not match matrix dimension ",
                  observed.dim());
  if (!x.allFinite()) throw NumericalFailure("gd_step: non-finite entry in the iterate", 0);
  const Scalar sq = x.squaredNorm();
  Vector<Scalar> direction = sq * x - observed.matrix() * x;
  if (penalty == PenaltyVariant::Literal) direction.array() += gamma * sq;
  else direction += (Scalar(2) * gamma) * x;
  Vector<Scalar> next = x - alpha * direction;
  if (!next.allFinite()) throw NumericalFailure("gd_step: update produced a non-finite entry", 0);
  return next;
}

/// Iterates gd_step from init_iterate(seed) until the relative change drops to config.tol
/// or config.max_iter steps are taken. No projection.
template <typename Scalar>
DescentTrace<Scalar> descend(const SymmetricMatrix<Scalar>& observed, const RecoveryConfig& config, Seed seed) {
  config.validate();
  const auto alpha = static_cast<Scalar>(config.alpha);
  const auto gamma = static_cast<Scalar>(config.gamma);
  DescentTrace<Scalar> trace;
  trace.x = init_iterate<Scalar>(observed.dim(), static_cast<Scalar>(config.tau), seed);
  for (Index k = 1; k <= config.max_iter; ++k) {
    Vector<Scalar> next;
    try {
      next = gd_step(trace.x, observed, alpha, gamma, config.penalty);
    } catch (const NumericalFailure&) {
      throw NumericalFailure("descend: iterate became non-finite at iteration " + std::to_string(k), k);
    }
    const Scalar step = (next - trace.x).norm();
    const Scalar size = next.norm();
    const Scalar change = size > Scalar(0) ? step / size : (step == Scalar(0) ? Scalar(0) : std::numeric_limits<Scalar>::infinity());
    trace.x = std::move(next);
    trace.iterations = k;
    if (config.record_trajectory) trace.trajectory.push_back(change);
    if (change <= static_cast<Scalar>(config.tol)) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

/// Normalize, clip every entry to [0, tau], normalize again.
template <typename Derived>
Vector<typename Derived::Scalar> project_box_sphere(const Eigen::MatrixBase<Derived>& x,
                                                    typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  detail::require(tau > Scalar(0), "project_box_sphere: tau must be positive, got ", tau);
  const Scalar n0 = x.norm();
  if (!(n0 > Scalar(0)) || !std::isfinite(static_cast<double>(n0)))
    throw ProjectionFailure("project_box_sphere: input vector has zero or non-finite norm");
  Vector<Scalar> y = (x / n0).cwiseMax(Scalar(0)).cwiseMin(tau);
  const Scalar n1 = y.norm();
  if (!(n1 > Scalar(0)))
    throw ProjectionFailure("project_box_sphere: every entry clipped to zero (no positive entries)");
  return y / n1;
}

/// descend() followed by project_box_sphere(). Throws ProjectionFailure when the
/// descended iterate has no positive entry.
template <typename Scalar>
RecoveryResult<Scalar> run_descent(const SymmetricMatrix<Scalar>& observed, const RecoveryConfig& config, Seed seed) {
  DescentTrace<Scalar> trace = descend(observed, config, seed);
  RecoveryResult<Scalar> out;
  try {
    out.x_hat = project_box_sphere(trace.x, static_cast<Scalar>(config.tau));
  } catch (const ProjectionFailure& e) {
    throw ProjectionFailure(std::string(e.what()) + " after " + std::to_string(trace.iterations) + " iterations" +
                            (trace.converged ? " (converged)" : " (not converged)"));
  }
  out.iterations = trace.iterations;
  out.converged = trace.converged;
  out.trajectory = std::move(trace.trajectory);
  out.tau_violations = (out.x_hat.array() > static_cast<Scalar>(config.tau) + Scalar(1e-9)).count();
  return out;
}

/// 100 * ||x1 - x|| / ||x1||, in percent.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar relative_error(const Eigen::MatrixBase<DerivedA>& x1, const Eigen::MatrixBase<DerivedB>& x) {
  using Scalar = typename DerivedA::Scalar;
  detail::require(x1.size() == x.size(), "relative_error: length mismatch ", x1.size(), " vs ", x.size());
  const Scalar ref = x1.norm();
  detail::require(ref > Scalar(0), "relative_error: reference vector is zero");
  return Scalar(100) * (x1 - x.template cast<Scalar>()).norm() / ref;
}

template <typename Scalar, typename Derived>
Scalar relative_error(const SignalVector<Scalar>& x1, const Eigen::MatrixBase<Derived>& x) {
  return relative_error(x1.entries(), x);
}

}  // namespace spiked
