#pragma once

// Tolerance-constrained kernel regression.  A fit minimizes the regularizer
// subject to a mean-squared training error of exactly epsilon; the KKT system
// reduces to f(x) = g_x^T (cI + G)^{-1} y with a single positive multiplier c
// chosen so the error constraint is active.  In the eigenbasis the error is
//   err(c) = (1/K) * sum_k (z_k * c / (c + d_k))^2,
// a continuous strictly increasing function of c, so the multiplier is the
// unique root of err(c) = epsilon and is found by bracketed bisection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distillkit/errors.hpp"
#include "distillkit/kernels.hpp"
#include "distillkit/spectral.hpp"

namespace distillkit {

struct FitConfig {
  double epsilon = 0.0;          // target mean-squared training error, > 0
  double c_tolerance = 1e-12;    // relative bracket width at which bisection stops
  int max_bisection_iters = 200;
};

struct MultiplierBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Collapse regime: ||z||^2 <= K * epsilon means the zero function already
// meets the tolerance, so no positive multiplier exists.  Ties count as
// collapsed; the comparison carries 1e-14 of relative slack toward collapse.
inline bool collapse_regime(double norm_z_sq, std::size_t k, double epsilon) {
  return norm_z_sq <= double(k) * epsilon * (1.0 + 1e-14);
}

namespace detail {

inline void check_fit_config(const FitConfig& config) {
  if (!(config.epsilon > 0.0) || !std::isfinite(config.epsilon))
    throw PreconditionViolation("FitConfig: epsilon must be positive and finite, got " +
                                num(config.epsilon));
  if (!(config.c_tolerance > 0.0))
    throw PreconditionViolation("FitConfig: c_tolerance must be positive");
  if (config.max_bisection_iters < 1)
    throw PreconditionViolation("FitConfig: max_bisection_iters must be at least 1");
}

inline double norm_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace detail

// Mean-squared training error of the multiplier-c solution, evaluated in the
// eigenbasis.  Null directions (d_k = 0) contribute their full z_k^2 / K for
// every c: nothing in the span of the kernel sections can reduce them.
inline double training_error(const GramSpectrum& spectrum, std::span<const double> z, double c) {
  if (z.size() != spectrum.dim)
    throw DimensionMismatch("training_error: coefficient length " + std::to_string(z.size()) +
                            " does not match spectrum dimension " + std::to_string(spectrum.dim));
  if (!(c >= 0.0) || !std::isfinite(c))
    throw PreconditionViolation("training_error: multiplier must be finite and nonnegative, got " +
                                detail::num(c));
  double acc = 0.0;
  for (std::size_t k = 0; k < spectrum.dim; ++k) {
    const double denom = c + spectrum.eigvals[k];
    const double ratio = denom > 0.0 ? c / denom : 1.0;  // d = c = 0 limits to 1
    const double term = z[k] * ratio;
    acc += term * term;
  }
  return acc / double(spectrum.dim);
}

// Bracket for the multiplier root: substituting d_min (resp. d_max) for every
// eigenvalue turns err(c) into a closed form whose root bounds the true
// multiplier from below (resp. above):
//   d_min * sqrt(K eps) / (||z|| - sqrt(K eps)) <= c <= d_max * (same factor).
inline MultiplierBounds multiplier_bounds(const GramSpectrum& spectrum, std::span<const double> z,
                                          double epsilon) {
  if (z.size() != spectrum.dim)
    throw DimensionMismatch("multiplier_bounds: coefficient length " + std::to_string(z.size()) +
                            " does not match spectrum dimension " + std::to_string(spectrum.dim));
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw PreconditionViolation("multiplier_bounds: epsilon must be positive and finite");
  const double nsq = detail::norm_sq(z);
  if (collapse_regime(nsq, spectrum.dim, epsilon))
    throw CollapseCondition("multiplier_bounds: ||z||^2 = " + detail::num(nsq) +
                            " is within K*epsilon = " + detail::num(double(spectrum.dim) * epsilon) +
                            "; only the zero function meets the tolerance");
  const double ske = std::sqrt(double(spectrum.dim) * epsilon);
  const double factor = ske / (std::sqrt(nsq) - ske);
  return {spectrum.d_min() * factor, spectrum.d_max() * factor};
}

// Unique root of err(c) = epsilon by bisection over the multiplier bracket.
// The bracket ends are expanded outward by factors of two if rounding leaves
// them on the wrong side of the root.  Iteration stops when |err - epsilon|
// is at machine level or the bracket is relatively narrower than c_tolerance.
inline double solve_multiplier(const GramSpectrum& spectrum, std::span<const double> z,
                               const FitConfig& config) {
  detail::check_fit_config(config);
  const MultiplierBounds bracket = multiplier_bounds(spectrum, z, config.epsilon);
  const auto h = [&](double c) { return training_error(spectrum, z, c) - config.epsilon; };

  double lo = bracket.lower;
  double hi = bracket.upper;
  int guard = 0;
  while (lo > 0.0 && h(lo) > 0.0 && guard++ < 200) lo *= 0.5;
  if (h(lo) > 0.0) {
    // With lo at (or driven to) zero the error is the irreducible residual of
    // the null directions; if that already exceeds epsilon no multiplier works.
    throw ConvergenceFailure("solve_multiplier: no bracket; error at c->0 is " +
                             detail::num(training_error(spectrum, z, lo)) +
                             " which exceeds epsilon = " + detail::num(config.epsilon));
  }
  guard = 0;
  while (h(hi) < 0.0 && guard++ < 200) hi *= 2.0;
  if (h(hi) < 0.0)
    throw ConvergenceFailure("solve_multiplier: upper bracket could not be established");

  // Every returned root carries a certificate: the achieved error must sit
  // within max(1e-10, 1e-12 epsilon) of the target, or the solve fails loudly
  // rather than hand back an uncertified multiplier.
  const double err_tol = std::max(1e-10, 1e-12 * config.epsilon);
  const auto certified = [&](double c) {
    const double gap = std::abs(h(c));
    if (gap > err_tol)
      throw ConvergenceFailure("solve_multiplier: root certificate failed; |error - epsilon| = " +
                               detail::num(gap) + " exceeds " + detail::num(err_tol));
    return c;
  };

  for (int iter = 0; iter < config.max_bisection_iters; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double hm = h(mid);
    if (std::abs(hm) <= 1e-14) return mid;  // inside any certificate tolerance
    if (hm < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= config.c_tolerance * mid) return certified(0.5 * (lo + hi));
  }
  throw ConvergenceFailure("solve_multiplier: bisection did not converge within " +
                           std::to_string(config.max_bisection_iters) + " iterations");
}

// A fitted model in representer form: f(x) = g_x . dual_coeffs.
struct RegressionModel {
  double c = 0.0;
  std::vector<double> dual_coeffs;
  KernelSpec kernel = KernelSpec::cubic_spline_green();
  std::vector<Point> data_points;
  double achieved_error = 0.0;
};

// Fit against a precomputed spectrum (the chain reuses one eigendecomposition
// across rounds).  Dual coefficients come from the factored inverse
// V^T (cI + D)^{-1} V y, which stays finite on null directions.
inline RegressionModel fit_with_spectrum(const GramSpectrum& spectrum,
                                         std::span<const Point> points,
                                         std::span<const double> labels, const KernelSpec& kernel,
                                         const FitConfig& config) {
  if (points.size() != spectrum.dim || labels.size() != spectrum.dim)
    throw DimensionMismatch("fit: points/labels/spectrum dimensions disagree");
  const std::vector<double> z = rotate(spectrum, labels);
  const double c = solve_multiplier(spectrum, z, config);
  std::vector<double> w(spectrum.dim);
  for (std::size_t k = 0; k < spectrum.dim; ++k) w[k] = z[k] / (c + spectrum.eigvals[k]);
  RegressionModel model;
  model.c = c;
  model.dual_coeffs = rotate_back(spectrum, w);
  model.kernel = kernel;
  model.data_points.assign(points.begin(), points.end());
  model.achieved_error = training_error(spectrum, z, c);
  return model;
}

inline RegressionModel fit(const Dataset& data, const KernelSpec& kernel, const FitConfig& config) {
  const GramSpectrum spectrum = eigendecompose_allow_null(build_gram(kernel, data));
  return fit_with_spectrum(spectrum, data.points, data.labels, kernel, config);
}

inline double predict(const RegressionModel& model, const Point& x) {
  const std::vector<double> gx = kernel_vector(model.kernel, model.data_points, x);
  double acc = 0.0;
  for (std::size_t k = 0; k < gx.size(); ++k) acc += gx[k] * model.dual_coeffs[k];
  return acc;
}

// Multiple label vectors over shared points.  The Gram eigendecomposition is
// computed once; outputs whose labels fall in the collapse regime come back
// as empty optionals (their solution is the zero function) instead of
// aborting the other outputs.
struct MulticlassFit {
  std::vector<std::optional<RegressionModel>> models;
};

inline MulticlassFit fit_multiclass(const std::vector<Point>& points,
                                    const std::vector<std::vector<double>>& label_sets,
                                    const KernelSpec& kernel, const FitConfig& config) {
  if (label_sets.empty())
    throw PreconditionViolation("fit_multiclass: at least one label vector is required");
  for (const auto& ys : label_sets)
    if (ys.size() != points.size())
      throw DimensionMismatch("fit_multiclass: label vector length " + std::to_string(ys.size()) +
                              " does not match " + std::to_string(points.size()) + " points");
  // Route through Dataset::make for the shared validation (distinctness etc.).
  const Dataset probe = Dataset::make(points, label_sets.front());
  const GramSpectrum spectrum = eigendecompose_allow_null(build_gram(kernel, probe));
  MulticlassFit out;
  out.models.resize(label_sets.size());
  for (std::size_t q = 0; q < label_sets.size(); ++q) {
    try {
      out.models[q] = fit_with_spectrum(spectrum, points, label_sets[q], kernel, config);
    } catch (const CollapseCondition&) {
      // Stays disengaged: the zero function already meets this tolerance.
    }
  }
  return out;
}

}  // namespace distillkit
