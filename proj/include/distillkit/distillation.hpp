#pragma once

// The self-distillation chain.  Round 0 fits the original labels y_0; every
// later round fits the previous model's training-point predictions.  In the
// shared eigenbasis the whole evolution is diagonal:
//   z_{t+1} = A_t z_t          with A_t = diag(d_k / (c_t + d_k)),
//   y_{t+1} = V^T z_{t+1},
//   B_t     = A_0 A_1 ... A_t  (cumulative shrinkage per eigendirection),
// so one eigendecomposition serves the entire chain.  The chain ends when the
// propagated targets enter the collapse regime or max_rounds is reached.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distillkit/errors.hpp"
#include "distillkit/kernels.hpp"
#include "distillkit/regression.hpp"
#include "distillkit/spectral.hpp"

namespace distillkit {

struct DistillationState {
  std::size_t t = 0;
  std::vector<double> y;        // targets fitted at this round
  std::vector<double> z;        // V y
  std::vector<double> z0;       // V y_0, carried so later rounds can report error against y_0
  double c = 0.0;               // multiplier solved at this round
  std::vector<double> a_diag;   // d_k / (c + d_k); exact zero on null directions
  std::vector<double> b_diag;   // cumulative product of a_diag over rounds 0..t
  double norm_z = 0.0;
  double train_error = 0.0;         // mean-squared error of this round's fit against y_t
  double train_error_vs_y0 = 0.0;   // mean-squared error of this round's fit against y_0
};

struct DistillationTrace {
  std::vector<DistillationState> states;
  std::optional<std::size_t> collapsed_at;  // first round whose targets were collapsed
  GramSpectrum spectrum;
  std::vector<double> y0;
  double epsilon = 0.0;
  KernelSpec kernel = KernelSpec::cubic_spline_green();
  std::vector<Point> points;
};

namespace detail {

inline std::vector<double> shrinkage_diag(const GramSpectrum& spectrum, double c) {
  std::vector<double> a(spectrum.dim);
  for (std::size_t k = 0; k < spectrum.dim; ++k) {
    const double d = spectrum.eigvals[k];
    a[k] = d > 0.0 ? d / (c + d) : 0.0;
  }
  return a;
}

inline double error_against_z0(std::span<const double> b_diag, std::span<const double> z0) {
  double acc = 0.0;
  for (std::size_t k = 0; k < z0.size(); ++k) {
    const double r = (1.0 - b_diag[k]) * z0[k];
    acc += r * r;
  }
  return acc / double(z0.size());
}

}  // namespace detail

// Round-0 state.  Throws CollapseCondition if the original labels are already
// in the collapse regime.
inline DistillationState make_initial_state(const GramSpectrum& spectrum,
                                            std::span<const double> y0, const FitConfig& config) {
  DistillationState st;
  st.t = 0;
  st.z = rotate(spectrum, y0);
  st.z0 = st.z;
  st.y.assign(y0.begin(), y0.end());
  st.c = solve_multiplier(spectrum, st.z, config);  // CollapseCondition surfaces here
  st.a_diag = detail::shrinkage_diag(spectrum, st.c);
  st.b_diag = st.a_diag;
  st.norm_z = std::sqrt(detail::norm_sq(st.z));
  st.train_error = training_error(spectrum, st.z, st.c);
  st.train_error_vs_y0 = detail::error_against_z0(st.b_diag, st.z0);
  return st;
}

// One distillation round: propagate the previous model's predictions as the
// new targets and fit them.  Returns nullopt when the propagated targets are
// collapsed (the would-be round has no nonzero solution).
inline std::optional<DistillationState> distill_step(const GramSpectrum& spectrum,
                                                     const DistillationState& prev,
                                                     const FitConfig& config) {
  if (prev.z.size() != spectrum.dim || prev.a_diag.size() != spectrum.dim)
    throw DimensionMismatch("distill_step: state does not match spectrum dimension " +
                            std::to_string(spectrum.dim));
  std::vector<double> z_next(spectrum.dim);
  for (std::size_t k = 0; k < spectrum.dim; ++k) z_next[k] = prev.a_diag[k] * prev.z[k];
  if (collapse_regime(detail::norm_sq(z_next), spectrum.dim, config.epsilon)) return std::nullopt;

  DistillationState st;
  st.t = prev.t + 1;
  st.z = std::move(z_next);
  st.z0 = prev.z0;
  st.y = rotate_back(spectrum, st.z);
  st.c = solve_multiplier(spectrum, st.z, config);
  st.a_diag = detail::shrinkage_diag(spectrum, st.c);
  st.b_diag.resize(spectrum.dim);
  for (std::size_t k = 0; k < spectrum.dim; ++k) st.b_diag[k] = prev.b_diag[k] * st.a_diag[k];
  st.norm_z = std::sqrt(detail::norm_sq(st.z));
  st.train_error = training_error(spectrum, st.z, st.c);
  st.train_error_vs_y0 = detail::error_against_z0(st.b_diag, st.z0);
  return st;
}

// Run the chain until collapse or max_rounds recorded states.  collapsed_at is
// set only when a collapse was actually observed; hitting max_rounds leaves it
// empty.
inline DistillationTrace run_chain(const Dataset& data, const KernelSpec& kernel,
                                   const FitConfig& config, std::size_t max_rounds = 50) {
  if (max_rounds == 0) throw PreconditionViolation("run_chain: max_rounds must be at least 1");
  DistillationTrace trace;
  trace.spectrum = eigendecompose_allow_null(build_gram(kernel, data));
  trace.y0 = data.labels;
  trace.epsilon = config.epsilon;
  trace.kernel = kernel;
  trace.points = data.points;
  trace.states.push_back(make_initial_state(trace.spectrum, data.labels, config));
  while (trace.states.size() < max_rounds) {
    std::optional<DistillationState> next = distill_step(trace.spectrum, trace.states.back(), config);
    if (!next) {
      trace.collapsed_at = trace.states.size();
      break;
    }
    trace.states.push_back(std::move(*next));
  }
  return trace;
}

// Reconstruct the fitted model of a recorded round.  The dual coefficients
// are V^T (c_t I + D)^{-1} z_t, identical to the factored product form
// V^T D^{-1} B_t V y_0 wherever the latter is defined.
inline RegressionModel model_at(const DistillationTrace& trace, std::size_t t) {
  if (t >= trace.states.size()) {
    if (trace.collapsed_at && t >= *trace.collapsed_at)
      throw CollapsedRound("model_at: round " + std::to_string(t) +
                           " collapsed; no model exists from round " +
                           std::to_string(*trace.collapsed_at) + " on");
    throw OutOfRange("model_at: round " + std::to_string(t) + " not recorded (trace has " +
                     std::to_string(trace.states.size()) + " rounds)");
  }
  const DistillationState& st = trace.states[t];
  std::vector<double> w(trace.spectrum.dim);
  for (std::size_t k = 0; k < trace.spectrum.dim; ++k)
    w[k] = st.z[k] / (st.c + trace.spectrum.eigvals[k]);
  RegressionModel model;
  model.c = st.c;
  model.dual_coeffs = rotate_back(trace.spectrum, w);
  model.kernel = trace.kernel;
  model.data_points = trace.points;
  model.achieved_error = st.train_error;
  return model;
}

// p_x = D^{-1} V g_x, the query point's coordinates in the eigenbasis scaled
// by inverse eigenvalues.  Any round-t prediction is then p_x . (B_t z_0).
// Null directions get an exact zero: kernel sections are orthogonal to the
// Gram null space, so the 0/0 limit is structurally zero.
inline std::vector<double> basis_projection(const GramSpectrum& spectrum, const KernelSpec& kernel,
                                            std::span<const Point> points, const Point& x) {
  if (points.size() != spectrum.dim)
    throw DimensionMismatch("basis_projection: point count " + std::to_string(points.size()) +
                            " does not match spectrum dimension " + std::to_string(spectrum.dim));
  const std::vector<double> gx = kernel_vector(kernel, points, x);
  const std::vector<double> w = rotate(spectrum, gx);
  std::vector<double> p(spectrum.dim);
  for (std::size_t k = 0; k < spectrum.dim; ++k)
    p[k] = spectrum.eigvals[k] > 0.0 ? w[k] / spectrum.eigvals[k] : 0.0;
  return p;
}

}  // namespace distillkit
