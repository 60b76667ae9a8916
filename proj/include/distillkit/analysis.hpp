#pragma once

// Closed-form bounds and diagnostics for distillation traces, plus the
// machinery to compare each bound against what a trace actually did.
//
// Everything here is expressed through three trace-level scalars:
//   r0 = ||z_0|| / sqrt(K eps)   (how far the labels start from collapse),
//   kappa = d_max / d_min        (spectrum conditioning),
//   m  = r0 - 1,
// and the Gram eigenvalues.  On spectra with a null space the literal kappa
// is infinite; bounds stay valid there but degenerate to trivial statements,
// so the report also carries the positive-restricted kappa, which governs the
// chain from round 1 on (null components of z are annihilated by round 0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distillkit/distillation.hpp"
#include "distillkit/errors.hpp"
#include "distillkit/regression.hpp"
#include "distillkit/spectral.hpp"

namespace distillkit {

namespace detail {

inline double sqrt_k_eps(std::size_t k, double epsilon) {
  if (k == 0) throw PreconditionViolation("point count must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw PreconditionViolation("epsilon must be positive and finite, got " + num(epsilon));
  return std::sqrt(double(k) * epsilon);
}

inline std::vector<double> positive_eigvals(const GramSpectrum& spectrum) {
  std::vector<double> pos;
  pos.reserve(spectrum.dim);
  for (double d : spectrum.eigvals)
    if (d > 0.0) pos.push_back(d);
  return pos;
}

// max/min of diag entries restricted to directions with positive eigenvalue.
inline double positive_spread(std::span<const double> diag, std::span<const double> eigvals) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t k = 0; k < diag.size(); ++k) {
    if (eigvals[k] <= 0.0) continue;
    lo = std::min(lo, diag[k]);
    hi = std::max(hi, diag[k]);
  }
  if (!(lo > 0.0) || !std::isfinite(lo))
    throw PreconditionViolation("diagonal spread needs positive entries on positive directions");
  return hi / lo;
}

}  // namespace detail

// Lower bound on ||z_t|| given only r0, kappa, and t:
//   ||z_t|| >= a^t ||z_0|| - sqrt(K eps) b (a^t - 1)/(a - 1),
//   a = ((r0-1)^2 + kappa(2 r0 - 1)) / (r0 - 1 + kappa)^2,
//   b = r0^2 kappa / (r0 - 1 + kappa)^2.
// kappa = 1 makes a = b = 1 and the geometric sum degenerates; the analytic
// limit is ||z_0|| - t sqrt(K eps).  kappa = +inf gives a = b = 0: the bound
// collapses to ||z_0|| at t = 0 and 0 afterwards (valid, but vacuous).
inline double z_norm_lower_bound(double r0, double kappa, std::size_t k, double epsilon,
                                 std::size_t t) {
  const double root_k_eps = detail::sqrt_k_eps(k, epsilon);
  if (!(r0 > 1.0)) throw PreconditionViolation("z_norm_lower_bound: requires r0 > 1, got " + detail::num(r0));
  if (!(kappa >= 1.0)) throw PreconditionViolation("z_norm_lower_bound: requires kappa >= 1, got " + detail::num(kappa));
  const double norm_z0 = r0 * root_k_eps;
  if (t == 0) return norm_z0;
  if (std::isinf(kappa)) return 0.0;
  const double denom = (r0 - 1.0 + kappa) * (r0 - 1.0 + kappa);
  const double a = ((r0 - 1.0) * (r0 - 1.0) + kappa * (2.0 * r0 - 1.0)) / denom;
  const double b = r0 * r0 * kappa / denom;
  const double a_pow_t = std::pow(a, double(t));
  const double geom = std::abs(a - 1.0) <= 1e-12 ? double(t) : (a_pow_t - 1.0) / (a - 1.0);
  return a_pow_t * norm_z0 - root_k_eps * b * geom;
}

// Number of rounds guaranteed to complete before collapse:
//   t_under = (||y_0||/sqrt(K eps) - 1) / kappa.
// Real-valued; callers floor it when counting whole rounds.
inline double guaranteed_rounds(double norm_y0, std::size_t k, double epsilon, double kappa) {
  const double root_k_eps = detail::sqrt_k_eps(k, epsilon);
  if (!(norm_y0 > root_k_eps))
    throw CollapseCondition("guaranteed_rounds: ||y_0|| = " + detail::num(norm_y0) +
                            " is not above the collapse threshold " + detail::num(root_k_eps));
  if (!(kappa >= 1.0))
    throw PreconditionViolation("guaranteed_rounds: requires kappa >= 1, got " + detail::num(kappa));
  if (std::isinf(kappa)) return 0.0;
  return (norm_y0 / root_k_eps - 1.0) / kappa;
}

// Lower bound on the cumulative-shrinkage ratio B[k]/B[j] for a direction
// pair with d_k > d_j, after the number of rounds given as the exponent:
//   ratio >= ((m + d_min/d_j) / (m + d_min/d_k))^t,   m = ||y_0||/sqrt(K eps) - 1.
// The guarantee behind this bound only covers exponents up to
// guaranteed_rounds(...); this function evaluates the formula for any t >= 0
// and leaves that hypothesis to the caller, which has the global kappa.
inline double ratio_lower_bound(double norm_y0, std::size_t k, double epsilon, double d_min,
                                double d_j, double d_k, double t_exponent) {
  const double root_k_eps = detail::sqrt_k_eps(k, epsilon);
  if (!(norm_y0 > root_k_eps))
    throw CollapseCondition("ratio_lower_bound: ||y_0|| = " + detail::num(norm_y0) +
                            " is not above the collapse threshold " + detail::num(root_k_eps));
  if (!(d_j > 0.0) || !(d_k > d_j))
    throw PreconditionViolation("ratio_lower_bound: requires d_k > d_j > 0, got d_j = " +
                                detail::num(d_j) + ", d_k = " + detail::num(d_k));
  if (!(d_min > 0.0))
    throw PreconditionViolation("ratio_lower_bound: requires d_min > 0, got " + detail::num(d_min));
  if (!(t_exponent >= 0.0))
    throw PreconditionViolation("ratio_lower_bound: exponent must be nonnegative, got " +
                                detail::num(t_exponent));
  const double m = norm_y0 / root_k_eps - 1.0;
  return std::pow((m + d_min / d_j) / (m + d_min / d_k), t_exponent);
}

// True when some adjacent pair of the (ascending) eigenvalues coincides to
// within an absolute tolerance.  Degenerate pairs make the sparsity ratio for
// that pair exactly 1, pinning the whole index at 1; the value convention is
// to report that 1 rather than fail, and this flag marks it.
inline bool has_adjacent_degeneracy(std::span<const double> sorted_eigvals, double tol = 1e-14) {
  for (std::size_t k = 0; k + 1 < sorted_eigvals.size(); ++k)
    if (sorted_eigvals[k + 1] - sorted_eigvals[k] <= tol) return true;
  return false;
}

namespace detail {

inline void check_sorted_positive(std::span<const double> sorted_eigvals) {
  if (sorted_eigvals.size() < 2)
    throw PreconditionViolation("needs at least two eigenvalues, got " +
                                std::to_string(sorted_eigvals.size()));
  if (!(sorted_eigvals.front() > 0.0))
    throw PreconditionViolation("eigenvalues must be positive, smallest is " +
                                num(sorted_eigvals.front()));
  for (std::size_t k = 0; k + 1 < sorted_eigvals.size(); ++k)
    if (sorted_eigvals[k + 1] < sorted_eigvals[k])
      throw PreconditionViolation("eigenvalues must be sorted ascending");
}

}  // namespace detail

// Sparsity index of the cumulative shrinkage after the given exponent's worth
// of rounds: the smallest adjacent-pair ratio bound, raised to the exponent.
// The exponent is real because the guaranteed-round count it is usually
// evaluated at is real.  Adjacent degeneracy yields exactly 1 (see above).
inline double sparsity_index(double norm_y0, std::size_t k, double epsilon, double d_min,
                             std::span<const double> sorted_eigvals, double t_exponent) {
  const double root_k_eps = detail::sqrt_k_eps(k, epsilon);
  detail::check_sorted_positive(sorted_eigvals);
  if (!(norm_y0 > root_k_eps))
    throw CollapseCondition("sparsity_index: ||y_0|| = " + detail::num(norm_y0) +
                            " is not above the collapse threshold " + detail::num(root_k_eps));
  if (!(d_min > 0.0) || !(t_exponent >= 0.0))
    throw PreconditionViolation("sparsity_index: requires d_min > 0 and a nonnegative exponent");
  const double m = norm_y0 / root_k_eps - 1.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < sorted_eigvals.size(); ++i) {
    const double ratio = (m + d_min / sorted_eigvals[i]) / (m + d_min / sorted_eigvals[i + 1]);
    min_ratio = std::min(min_ratio, ratio);
  }
  return std::pow(min_ratio, t_exponent);
}

// Limit of the sparsity index at the guaranteed-round count as epsilon -> 0:
//   exp((d_min/kappa) min_k (1/d_k - 1/d_{k+1})).
// The index at t_under(epsilon) increases toward this as epsilon shrinks.
inline double sparsity_limit(double d_min, double kappa, std::span<const double> sorted_eigvals) {
  detail::check_sorted_positive(sorted_eigvals);
  if (!(d_min > 0.0) || !(kappa >= 1.0))
    throw PreconditionViolation("sparsity_limit: requires d_min > 0 and kappa >= 1");
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < sorted_eigvals.size(); ++k)
    min_gap = std::min(min_gap, 1.0 / sorted_eigvals[k] - 1.0 / sorted_eigvals[k + 1]);
  if (std::isinf(kappa)) return 1.0;
  return std::exp(d_min / kappa * min_gap);
}

// Spectrum of the single-round ridge problem that reproduces the multi-round
// solution: running one fit with multiplier c_0 on a Gram matrix with these
// eigenvalues (same eigenvectors) gives exactly the round-t model, because
//   d_dag / (c_0 + d_dag) = prod_i d / (d + c_i)  with
//   d_dag = c_0 / (prod_i (d + c_i)/d  -  1).
// The product-minus-one is computed as expm1(sum log1p(c_i/d)) so tiny c_i
// don't lose the fractional part.  Zero eigenvalues map to zero (both sides
// of the identity vanish), extending the formula to spectra with null
// directions.  A single-entry history is the identity and returns the
// eigenvalues unchanged.
inline std::vector<double> equivalent_spectrum(std::span<const double> eigvals,
                                               std::span<const double> c_history) {
  if (c_history.empty())
    throw PreconditionViolation("equivalent_spectrum: multiplier history must be nonempty");
  for (double c : c_history)
    if (!(c > 0.0) || !std::isfinite(c))
      throw PreconditionViolation("equivalent_spectrum: multipliers must be positive and finite, got " +
                                  detail::num(c));
  for (double d : eigvals)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw PreconditionViolation("equivalent_spectrum: eigenvalues must be nonnegative, got " +
                                  detail::num(d));
  std::vector<double> d_dagger(eigvals.begin(), eigvals.end());
  if (c_history.size() == 1) return d_dagger;
  for (double& d : d_dagger) {
    if (d == 0.0) continue;
    double log_prod = 0.0;
    for (double c : c_history) log_prod += std::log1p(c / d);
    d = c_history[0] / std::expm1(log_prod);
  }
  return d_dagger;
}

// Two spectrum-only complexity readouts for an equivalent spectrum:
//   trace_proxy = sqrt(sum d_dag),
//   tail_proxy  = min over k in {0..K} of k/K + sqrt(mean of d_dag below rank k),
// with d_dag taken in nonincreasing order for the tail.  Both shrink as the
// multiplier history grows; no calibration constants are applied.
struct GeneralizationProxies {
  double trace_proxy = 0.0;
  double tail_proxy = 0.0;
};

inline GeneralizationProxies generalization_proxies(std::span<const double> d_dagger,
                                                    std::size_t k) {
  if (k == 0 || d_dagger.size() != k)
    throw PreconditionViolation("generalization_proxies: spectrum size " +
                                std::to_string(d_dagger.size()) + " must equal K = " +
                                std::to_string(k));
  for (double d : d_dagger)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw PreconditionViolation("generalization_proxies: spectrum must be nonnegative");
  std::vector<double> desc(d_dagger.begin(), d_dagger.end());
  std::sort(desc.begin(), desc.end(), std::greater<double>());
  GeneralizationProxies out;
  double total = 0.0;
  for (double d : desc) total += d;
  out.trace_proxy = std::sqrt(total);
  double best = std::numeric_limits<double>::infinity();
  double tail = total;
  for (std::size_t cut = 0; cut <= k; ++cut) {
    best = std::min(best, double(cut) / double(k) + std::sqrt(tail / double(k)));
    if (cut < k) tail -= desc[cut];
  }
  out.tail_proxy = best;
  return out;
}

// One matched-error comparison row: a single fit whose tolerance is chosen so
// its training error against the original labels equals what round t of the
// chain achieved.  The single fit's shrinkage diagonal d/(c' + d) always has
// a smaller max/min spread (over positive directions) than the chain's
// cumulative diagonal at the same error level — iterating sharpens the
// diagonal in a way one round cannot.
struct EarlyStoppingRow {
  std::size_t t = 0;            // chain round being matched
  double epsilon_prime = 0.0;   // tolerance handed to the single fit
  double c_prime = 0.0;         // multiplier the single fit solved
  std::vector<double> early_diag;
  std::vector<double> b_diag;   // chain's cumulative diagonal at round t
  double early_spread = 0.0;    // max/min of early_diag over positive directions
  double b_spread = 0.0;
  bool early_spread_smaller = false;
};

inline std::vector<EarlyStoppingRow> early_stopping_comparison(const DistillationTrace& trace) {
  if (trace.states.size() < 2)
    throw PreconditionViolation("early_stopping_comparison: needs at least two recorded rounds, got " +
                                std::to_string(trace.states.size()));
  const GramSpectrum& spectrum = trace.spectrum;
  const std::vector<double>& z0 = trace.states.front().z0;
  std::vector<EarlyStoppingRow> rows;
  for (std::size_t t = 1; t < trace.states.size(); ++t) {
    const DistillationState& st = trace.states[t];
    EarlyStoppingRow row;
    row.t = t;
    row.epsilon_prime = st.train_error_vs_y0;
    FitConfig relaxed;
    relaxed.epsilon = row.epsilon_prime;
    try {
      row.c_prime = solve_multiplier(spectrum, z0, relaxed);
    } catch (const Error& e) {
      throw MatchFailure("early_stopping_comparison: no single-fit tolerance reproduces round " +
                         std::to_string(t) + "'s error " + detail::num(row.epsilon_prime) + ": " +
                         e.what());
    }
    row.early_diag = detail::shrinkage_diag(spectrum, row.c_prime);
    row.b_diag = st.b_diag;
    row.early_spread = detail::positive_spread(row.early_diag, spectrum.eigvals);
    row.b_spread = detail::positive_spread(row.b_diag, spectrum.eigvals);
    row.early_spread_smaller = row.early_spread < row.b_spread;
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- Bound-vs-observed sweep over a whole trace ---------------------------

// One comparison.  `bound` and `observed` are oriented per quantity:
// quantities ending in _lower require observed >= bound, _upper requires
// observed <= bound, and consistency rows treat `bound` as an allowance on
// the observed deviation.  `t` is empty for whole-trace aggregates.
struct BoundRow {
  std::string quantity;
  std::optional<std::size_t> t;
  double bound = 0.0;
  double observed = 0.0;
  bool satisfied = false;
};

namespace detail {

constexpr double kBoundRelSlack = 1e-12;  // forgiveness for last-ulp ties in comparisons
constexpr double kConsistencyTol = 1e-12; // allowed relative drift re-deriving stored state

inline bool ge_with_slack(double observed, double bound) {
  return observed >= bound - kBoundRelSlack * std::max(1.0, std::abs(bound));
}

inline bool le_with_slack(double observed, double bound) {
  return observed <= bound + kBoundRelSlack * std::max(1.0, std::abs(bound));
}

}  // namespace detail

// Every closed-form bound this library knows, evaluated against a recorded
// trace.  Ratio rows appear only for rounds the guarantee actually covers
// (exponent <= guaranteed rounds under the literal kappa); spectra with a
// null space therefore produce none.
inline std::vector<BoundRow> bound_comparisons(const DistillationTrace& trace) {
  if (trace.states.empty()) throw PreconditionViolation("bound_comparisons: empty trace");
  const GramSpectrum& spectrum = trace.spectrum;
  const std::size_t dim = spectrum.dim;
  const double root_k_eps = detail::sqrt_k_eps(dim, trace.epsilon);
  const double norm_z0 = std::sqrt(detail::norm_sq(trace.states.front().z0));
  const double r0 = norm_z0 / root_k_eps;
  const double kappa = spectrum.cond;
  const double t_under = guaranteed_rounds(norm_z0, dim, trace.epsilon, kappa);

  std::vector<BoundRow> rows;
  const double c_chain_floor = spectrum.d_min() * root_k_eps / (norm_z0 - root_k_eps);

  std::vector<double> product(dim, 1.0);
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    const DistillationState& st = trace.states[t];

    rows.push_back({"z_norm_lower", t, z_norm_lower_bound(r0, kappa, dim, trace.epsilon, t),
                    st.norm_z, false});

    const MultiplierBounds bracket = multiplier_bounds(spectrum, st.z, trace.epsilon);
    rows.push_back({"c_bracket_lower", t, bracket.lower, st.c, false});
    rows.push_back({"c_bracket_upper", t, bracket.upper, st.c, false});
    rows.push_back({"c_chain_lower", t, c_chain_floor, st.c, false});

    // Re-derive the cumulative diagonal from the recorded per-round diagonals
    // and the norm from the recorded z; stored values must match.
    double b_dev = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      product[k] *= st.a_diag[k];
      const double scale = std::max({std::abs(product[k]), std::abs(st.b_diag[k]), 1e-300});
      b_dev = std::max(b_dev, std::abs(product[k] - st.b_diag[k]) / scale);
    }
    rows.push_back({"b_consistency", t, detail::kConsistencyTol, b_dev, false});
    const double norm_dev = std::abs(std::sqrt(detail::norm_sq(st.z)) - st.norm_z) /
                            std::max(st.norm_z, 1e-300);
    rows.push_back({"norm_consistency", t, detail::kConsistencyTol, norm_dev, false});

    // Cumulative-ratio bound for adjacent positive eigenvalue pairs; the
    // round-t diagonal corresponds to exponent t+1.
    const double exponent = double(t) + 1.0;
    if (exponent <= t_under && spectrum.d_min() > 0.0) {
      for (std::size_t k = 0; k + 1 < dim; ++k) {
        if (!(spectrum.eigvals[k] > 0.0) || !(spectrum.eigvals[k + 1] > spectrum.eigvals[k]))
          continue;
        const double bound = ratio_lower_bound(norm_z0, dim, trace.epsilon, spectrum.d_min(),
                                               spectrum.eigvals[k], spectrum.eigvals[k + 1],
                                               exponent);
        rows.push_back({"b_ratio_" + std::to_string(k) + "_" + std::to_string(k + 1), t, bound,
                        st.b_diag[k + 1] / st.b_diag[k], false});
      }
    }
  }

  rows.push_back({"guaranteed_rounds", std::nullopt, std::floor(t_under),
                  double(trace.states.size()), false});

  for (BoundRow& row : rows) {
    if (row.quantity == "c_bracket_upper")
      row.satisfied = detail::le_with_slack(row.observed, row.bound);
    else if (row.quantity == "b_consistency" || row.quantity == "norm_consistency")
      row.satisfied = row.observed <= row.bound;
    else
      row.satisfied = detail::ge_with_slack(row.observed, row.bound);
  }
  return rows;
}

// --- Whole-trace report ----------------------------------------------------

struct RatioBoundRow {
  std::size_t t = 0;        // trace round whose cumulative diagonal is compared
  std::size_t j = 0;        // smaller-eigenvalue index (global, ascending order)
  std::size_t k = 0;        // larger-eigenvalue index
  double bound = 0.0;       // formula value at exponent t+1
  double observed = 0.0;    // recorded b_diag[k] / b_diag[j]
  bool guaranteed = false;  // exponent within the literal-kappa guarantee
};

struct TheoryReport {
  double r0 = 0.0;
  double kappa = 0.0;                // literal d_max/d_min; +inf with a null space
  double kappa_positive = 0.0;       // d_max/d_min over positive eigenvalues
  double guaranteed_rounds = 0.0;    // under the literal kappa (0 when infinite)
  double guaranteed_rounds_positive = 0.0;
  std::vector<double> z_lower_bounds;        // per recorded round, literal kappa
  std::vector<RatioBoundRow> ratio_bounds;   // adjacent positive pairs, all rounds
  std::vector<double> sparsity_index_per_t;  // exponent t+1 at recorded round t
  double sparsity_at_t_under = 0.0;          // exponent = guaranteed_rounds_positive
  double sparsity_limit = 0.0;               // epsilon -> 0 closed form
  bool degenerate_spectrum = false;          // adjacent positive eigenvalues coincide
  std::vector<double> equivalent_spectrum;   // full-history equivalent eigenvalues
  double trace_proxy = 0.0;                  // of the full-history equivalent spectrum
  double tail_proxy = 0.0;
  std::vector<double> trace_proxy_per_t;     // equivalent-spectrum trace proxy per prefix
  std::vector<EarlyStoppingRow> early_stopping;  // rounds t >= 1, when recorded
};

inline TheoryReport build_report(const DistillationTrace& trace) {
  if (trace.states.empty()) throw PreconditionViolation("build_report: empty trace");
  const GramSpectrum& spectrum = trace.spectrum;
  const std::size_t dim = spectrum.dim;
  const double root_k_eps = detail::sqrt_k_eps(dim, trace.epsilon);
  const double norm_z0 = std::sqrt(detail::norm_sq(trace.states.front().z0));
  const std::vector<double> pos = detail::positive_eigvals(spectrum);

  TheoryReport report;
  report.r0 = norm_z0 / root_k_eps;
  if (!(report.r0 > 1.0))
    throw CollapseCondition("build_report: r0 = " + detail::num(report.r0) +
                            " is not above 1; trace starts collapsed");
  report.kappa = spectrum.cond;
  report.kappa_positive = spectrum.cond_positive();
  report.guaranteed_rounds = guaranteed_rounds(norm_z0, dim, trace.epsilon, report.kappa);
  report.guaranteed_rounds_positive =
      guaranteed_rounds(norm_z0, dim, trace.epsilon, report.kappa_positive);
  report.degenerate_spectrum = has_adjacent_degeneracy(pos);

  std::vector<double> c_history;
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    const DistillationState& st = trace.states[t];
    report.z_lower_bounds.push_back(
        z_norm_lower_bound(report.r0, report.kappa, dim, trace.epsilon, t));
    const double exponent = double(t) + 1.0;
    for (std::size_t k = 0; k + 1 < dim; ++k) {
      if (!(spectrum.eigvals[k] > 0.0) || !(spectrum.eigvals[k + 1] > spectrum.eigvals[k]))
        continue;
      RatioBoundRow row;
      row.t = t;
      row.j = k;
      row.k = k + 1;
      row.bound = ratio_lower_bound(norm_z0, dim, trace.epsilon, spectrum.d_min_positive(),
                                    spectrum.eigvals[k], spectrum.eigvals[k + 1], exponent);
      row.observed = st.b_diag[k + 1] / st.b_diag[k];
      row.guaranteed = exponent <= report.guaranteed_rounds;
      report.ratio_bounds.push_back(row);
    }
    if (pos.size() >= 2)
      report.sparsity_index_per_t.push_back(sparsity_index(
          norm_z0, dim, trace.epsilon, spectrum.d_min_positive(), pos, exponent));
    c_history.push_back(st.c);
    const std::vector<double> d_dagger_t = equivalent_spectrum(spectrum.eigvals, c_history);
    report.trace_proxy_per_t.push_back(generalization_proxies(d_dagger_t, dim).trace_proxy);
  }

  if (pos.size() >= 2) {
    report.sparsity_at_t_under =
        sparsity_index(norm_z0, dim, trace.epsilon, spectrum.d_min_positive(), pos,
                       report.guaranteed_rounds_positive);
    report.sparsity_limit = sparsity_limit(spectrum.d_min_positive(), report.kappa_positive, pos);
  } else {
    report.sparsity_at_t_under = 1.0;
    report.sparsity_limit = 1.0;
  }

  report.equivalent_spectrum = equivalent_spectrum(spectrum.eigvals, c_history);
  const GeneralizationProxies proxies = generalization_proxies(report.equivalent_spectrum, dim);
  report.trace_proxy = proxies.trace_proxy;
  report.tail_proxy = proxies.tail_proxy;

  if (trace.states.size() >= 2) report.early_stopping = early_stopping_comparison(trace);
  return report;
}

}  // namespace distillkit
