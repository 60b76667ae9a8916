#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "distillkit/distillation.hpp"
#include "distillkit/errors.hpp"
#include "support.hpp"

using namespace distillkit;
using namespace testsupport;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("recorded dataset: four rounds, then collapse") {
  const DistillationTrace trace = preset_trace();

  REQUIRE(trace.states.size() == 4);
  REQUIRE(trace.collapsed_at.has_value());
  CHECK(*trace.collapsed_at == 4);

  // Boundary points annihilate the Green's function: exactly two null modes.
  CHECK(trace.spectrum.dim == 11);
  CHECK(trace.spectrum.null_dim == 2);
  CHECK(trace.spectrum.eigvals[0] == 0.0);
  CHECK(trace.spectrum.eigvals[1] == 0.0);
  CHECK(std::isinf(trace.spectrum.cond));
  CHECK_THAT(trace.spectrum.d_min_positive(), WithinRel(kPresetDMinPositive, 1e-10));
  CHECK_THAT(trace.spectrum.d_max(), WithinRel(kPresetDMax, 1e-10));
  CHECK_THAT(trace.spectrum.cond_positive(), WithinRel(kPresetCondPositive, 1e-10));

  CHECK_THAT(detail::norm_sq(trace.y0), WithinRel(kPresetNormY0Sq, 1e-12));

  for (std::size_t t = 0; t < 4; ++t) {
    CHECK_THAT(trace.states[t].c, WithinRel(kPresetC[t], 1e-9));
    CHECK_THAT(trace.states[t].norm_z, WithinRel(kPresetNormZ[t], 1e-10));
    CHECK_THAT(trace.states[t].train_error_vs_y0, WithinRel(kPresetErrY0[t], 1e-9));
    CHECK(trace.states[t].t == t);
  }

  // The would-be round 4 lands inside the collapse regime.
  const DistillationState& last = trace.states.back();
  double z4_sq = 0.0;
  for (std::size_t k = 0; k < last.z.size(); ++k) {
    const double v = last.a_diag[k] * last.z[k];
    z4_sq += v * v;
  }
  CHECK_THAT(z4_sq, WithinRel(kPresetNormZ4Sq, 1e-9));
  CHECK(collapse_regime(z4_sq, 11, kPresetEpsilon));
  FitConfig config;
  config.epsilon = kPresetEpsilon;
  CHECK_FALSE(distill_step(trace.spectrum, last, config).has_value());
}

TEST_CASE("chain invariants hold on the recorded dataset") {
  const DistillationTrace trace = preset_trace();
  const GramSpectrum& s = trace.spectrum;
  const std::size_t k = s.dim;

  std::vector<double> product(k, 1.0);
  for (std::size_t i = 0; i < k; ++i)
    if (s.eigvals[i] == 0.0) product[i] = 0.0;

  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    const DistillationState& st = trace.states[t];

    // Norms strictly decrease and never enter the collapse regime.
    if (t > 0) CHECK(st.norm_z < trace.states[t - 1].norm_z);
    CHECK(st.norm_z * st.norm_z > double(k) * trace.epsilon);

    // Each round's fit meets the tolerance.
    CHECK(std::abs(st.train_error - trace.epsilon) <=
          std::max(1e-10, 1e-12 * trace.epsilon));

    // Shrinkage factors: in (0,1) on positive modes, exact zero on null modes.
    for (std::size_t i = 0; i < k; ++i) {
      if (s.eigvals[i] == 0.0) {
        CHECK(st.a_diag[i] == 0.0);
        CHECK(st.b_diag[i] == 0.0);
      } else {
        CHECK(st.a_diag[i] > 0.0);
        CHECK(st.a_diag[i] < 1.0);
      }
    }

    // b_diag is the running product of the a_diag's.
    for (std::size_t i = 0; i < k; ++i) {
      product[i] *= st.a_diag[i];
      if (s.eigvals[i] > 0.0) CHECK_THAT(st.b_diag[i], WithinRel(product[i], 1e-12));
    }

    // The rotation is an isometry: targets and coefficients share a norm.
    CHECK_THAT(std::sqrt(detail::norm_sq(st.y)), WithinRel(st.norm_z, 1e-12));

    // Multiplier lies inside its bracket.
    const MultiplierBounds b = multiplier_bounds(s, st.z, trace.epsilon);
    CHECK(st.c >= b.lower * (1.0 - 1e-9));
    CHECK(st.c <= b.upper * (1.0 + 1e-9));

    // error against y0: z0 survives on null modes, shrinks elsewhere
    double expected = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = (1.0 - st.b_diag[i]) * st.z0[i];
      expected += r * r;
    }
    CHECK_THAT(st.train_error_vs_y0, WithinRel(expected / double(k), 1e-12));
  }

  // Multipliers grow round over round as the targets get harder to fit.
  for (std::size_t t = 1; t < trace.states.size(); ++t)
    CHECK(trace.states[t].c > trace.states[t - 1].c);

  // Relative shrinkage orders by eigenvalue: bigger modes survive better, and
  // the separation widens monotonically with t.
  for (std::size_t t = 1; t < trace.states.size(); ++t) {
    const auto& st = trace.states[t];
    const auto& prev = trace.states[t - 1];
    for (std::size_t i = s.null_dim; i + 1 < k; ++i) {
      const double now = st.b_diag[i + 1] / st.b_diag[i];
      const double before = prev.b_diag[i + 1] / prev.b_diag[i];
      CHECK(now >= before * (1.0 - 1e-12));
      CHECK(now >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("distillation matches the dense-path oracle on random instances") {
  for (std::uint64_t seed = 100; seed < 112; ++seed) {
    const RandomInstance inst = make_random_instance(seed);
    FitConfig config;
    config.epsilon = inst.epsilon;
    const DistillationTrace trace = run_chain(inst.data, inst.kernel, config, 500);
    const DenseChain dense = dense_chain(inst.data, inst.kernel, inst.epsilon, 500);

    REQUIRE(trace.states.size() == dense.rounds.size());
    CHECK(trace.collapsed_at.has_value() == dense.collapsed_at.has_value());

    for (std::size_t t = 0; t < trace.states.size(); ++t) {
      const auto& st = trace.states[t];
      const auto& dr = dense.rounds[t];
      CHECK_THAT(st.c, WithinRel(dr.c, 1e-9));
      for (std::size_t j = 0; j < st.y.size(); ++j)
        CHECK(std::abs(st.y[j] - dr.y[j]) <= 1e-9 * std::max(1.0, std::abs(dr.y[j])));
    }
  }
}

TEST_CASE("flat spectrum: norms walk down by exactly sqrt(K epsilon) per round") {
  // A gaussian kernel with a tiny bandwidth on well-separated points under-
  // flows every off-diagonal entry to an exact zero, so the Gram matrix is
  // I/K and all eigenvalues coincide.  At the multiplier root the shrinkage
  // is then uniformly sqrt(K eps)/||z_t||, giving ||z_{t+1}|| = ||z_t|| -
  // sqrt(K eps) exactly.
  const Dataset data = Dataset::from_scalars(std::vector<double>{0.0, 0.5, 1.0},
                                             std::vector<double>{1.0, 2.0, -1.0});
  const KernelSpec kernel = KernelSpec::gaussian(0.005);
  const SymMatrix g = build_gram(kernel, data);
  CHECK(g(0, 1) == 0.0);
  CHECK(g(0, 2) == 0.0);
  CHECK(g(1, 2) == 0.0);

  FitConfig config;
  config.epsilon = 0.05;
  const DistillationTrace trace = run_chain(data, kernel, config, 100);
  const GramSpectrum& s = trace.spectrum;
  CHECK(s.null_dim == 0);
  CHECK_THAT(s.cond, WithinRel(1.0, 1e-13));

  const double ske = std::sqrt(3.0 * config.epsilon);
  const double norm_y0 = std::sqrt(6.0);
  // collapse after ceil(r0 - 1) rounds of unit-step decay
  const std::size_t expected_rounds = std::size_t(std::ceil(norm_y0 / ske - 1.0));
  REQUIRE(trace.collapsed_at.has_value());
  CHECK(trace.states.size() == expected_rounds);
  for (std::size_t t = 0; t < trace.states.size(); ++t)
    CHECK_THAT(trace.states[t].norm_z, WithinAbs(norm_y0 - double(t) * ske, 1e-9));
}

TEST_CASE("run_chain respects max_rounds and leaves collapsed_at empty") {
  FitConfig config;
  config.epsilon = kPresetEpsilon;
  const DistillationTrace trace =
      run_chain(preset_paper_sine(), KernelSpec::cubic_spline_green(), config, 2);
  CHECK(trace.states.size() == 2);
  CHECK_FALSE(trace.collapsed_at.has_value());

  CHECK_THROWS_AS(
      run_chain(preset_paper_sine(), KernelSpec::cubic_spline_green(), config, 0),
      PreconditionViolation);

  config.epsilon = 1.0;  // >= ||y0||^2 / K: collapsed before the first fit
  CHECK_THROWS_AS(
      run_chain(preset_paper_sine(), KernelSpec::cubic_spline_green(), config, 10),
      CollapseCondition);
}

TEST_CASE("model_at reconstructs each round and reports missing rounds") {
  const DistillationTrace trace = preset_trace();

  // Round 0 is the plain ridge fit of y0.
  FitConfig config;
  config.epsilon = kPresetEpsilon;
  const RegressionModel direct =
      fit(preset_paper_sine(), KernelSpec::cubic_spline_green(), config);
  const RegressionModel m0 = model_at(trace, 0);
  CHECK_THAT(m0.c, WithinRel(direct.c, 1e-12));
  for (double x = 0.0; x <= 1.0; x += 0.125)
    CHECK_THAT(predict(m0, Point{x}), WithinAbs(predict(direct, Point{x}), 1e-12));

  // Later rounds match a from-scratch refit of their recorded targets.
  for (std::size_t t = 1; t < trace.states.size(); ++t) {
    const Dataset refit_data = Dataset::make(trace.points, trace.states[t].y);
    const RegressionModel refit = fit(refit_data, trace.kernel, config);
    const RegressionModel m = model_at(trace, t);
    CHECK_THAT(m.c, WithinRel(refit.c, 1e-9));
    for (double x = 0.0; x <= 1.0; x += 0.125)
      CHECK(std::abs(predict(m, Point{x}) - predict(refit, Point{x})) <= 1e-9);
  }

  // Rounds at or past the collapse are gone for good.
  CHECK_THROWS_AS(model_at(trace, 4), CollapsedRound);
  CHECK_THROWS_AS(model_at(trace, 7), CollapsedRound);

  // A truncated (not collapsed) chain reports plain out-of-range instead.
  const DistillationTrace cut =
      run_chain(preset_paper_sine(), KernelSpec::cubic_spline_green(), config, 2);
  CHECK_THROWS_AS(model_at(cut, 2), OutOfRange);
}

TEST_CASE("basis projections turn predictions into diagonal dot products") {
  const DistillationTrace trace = preset_trace();
  const GramSpectrum& s = trace.spectrum;

  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    const RegressionModel m = model_at(trace, t);
    const DistillationState& st = trace.states[t];
    for (double x : {0.0, 0.15, 0.3, 0.55, 0.72, 0.95, 1.0}) {
      const std::vector<double> p = basis_projection(s, trace.kernel, trace.points, Point{x});
      double via_projection = 0.0;
      for (std::size_t i = 0; i < s.dim; ++i)
        via_projection += p[i] * st.b_diag[i] * st.z0[i];
      CHECK_THAT(predict(m, Point{x}), WithinAbs(via_projection, 1e-10));
    }
  }

  // Null coordinates are structurally zero.
  const std::vector<double> p = basis_projection(s, trace.kernel, trace.points, Point{0.4});
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 0.0);

  const std::vector<Point> short_points(3, Point{0.5});
  CHECK_THROWS_AS(basis_projection(s, trace.kernel, short_points, Point{0.4}),
                  DimensionMismatch);
}

TEST_CASE("distill_step validates state dimensions") {
  const DistillationTrace trace = preset_trace();
  FitConfig config;
  config.epsilon = kPresetEpsilon;
  DistillationState broken = trace.states.front();
  broken.z.pop_back();
  CHECK_THROWS_AS(distill_step(trace.spectrum, broken, config), DimensionMismatch);
}
