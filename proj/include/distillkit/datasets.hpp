#pragma once

// Dataset construction: a deterministic noise source, the sine generator the
// experiments use, and the recorded 11-point reference dataset (fixed noisy
// sine labels on the grid {0, 0.1, ..., 1.0}) that the default experiment
// reproduces.

#include <cmath>
#include <cstdint>
#include <vector>

#include "distillkit/errors.hpp"
#include "distillkit/kernels.hpp"

namespace distillkit {

// splitmix64: one 64-bit multiply-xorshift pass per draw.  Chosen because the
// whole generator is ten lines that any other implementation can reproduce
// exactly from this description, which keeps generated datasets portable
// across languages.  Normal deviates use the cosine Box-Muller branch; each
// normal draw consumes exactly two raw outputs.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Uniform in (0, 1): top 53 bits, offset half a step so 0 is unreachable.
  double next_unit() { return (double(next() >> 11) + 0.5) * 0x1.0p-53; }

  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

 private:
  std::uint64_t state_;
};

// K points evenly spaced over [0, 1] inclusive, labels sin(2 pi x) plus
// centered gaussian noise of the given standard deviation.  Same seed, same
// dataset, bit for bit.
inline Dataset generate_sine_dataset(std::size_t k, double noise_sigma, std::uint64_t seed) {
  if (k < 2) throw BadConfig("sine generator needs at least 2 points, got " + std::to_string(k));
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw BadConfig("noise_sigma must be nonnegative and finite, got " + detail::num(noise_sigma));
  SplitMix64 rng(seed);
  std::vector<double> xs(k), ys(k);
  for (std::size_t i = 0; i < k; ++i) {
    xs[i] = double(i) / double(k - 1);
    ys[i] = std::sin(2.0 * 3.141592653589793238462643383279502884 * xs[i]) +
            noise_sigma * rng.next_normal();
  }
  return Dataset::from_scalars(xs, ys);
}

// Error tolerance the reference experiment runs at.
inline constexpr double kPaperSineEpsilon = 0.045;

// The recorded reference dataset: 11 noisy sine labels on x = k/10.  The
// labels are fixed constants rather than generator output so every
// implementation — whatever its RNG — studies the identical instance.
inline Dataset preset_paper_sine() {
  static const std::vector<double> labels = {
      0.38476636465198066,   1.2333967683416893,   1.33232242218057,
      0.6920159488889518,    -0.29756145531871736, -0.24189291901377769,
      -0.7964485769175675,   -0.9616480167034174,  -0.49672509509916934,
      -0.3469066003991437,   0.5589512650600734,
  };
  std::vector<double> xs(labels.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = double(i) / 10.0;
  return Dataset::from_scalars(xs, labels);
}

}  // namespace distillkit
