#pragma once

// Kernel definitions and dataset plumbing.  Two kernels are supported: the
// Green's function of the cubic-spline smoothing operator on [0,1] (scalar
// inputs, vanishing at both interval ends) and the Gaussian kernel with a
// fixed bandwidth (inputs of any fixed dimension).  Gram matrices carry the
// 1/K normalization used throughout: G[j][k] = g(x_j, x_k) / K.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distillkit/errors.hpp"
#include "distillkit/spectral.hpp"

namespace distillkit {

using Point = std::vector<double>;

class KernelSpec {
public:
  enum class Family { cubic_spline_green, gaussian };

  static KernelSpec cubic_spline_green() { return KernelSpec(Family::cubic_spline_green, 0.0); }

  static KernelSpec gaussian(double bandwidth) {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
      throw DomainViolation("gaussian kernel requires a positive finite bandwidth, got " +
                            detail::num(bandwidth));
    return KernelSpec(Family::gaussian, bandwidth);
  }

  Family family() const { return family_; }
  double bandwidth() const { return bandwidth_; }

  bool operator==(const KernelSpec& o) const {
    return family_ == o.family_ && bandwidth_ == o.bandwidth_;
  }

private:
  KernelSpec(Family f, double bw) : family_(f), bandwidth_(bw) {}
  Family family_;
  double bandwidth_;
};

// Labeled sample set.  Points are validated on construction: consistent
// dimension and pairwise distinct within 1e-12 (coincident points would make
// any Gram matrix structurally singular, so they are a hard error).
struct Dataset {
  std::vector<Point> points;
  std::vector<double> labels;

  static Dataset make(std::vector<Point> pts, std::vector<double> ys) {
    if (pts.empty()) throw PreconditionViolation("Dataset: at least one point is required");
    if (pts.size() != ys.size())
      throw DimensionMismatch("Dataset: " + std::to_string(pts.size()) + " points vs " +
                              std::to_string(ys.size()) + " labels");
    const std::size_t d = pts.front().size();
    if (d == 0) throw DimensionMismatch("Dataset: points must have at least one coordinate");
    for (const Point& p : pts)
      if (p.size() != d)
        throw DimensionMismatch("Dataset: inconsistent point dimensions (" + std::to_string(d) +
                                " vs " + std::to_string(p.size()) + ")");
    for (std::size_t j = 0; j + 1 < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        double dist2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = pts[j][i] - pts[k][i];
          dist2 += diff * diff;
        }
        if (std::sqrt(dist2) <= 1e-12)
          throw DuplicatePoints("Dataset: points " + std::to_string(j) + " and " +
                                std::to_string(k) + " coincide within 1e-12");
      }
    Dataset ds;
    ds.points = std::move(pts);
    ds.labels = std::move(ys);
    return ds;
  }

  static Dataset from_scalars(std::span<const double> xs, std::span<const double> ys) {
    std::vector<Point> pts;
    pts.reserve(xs.size());
    for (double x : xs) pts.push_back({x});
    return make(std::move(pts), std::vector<double>(ys.begin(), ys.end()));
  }

  std::size_t size() const { return points.size(); }
  std::size_t point_dim() const { return points.empty() ? 0 : points.front().size(); }
};

// Kernel evaluation g(x, x_dagger).  The spline form is
//   g(x, t) = max((x - t)^3, 0)/6 - x (1 - t) (x^2 - 2t + t^2) / 6
// on [0,1]^2; it is symmetric and vanishes whenever either argument is 0 or 1.
inline double eval_kernel(const KernelSpec& spec, const Point& x, const Point& x_dagger) {
  switch (spec.family()) {
    case KernelSpec::Family::cubic_spline_green: {
      if (x.size() != 1 || x_dagger.size() != 1)
        throw DimensionMismatch("cubic spline kernel takes scalar inputs, got dimensions " +
                                std::to_string(x.size()) + " and " + std::to_string(x_dagger.size()));
      const double a = x[0], b = x_dagger[0];
      if (!(a >= 0.0 && a <= 1.0))
        throw DomainViolation("cubic spline kernel input " + detail::num(a) + " outside [0,1]");
      if (!(b >= 0.0 && b <= 1.0))
        throw DomainViolation("cubic spline kernel input " + detail::num(b) + " outside [0,1]");
      const double diff = a - b;
      const double cubic = diff > 0.0 ? diff * diff * diff / 6.0 : 0.0;
      return cubic - a * (1.0 - b) * (a * a - 2.0 * b + b * b) / 6.0;
    }
    case KernelSpec::Family::gaussian: {
      if (x.size() != x_dagger.size() || x.empty())
        throw DimensionMismatch("gaussian kernel inputs must share a nonzero dimension, got " +
                                std::to_string(x.size()) + " and " + std::to_string(x_dagger.size()));
      double dist2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - x_dagger[i];
        dist2 += diff * diff;
      }
      const double bw = spec.bandwidth();
      return std::exp(-dist2 / (2.0 * bw * bw));
    }
  }
  throw PreconditionViolation("eval_kernel: unknown kernel family");
}

// G[j][k] = g(x_j, x_k) / K, stored exactly symmetric by averaging the two
// evaluation orders (they differ only by rounding for symmetric kernels).
inline SymMatrix build_gram(const KernelSpec& spec, const Dataset& data) {
  const std::size_t k = data.size();
  SymMatrix g(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      const double v = 0.5 * (eval_kernel(spec, data.points[i], data.points[j]) +
                              eval_kernel(spec, data.points[j], data.points[i])) /
                       double(k);
      g.set(i, j, v);
    }
  return g;
}

// g_x[k] = g(x, x_k) / K, the representer weights of a query point against the
// training points.
inline std::vector<double> kernel_vector(const KernelSpec& spec, std::span<const Point> points,
                                         const Point& x) {
  if (points.empty()) throw PreconditionViolation("kernel_vector: empty point set");
  std::vector<double> v(points.size());
  for (std::size_t k = 0; k < points.size(); ++k)
    v[k] = eval_kernel(spec, x, points[k]) / double(points.size());
  return v;
}

inline std::vector<double> kernel_vector(const KernelSpec& spec, const Dataset& data,
                                         const Point& x) {
  return kernel_vector(spec, std::span<const Point>(data.points), x);
}

}  // namespace distillkit
