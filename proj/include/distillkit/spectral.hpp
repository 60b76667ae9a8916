#pragma once

// Dense symmetric eigen-machinery: SymMatrix storage, a cyclic Jacobi
// eigensolver producing a GramSpectrum (eigenvalues ascending, eigenvector
// rows), rotations into and out of the eigenbasis, and a Cholesky-based
// shifted solve that serves as the independent dense path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "distillkit/errors.hpp"

namespace distillkit {

namespace detail {

inline std::string num(double v) { return std::to_string(v); }

}  // namespace detail

// Dense symmetric matrix.  Entries are kept exactly symmetric as stored:
// construction from a full square array averages (a[j][k] + a[k][j]) / 2, and
// the only mutator writes both mirror entries.
class SymMatrix {
public:
  explicit SymMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, 0.0) {
    if (dim == 0) throw DimensionMismatch("SymMatrix: dimension must be at least 1");
  }

  static SymMatrix from_dense(std::size_t dim, std::span<const double> row_major) {
    if (row_major.size() != dim * dim)
      throw DimensionMismatch("SymMatrix::from_dense: expected " + std::to_string(dim * dim) +
                              " entries, got " + std::to_string(row_major.size()));
    SymMatrix m(dim);
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = j; k < dim; ++k) {
        const double v = 0.5 * (row_major[j * dim + k] + row_major[k * dim + j]);
        m.a_[j * dim + k] = v;
        m.a_[k * dim + j] = v;
      }
    return m;
  }

  std::size_t dim() const { return dim_; }

  double operator()(std::size_t j, std::size_t k) const { return a_[j * dim_ + k]; }

  void set(std::size_t j, std::size_t k, double v) {
    a_[j * dim_ + k] = v;
    a_[k * dim_ + j] = v;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

  const std::vector<double>& storage() const { return a_; }

private:
  std::size_t dim_;
  std::vector<double> a_;
};

// Eigendecomposition of a Gram matrix G = V^T D V where the ROWS of V are the
// unit eigenvectors and D = diag(eigvals), eigvals ascending.  When the
// decomposition was built with null directions allowed, the leading null_dim
// eigenvalues are exact zeros and cond is +infinity; the positive part is
// exposed through d_min_positive() / cond_positive().
struct GramSpectrum {
  std::size_t dim = 0;
  std::vector<double> eigvals;   // ascending; first null_dim entries are 0.0
  std::vector<double> eigvecs;   // row-major dim x dim, row i = eigenvector i
  std::size_t null_dim = 0;
  double cond = 0.0;             // d_max / d_min (+inf when null_dim > 0)

  double v(std::size_t i, std::size_t k) const { return eigvecs[i * dim + k]; }
  double d_min() const { return eigvals.front(); }
  double d_max() const { return eigvals.back(); }
  double d_min_positive() const { return eigvals[null_dim]; }
  double cond_positive() const { return eigvals.back() / eigvals[null_dim]; }
};

namespace detail {

// Relative thresholds fixed by contract: eigenvalues at or below
// kEigvalNullRel * max|eigval| count as null directions, and the Jacobi sweep
// loop targets an off-diagonal Frobenius norm of kJacobiOffRel * ||G||_F.
inline constexpr double kEigvalNullRel = 1e-12;
inline constexpr double kJacobiOffRel = 1e-14;
inline constexpr int kJacobiMaxSweeps = 100;

struct JacobiResult {
  std::vector<double> eigvals;   // unsorted, in pivot order
  std::vector<double> columns;   // row-major accumulator Q; column j pairs with eigvals[j]
};

inline double off_diagonal_norm(const std::vector<double>& a, std::size_t n) {
  double s = 0.0;
  for (std::size_t p = 0; p + 1 < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) s += 2.0 * a[p * n + q] * a[p * n + q];
  return std::sqrt(s);
}

// Cyclic Jacobi sweeps (row-wise pivot order).  Each rotation annihilates one
// off-diagonal entry; the pivot is written as an exact zero afterwards since
// it is analytically zero.  Sweeping stops once the off-diagonal mass falls
// under the relative tolerance or a full sweep performs no rotation (every
// remaining entry is individually negligible).
inline JacobiResult jacobi_diagonalize(const SymMatrix& m) {
  const std::size_t n = m.dim();
  std::vector<double> a = m.storage();
  std::vector<double> q(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;

  const double off_tol = kJacobiOffRel * m.frobenius_norm();
  // An entry below off_tol / n^2 cannot push the total off-norm above off_tol
  // even if every entry sat at that size, so it is not worth a rotation.
  const double rotate_tol = off_tol / double(n * n);

  bool converged = (n == 1) || (off_diagonal_norm(a, n) <= off_tol);
  for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    std::size_t rotations = 0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t qq = p + 1; qq < n; ++qq) {
        const double apq = a[p * n + qq];
        if (std::abs(apq) <= rotate_tol) continue;
        ++rotations;
        const double theta = (a[qq * n + qq] - a[p * n + p]) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;  // asymptotic form; theta^2 would overflow
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {  // A <- A J
          const double akp = a[k * n + p], akq = a[k * n + qq];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + qq] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {  // A <- J^T A
          const double apk = a[p * n + k], aqk = a[qq * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[qq * n + k] = s * apk + c * aqk;
        }
        a[p * n + qq] = 0.0;
        a[qq * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {  // Q <- Q J
          const double qkp = q[k * n + p], qkq = q[k * n + qq];
          q[k * n + p] = c * qkp - s * qkq;
          q[k * n + qq] = s * qkp + c * qkq;
        }
      }
    }
    converged = (rotations == 0) || (off_diagonal_norm(a, n) <= off_tol);
  }
  if (!converged)
    throw ConvergenceFailure("jacobi_diagonalize: off-diagonal norm still above tolerance after " +
                             std::to_string(kJacobiMaxSweeps) + " sweeps");

  JacobiResult r;
  r.eigvals.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.eigvals[i] = a[i * n + i];
  r.columns = std::move(q);
  return r;
}

inline GramSpectrum assemble_spectrum(const SymMatrix& m, bool allow_null) {
  const std::size_t n = m.dim();
  JacobiResult jr = jacobi_diagonalize(m);

  // Ascending eigenvalue order; stable on ties so the result is reproducible.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return jr.eigvals[i] < jr.eigvals[j]; });

  GramSpectrum s;
  s.dim = n;
  s.eigvals.resize(n);
  s.eigvecs.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = order[i];
    s.eigvals[i] = jr.eigvals[src];
    for (std::size_t k = 0; k < n; ++k) s.eigvecs[i * n + k] = jr.columns[k * n + src];
  }

  double amax = 0.0;
  for (double v : s.eigvals) amax = std::max(amax, std::abs(v));
  const double null_thr = kEigvalNullRel * amax;

  if (!allow_null) {
    if (s.eigvals.front() <= null_thr)
      throw NotPositiveDefinite("eigendecompose: smallest eigenvalue " + num(s.eigvals.front()) +
                                " is not above the positivity threshold " + num(null_thr) +
                                " (degenerate Gram matrix)");
    s.null_dim = 0;
  } else {
    if (s.eigvals.front() < -1e-10 * amax)
      throw NotPositiveDefinite("eigendecompose: eigenvalue " + num(s.eigvals.front()) +
                                " is significantly negative; matrix is indefinite");
    std::size_t nulls = 0;
    for (std::size_t i = 0; i < n && s.eigvals[i] <= null_thr; ++i) {
      s.eigvals[i] = 0.0;
      ++nulls;
    }
    if (nulls == n)
      throw NotPositiveDefinite("eigendecompose: every eigenvalue vanishes; Gram matrix is zero");
    s.null_dim = nulls;
  }
  s.cond = s.null_dim > 0 ? std::numeric_limits<double>::infinity()
                          : s.eigvals.back() / s.eigvals.front();

  // Deterministic sign: the first component of each eigenvector whose
  // magnitude exceeds 1e-12 is made positive.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double v = s.eigvecs[i * n + k];
      if (std::abs(v) > 1e-12) {
        if (v < 0.0)
          for (std::size_t kk = 0; kk < n; ++kk) s.eigvecs[i * n + kk] = -s.eigvecs[i * n + kk];
        break;
      }
    }
  }
  return s;
}

}  // namespace detail

// Strict decomposition: every eigenvalue must clear the relative positivity
// threshold, otherwise NotPositiveDefinite is thrown.
inline GramSpectrum eigendecompose(const SymMatrix& m) {
  return detail::assemble_spectrum(m, /*allow_null=*/false);
}

// Tolerant decomposition for positive-semidefinite matrices: eigenvalues at or
// below the threshold are clamped to exact zeros and counted in null_dim.
// Kernels whose Green's function vanishes at some training points (the cubic
// spline at x = 0 and x = 1) produce such structurally null directions, and
// the distillation recurrence remains well defined on them.
inline GramSpectrum eigendecompose_allow_null(const SymMatrix& m) {
  return detail::assemble_spectrum(m, /*allow_null=*/true);
}

// z = V y: coordinates of y in the eigenbasis.
inline std::vector<double> rotate(const GramSpectrum& s, std::span<const double> y) {
  if (y.size() != s.dim)
    throw DimensionMismatch("rotate: vector length " + std::to_string(y.size()) +
                            " does not match spectrum dimension " + std::to_string(s.dim));
  std::vector<double> z(s.dim, 0.0);
  for (std::size_t i = 0; i < s.dim; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.dim; ++k) acc += s.eigvecs[i * s.dim + k] * y[k];
    z[i] = acc;
  }
  return z;
}

// y = V^T z: back out of the eigenbasis.
inline std::vector<double> rotate_back(const GramSpectrum& s, std::span<const double> z) {
  if (z.size() != s.dim)
    throw DimensionMismatch("rotate_back: vector length " + std::to_string(z.size()) +
                            " does not match spectrum dimension " + std::to_string(s.dim));
  std::vector<double> y(s.dim, 0.0);
  for (std::size_t i = 0; i < s.dim; ++i)
    for (std::size_t k = 0; k < s.dim; ++k) y[k] += s.eigvecs[i * s.dim + k] * z[i];
  return y;
}

// Solve (c I + M) r = y by Cholesky factorization.  This is the dense path
// kept deliberately independent of the spectral machinery so the two can
// cross-check each other.
inline std::vector<double> solve_shifted(const SymMatrix& m, double c, std::span<const double> y) {
  const std::size_t n = m.dim();
  if (y.size() != n)
    throw DimensionMismatch("solve_shifted: vector length " + std::to_string(y.size()) +
                            " does not match matrix dimension " + std::to_string(n));
  if (!(c >= 0.0) || !std::isfinite(c))
    throw PreconditionViolation("solve_shifted: shift must be finite and nonnegative, got " +
                                detail::num(c));

  std::vector<double> l(n * n, 0.0);  // lower triangular factor
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k <= j; ++k) {
      double acc = m(j, k) + (j == k ? c : 0.0);
      for (std::size_t i = 0; i < k; ++i) acc -= l[j * n + i] * l[k * n + i];
      if (j == k) {
        if (!(acc > 0.0))
          throw NotPositiveDefinite("solve_shifted: shifted matrix is not positive definite "
                                    "(pivot " + std::to_string(j) + " = " + detail::num(acc) + ")");
        l[j * n + j] = std::sqrt(acc);
      } else {
        l[j * n + k] = acc / l[k * n + k];
      }
    }
  }

  std::vector<double> r(y.begin(), y.end());
  for (std::size_t j = 0; j < n; ++j) {  // forward: L w = y
    for (std::size_t k = 0; k < j; ++k) r[j] -= l[j * n + k] * r[k];
    r[j] /= l[j * n + j];
  }
  for (std::size_t jj = n; jj-- > 0;) {  // backward: L^T r = w
    for (std::size_t k = jj + 1; k < n; ++k) r[jj] -= l[k * n + jj] * r[k];
    r[jj] /= l[jj * n + jj];
  }
  return r;
}

}  // namespace distillkit
