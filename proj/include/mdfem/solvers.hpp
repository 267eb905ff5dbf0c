#pragma once

// Jacobi-preconditioned Krylov solvers (CG, BiCGStab) and a dense LU used
// as a fallback for small nonsymmetric systems.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdfem/error.hpp"
#include "mdfem/sparse.hpp"

namespace mdfem {

struct SolveReport {
  std::size_t iterations = 0;
  double residual_norm = 0.0;  // relative 2-norm, recomputed from a fresh matvec
  bool converged = false;
};

struct SpdOptions {
  double tol = 1e-10;
  /// Solve on the complement of the constant vector (pure Neumann operators).
  bool nullspace_mean_zero = false;
  /// Load vector of the constant function; defines the discrete mean.
  /// Uniform weights are used when empty.
  std::span<const double> mean_weights;
  std::span<const double> initial_guess;
};

struct GeneralOptions {
  double tol = 1e-10;
  std::span<const double> initial_guess;
  std::size_t dense_fallback_limit = 2000;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline std::size_t max_krylov_iterations(std::size_t n) {
  return std::max<std::size_t>(20, static_cast<std::size_t>(std::ceil(20.0 * std::sqrt(static_cast<double>(n)))));
}

inline double relative_residual(const SparseMatrix& A, std::span<const double> x, std::span<const double> b) {
  const auto ax = A * x;
  double r = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) r += (b[i] - ax[i]) * (b[i] - ax[i]);
  const double nb = norm2(b);
  return nb > 0.0 ? std::sqrt(r) / nb : std::sqrt(r);
}

inline std::vector<double> inverse_diagonal(const SparseMatrix& A) {
  auto d = A.diagonal();
  for (auto& v : d) v = (v != 0.0) ? 1.0 / v : 1.0;
  return d;
}

inline void remove_mean(std::span<double> v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (auto& x : v) x -= m;
}

inline void check_sampled_symmetry(const SparseMatrix& A) {
  const auto ptr = A.row_ptr();
  const auto cols = A.col_index();
  const auto vals = A.values();
  double scale = 0.0;
  for (auto v : vals) scale = std::max(scale, std::abs(v));
  const std::size_t stride = std::max<std::size_t>(1, A.rows() / 64);
  for (std::size_t i = 0; i < A.rows(); i += stride) {
    for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) {
      if (std::abs(vals[k] - A.at(cols[k], i)) > 1e-12 * std::max(1.0, scale)) {
        throw ParameterError("matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(cols[k]) + ")");
      }
    }
  }
}

}  // namespace detail

/// Gaussian elimination with partial pivoting. Throws SolverError when a
/// pivot falls below 1e-13 times the largest entry.
inline std::vector<double> dense_lu_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  double scale = 0.0;
  for (const auto& row : a) {
    for (auto v : row) scale = std::max(scale, std::abs(v));
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    }
    if (!(std::abs(a[piv][k]) > 1e-13 * scale)) {
      throw SolverError("matrix is singular to working precision (pivot " + std::to_string(k) + ")");
    }
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

/// Preconditioned conjugate gradients for symmetric positive (semi)definite A.
inline std::pair<std::vector<double>, SolveReport> solve_spd(const SparseMatrix& A, std::span<const double> b_in,
                                                             const SpdOptions& opt = {}) {
  const std::size_t n = A.rows();
  if (A.cols() != n || b_in.size() != n) throw ParameterError("solve_spd: dimension mismatch");
  detail::check_sampled_symmetry(A);

  std::vector<double> b(b_in.begin(), b_in.end());
  if (opt.nullspace_mean_zero) detail::remove_mean(b);

  std::vector<double> x(n, 0.0);
  if (!opt.initial_guess.empty()) x.assign(opt.initial_guess.begin(), opt.initial_guess.end());

  auto project_solution = [&](std::vector<double>& v) {
    if (!opt.nullspace_mean_zero) return;
    double wv = 0.0, ws = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = opt.mean_weights.empty() ? 1.0 : opt.mean_weights[i];
      wv += w * v[i];
      ws += w;
    }
    for (auto& e : v) e -= wv / ws;
  };

  SolveReport rep;
  const double nb = detail::norm2(b);
  if (nb == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    rep.converged = true;
    return {std::move(x), rep};
  }

  const auto dinv = detail::inverse_diagonal(A);
  std::vector<double> r(n), z(n), p(n), q(n);
  A.multiply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  if (opt.nullspace_mean_zero) detail::remove_mean(r);
  for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
  p = z;
  double rz = detail::dot(r, z);
  const std::size_t max_it = detail::max_krylov_iterations(n);

  while (detail::norm2(r) > opt.tol * nb && rep.iterations < max_it) {
    A.multiply(p, q);
    const double pq = detail::dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    if (opt.nullspace_mean_zero) detail::remove_mean(r);
    for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    const double rz_next = detail::dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    ++rep.iterations;
  }
  project_solution(x);
  rep.residual_norm = detail::relative_residual(A, x, b);
  rep.converged = rep.residual_norm <= opt.tol;
  return {std::move(x), rep};
}

/// Jacobi-preconditioned BiCGStab for square nonsingular A. When the
/// iteration does not reach the tolerance and n is at most
/// dense_fallback_limit, the system is re-solved by dense LU.
inline std::pair<std::vector<double>, SolveReport> solve_general(const SparseMatrix& A, std::span<const double> b,
                                                                 const GeneralOptions& opt = {}) {
  const std::size_t n = A.rows();
  if (A.cols() != n || b.size() != n) throw ParameterError("solve_general: dimension mismatch");

  std::vector<double> x(n, 0.0);
  if (!opt.initial_guess.empty()) x.assign(opt.initial_guess.begin(), opt.initial_guess.end());
  SolveReport rep;
  const double nb = detail::norm2(b);
  if (nb == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    rep.converged = true;
    return {std::move(x), rep};
  }

  const auto dinv = detail::inverse_diagonal(A);
  std::vector<double> r(n), r_hat(n), p(n, 0.0), v(n, 0.0), s(n), t(n), y(n), zs(n);
  A.multiply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  r_hat = r;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  const std::size_t max_it = detail::max_krylov_iterations(n);
  constexpr double tiny = 1e-300;

  while (detail::norm2(r) > opt.tol * nb && rep.iterations < max_it) {
    const double rho_next = detail::dot(r_hat, r);
    if (std::abs(rho_next) < tiny) break;
    const double beta = (rho_next / rho) * (alpha / omega);
    rho = rho_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    for (std::size_t i = 0; i < n; ++i) y[i] = dinv[i] * p[i];
    A.multiply(y, v);
    const double rv = detail::dot(r_hat, v);
    if (std::abs(rv) < tiny) break;
    alpha = rho / rv;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    ++rep.iterations;
    if (detail::norm2(s) <= opt.tol * nb) {
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * y[i];
      r = s;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) zs[i] = dinv[i] * s[i];
    A.multiply(zs, t);
    const double tt = detail::dot(t, t);
    if (tt < tiny) break;
    omega = detail::dot(t, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * y[i] + omega * zs[i];
      r[i] = s[i] - omega * t[i];
    }
    if (std::abs(omega) < tiny) break;
  }
  rep.residual_norm = detail::relative_residual(A, x, b);
  rep.converged = rep.residual_norm <= opt.tol;
  if (!rep.converged && n <= opt.dense_fallback_limit) {
    x = dense_lu_solve(A.to_dense(), {b.begin(), b.end()});
    rep.residual_norm = detail::relative_residual(A, x, b);
    rep.converged = rep.residual_norm <= opt.tol;
    if (!rep.converged) {
      throw SolverError("dense fallback left relative residual " + detail::fmt17(rep.residual_norm));
    }
  }
  return {std::move(x), rep};
}

}  // namespace mdfem
