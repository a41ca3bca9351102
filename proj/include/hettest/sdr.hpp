#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hettest/errors.hpp"
#include "hettest/smoothing.hpp"
#include "hettest/types.hpp"

namespace hettest {

/// Spectrum of the discretization-expectation (DEE) SIR matrix.
///
/// `eigenvalues` and `eigenvectors` solve the whitened symmetric problem
/// A v = lambda v with A = S^{-1/2} Lbar S^{-1/2}, where S is the sample
/// covariance of X and Lbar the average of m_n(y_i) m_n(y_i)^T. Its spectrum
/// equals that of S^{-1} Lbar. `directions` are the back-transformed vectors
/// S^{-1/2} v_j, Gram-Schmidt orthonormalized in eigenvalue order.
struct DeeDecomposition {
  Vector eigenvalues;   // descending, clamped at 0
  Matrix eigenvectors;  // p x p, whitened-problem eigenvectors
  Matrix directions;    // p x p, orthonormal columns
  Matrix sigma_hat;     // p x p
  Matrix whitened;      // A
};

struct BasisEstimate {
  Matrix basis;  // p x qhat, orthonormal columns
  int qhat = 1;
  Vector eigenvalues;
  double c_n = 0.0;
};

/// m_n(t) = (1/n) sum_i (x_i - xbar) I(y_i <= t).
inline Vector sir_moment_vector(const Matrix &X, const Vector &xbar, const Vector &y, double t) {
  const Eigen::Index n = X.rows();
  detail::require(n >= 2, "sir_moment_vector: need n >= 2");
  detail::require(y.size() == n, "sir_moment_vector: response length mismatch");
  detail::require(xbar.size() == X.cols(), "sir_moment_vector: mean length mismatch");
  Vector m = Vector::Zero(X.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    if (y[i] <= t)
      m += X.row(i).transpose() - xbar;
  return m / static_cast<double>(n);
}

namespace detail {

// Row j of the result is m_n(y_j). Uses cumulative sums over the sorted
// response; tied responses share the same indicator set.
inline Matrix sir_moment_table(const Matrix &X, const Vector &y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Vector xbar = X.colwise().mean().transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return y[a] < y[b]; });

  Matrix table(n, p);
  Vector running = Vector::Zero(p);
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k;
    while (end < order.size() && y[order[end]] == y[order[k]]) {
      running += X.row(order[end]).transpose() - xbar;
      ++end;
    }
    const Vector m = running / static_cast<double>(n);
    for (std::size_t r = k; r < end; ++r)
      table.row(order[r]) = m.transpose();
    k = end;
  }
  return table;
}

} // namespace detail

/// Builds the DEE matrix from binary slices I(y <= y_i) and returns its
/// spectrum through the whitened symmetric eigenproblem.
inline DeeDecomposition dee_matrix(const Matrix &X, const Vector &y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  detail::require(p >= 1, "dee_matrix: need at least one covariate");
  detail::require(n > p, "dee_matrix: need n > p");
  detail::require(y.size() == n, "dee_matrix: response length mismatch");
  detail::require(X.allFinite() && y.allFinite(), "dee_matrix: non-finite data");

  DeeDecomposition out;
  const Matrix centered = X.rowwise() - X.colwise().mean();
  out.sigma_hat = (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Matrix> cov_eig(out.sigma_hat);
  if (cov_eig.info() != Eigen::Success)
    throw NumericalError("dee_matrix: covariance eigendecomposition failed");
  const Vector cov_vals = cov_eig.eigenvalues();
  const double largest = cov_vals.maxCoeff();
  const double smallest = cov_vals.minCoeff();
  if (!(largest > 0.0) || !(smallest > 1e-10 * largest)) {
    std::ostringstream msg;
    msg << "dee_matrix: ill-conditioned covariance, smallest eigenvalue " << smallest
        << " (largest " << largest << ")";
    throw NumericalError(msg.str());
  }
  const Matrix inv_sqrt = cov_eig.eigenvectors() *
                          cov_vals.array().rsqrt().matrix().asDiagonal() *
                          cov_eig.eigenvectors().transpose();

  const Matrix table = detail::sir_moment_table(X, y);
  const Matrix lbar = (table.transpose() * table) / static_cast<double>(n);
  Matrix whitened = inv_sqrt * lbar * inv_sqrt;
  whitened = 0.5 * (whitened + whitened.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(whitened);
  if (eig.info() != Eigen::Success)
    throw NumericalError("dee_matrix: eigendecomposition failed");

  // Eigen returns ascending order.
  out.eigenvalues = eig.eigenvalues().reverse();
  out.eigenvectors = eig.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < p; ++j)
    out.eigenvalues[j] = std::max(out.eigenvalues[j], 0.0);

  Matrix dirs = inv_sqrt * out.eigenvectors;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < j; ++k)
      dirs.col(j) -= dirs.col(k).dot(dirs.col(j)) * dirs.col(k);
    dirs.col(j).normalize();
    Eigen::Index peak = 0;
    dirs.col(j).cwiseAbs().maxCoeff(&peak);
    if (dirs(peak, j) < 0.0)
      dirs.col(j) = -dirs.col(j);
  }
  out.directions = std::move(dirs);
  out.whitened = std::move(whitened);
  return out;
}

/// Ridge-type eigenvalue ratio: argmin over j in [1, p-1] of
/// (lambda_{j+1}^2 + c) / (lambda_j^2 + c). Ties go to the smallest j.
inline int rere(const Vector &eigenvalues, double c_n) {
  detail::require(c_n > 0.0, "rere: ridge constant must be positive");
  const Eigen::Index p = eigenvalues.size();
  if (p < 2)
    return 1;
  int best = 1;
  double best_ratio = 0.0;
  for (Eigen::Index j = 0; j + 1 < p; ++j) {
    const double lj = std::max(eigenvalues[j], 0.0);
    const double lnext = std::max(eigenvalues[j + 1], 0.0);
    const double ratio = (lnext * lnext + c_n) / (lj * lj + c_n);
    if (j == 0 || ratio < best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(j + 1);
    }
  }
  return best;
}

/// c_n = log(n) / (n h^{q/2}) with pilot bandwidth h = 1.25 n^{-1/(4+q)}.
inline double ridge_constant(long n, int q_pilot = 1) {
  detail::require(n >= 2, "ridge_constant: n must be >= 2");
  const double h = bandwidth_h(n, q_pilot, 1.25);
  const double nn = static_cast<double>(n);
  return std::log(nn) / (nn * std::pow(h, 0.5 * q_pilot));
}

struct BasisOptions {
  std::optional<double> c_n;  // overrides the ridge_constant rule
  int q_pilot = 1;
  bool refine = false;        // recompute c_n with the selected qhat and reselect once
};

inline BasisEstimate basis_from_decomposition(const DeeDecomposition &dee, int qhat, double c_n) {
  BasisEstimate est;
  est.qhat = qhat;
  est.basis = dee.directions.leftCols(qhat);
  est.eigenvalues = dee.eigenvalues;
  est.c_n = c_n;
  return est;
}

inline BasisEstimate estimate_basis(const Matrix &X, const Vector &y, const BasisOptions &opts = {}) {
  const DeeDecomposition dee = dee_matrix(X, y);
  const long n = static_cast<long>(X.rows());
  double c_n = opts.c_n ? *opts.c_n : ridge_constant(n, opts.q_pilot);
  int qhat = rere(dee.eigenvalues, c_n);
  if (opts.refine && !opts.c_n && qhat != opts.q_pilot) {
    c_n = ridge_constant(n, qhat);
    qhat = rere(dee.eigenvalues, c_n);
  }
  return basis_from_decomposition(dee, qhat, c_n);
}

inline BasisEstimate estimate_basis(const Matrix &X, const Vector &y, double c_n) {
  BasisOptions opts;
  opts.c_n = c_n;
  return estimate_basis(X, y, opts);
}

} // namespace hettest
