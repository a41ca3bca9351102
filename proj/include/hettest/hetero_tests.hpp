#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hettest/errors.hpp"
#include "hettest/kernels.hpp"
#include "hettest/random.hpp"
#include "hettest/sdr.hpp"
#include "hettest/smoothing.hpp"
#include "hettest/types.hpp"

namespace hettest {

enum class Method { drmat, zheng, zfn, zfn_low };

inline std::string_view to_string(Method m) {
  switch (m) {
  case Method::drmat: return "drmat";
  case Method::zheng: return "zheng";
  case Method::zfn: return "zfn";
  case Method::zfn_low: return "zfn-low";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  if (s == "drmat") return Method::drmat;
  if (s == "zheng") return Method::zheng;
  if (s == "zfn") return Method::zfn;
  if (s == "zfn-low" || s == "zfn_low") return Method::zfn_low;
  throw DomainError("unknown method '" + std::string(s) + "'");
}

struct TestConfig {
  double h_multiplier = 1.25;
  double h1_constant = 1.0;
  std::optional<double> c_n;
  int q_pilot = 1;
  bool refine_c_n = false;
  int boot_reps = 500;
  std::uint64_t seed = 0;  // wild-bootstrap stream, zfn only
  /// Mean-fit self weight. Unset: leave-one-out for drmat, self-inclusive
  /// for zheng and zfn.
  std::optional<bool> leave_one_out;
  double zfn_h1_constant = 2.0;  // zfn mean bandwidth constant (both variants)
};

namespace detail {

inline bool include_self(const TestConfig &c, bool method_default_loo) {
  return !c.leave_one_out.value_or(method_default_loo);
}

} // namespace detail

struct TestResult {
  Method method = Method::drmat;
  double statistic = 0.0;
  double raw_stat = 0.0;
  std::optional<double> variance_est;
  std::optional<int> qhat;
  double p_value = 1.0;
  long n = 0;
  long p = 0;
  double h = 0.0;
  double h1 = 0.0;
  bool full_dimensional = false;  // drmat selected qhat == p

  /// T^2, asymptotically chi-square(1) under the null for drmat/zheng.
  double chi_square() const { return statistic * statistic; }
};

/// Upper-tail standard normal probability 1 - Phi(t).
inline double normal_upper_tail(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// U-statistics

struct UStatistics {
  double s_n = 0.0;
  double s_hat2 = 0.0;
};

/// Both kernel U-statistics in one pass over pairs i < j.
///
///   S_n   = 1/(n(n-1)) sum_{i != j} K_h(z_i - z_j) mu_i mu_j
///   s^2_n = 2/(n(n-1)) sum_{i != j} h^{-d} K^2((z_i - z_j)/h) mu_i^2 mu_j^2
///
/// with K_h(v) = h^{-d} K(v/h). The variance estimate carries a single
/// h^{-d} so that it targets 2 int K^2 E[Var(e^2|Z)^2 p(Z)] and
/// n h^{d/2} S_n / s_n is asymptotically standard normal.
inline UStatistics u_statistics(const Matrix &reduced, const Vector &mu, double h) {
  const Eigen::Index n = reduced.rows();
  const auto d = static_cast<std::size_t>(reduced.cols());
  detail::require(n >= 2, "u-statistic: need n >= 2");
  detail::require(mu.size() == n, "u-statistic: mark length mismatch");
  detail::require(d >= 1, "u-statistic: need at least one column");
  detail::require(h > 0.0 && std::isfinite(h), "u-statistic: bandwidth must be positive");

  const RowMatrix z = reduced;
  std::vector<double> diff(d);
  double cross = 0.0;
  double squares = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_cross = 0.0;
    double row_squares = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      for (std::size_t k = 0; k < d; ++k)
        diff[k] = z(i, static_cast<Eigen::Index>(k)) - z(j, static_cast<Eigen::Index>(k));
      const double w = detail::quartic_product_unscaled(diff.data(), d, h);
      if (w == 0.0)
        continue;
      const double mm = mu[i] * mu[j];
      row_cross += w * mm;
      row_squares += w * w * mm * mm;
    }
    cross += row_cross;
    squares += row_squares;
  }
  const double hd = std::pow(h, static_cast<double>(d));
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1);
  UStatistics out;
  out.s_n = 2.0 * cross / (hd * pairs);
  out.s_hat2 = 4.0 * squares / (hd * pairs);
  return out;
}

inline double s_n(const Matrix &reduced, const Vector &mu, double h) {
  return u_statistics(reduced, mu, h).s_n;
}

inline double s_hat2(const Matrix &reduced, const Vector &mu, double h) {
  return u_statistics(reduced, mu, h).s_hat2;
}

// ---------------------------------------------------------------------------
// Local-smoothing tests

namespace detail {

inline void check_dataset(const Dataset &data) {
  require(data.y.size() == data.X.rows(), "dataset: response length does not match rows");
  require(data.X.cols() >= 1, "dataset: need at least one covariate");
  require(data.X.rows() > data.X.cols(), "dataset: need n > p");
  require(data.X.allFinite() && data.y.allFinite(), "dataset: non-finite entries");
  if (data.y.maxCoeff() == data.y.minCoeff())
    throw DegenerateDataError("dataset: response is constant");
}

inline TestResult standardize(Method method, const FitArtifacts &fit, double h, int d) {
  const Vector mu = (fit.resid2.array() - fit.sigma2).matrix();
  const UStatistics u = u_statistics(fit.reduced, mu, h);
  if (!(u.s_hat2 > 0.0))
    throw DegenerateDataError(std::string(to_string(method)) +
                              ": variance estimate is zero (degenerate residuals)");
  TestResult r;
  r.method = method;
  r.raw_stat = u.s_n;
  r.variance_est = u.s_hat2;
  const double n = static_cast<double>(fit.reduced.rows());
  r.statistic = n * std::pow(h, 0.5 * d) * u.s_n / std::sqrt(u.s_hat2);
  r.p_value = normal_upper_tail(r.statistic);
  r.n = static_cast<long>(fit.reduced.rows());
  r.h = h;
  r.h1 = fit.h1;
  return r;
}

} // namespace detail

/// Everything drmat computes, for reports that need the basis and residuals.
struct DrmatOutcome {
  TestResult result;
  BasisEstimate basis;
  FitArtifacts fit;
};

inline DrmatOutcome drmat_detailed(const Dataset &data, const TestConfig &config = {}) {
  detail::check_dataset(data);
  BasisOptions opts;
  opts.c_n = config.c_n;
  opts.q_pilot = config.q_pilot;
  opts.refine = config.refine_c_n;

  DrmatOutcome out;
  out.basis = estimate_basis(data.X, data.y, opts);
  const int q = out.basis.qhat;
  const long n = static_cast<long>(data.n());
  out.fit = fit_mean(data.X * out.basis.basis, data.y, bandwidth_h1(n, q, config.h1_constant),
                     detail::include_self(config, true));
  const double h = bandwidth_h(n, q, config.h_multiplier);
  out.result = detail::standardize(Method::drmat, out.fit, h, q);
  out.result.qhat = q;
  out.result.p = static_cast<long>(data.p());
  out.result.full_dimensional = (q == data.p());
  return out;
}

/// Dimension-reduction model-adaptive test: DEE/RERE basis, NW mean fit on
/// the reduced predictors, standardized kernel U-statistic of centered
/// squared residuals. Rejects for large values.
inline TestResult drmat(const Dataset &data, const TestConfig &config = {}) {
  return drmat_detailed(data, config).result;
}

/// The same construction with no dimension reduction: every kernel is
/// p-dimensional.
inline TestResult zheng(const Dataset &data, const TestConfig &config = {}) {
  detail::check_dataset(data);
  const long n = static_cast<long>(data.n());
  const int p = static_cast<int>(data.p());
  const FitArtifacts fit =
      fit_mean(data.X, data.y, bandwidth_h1(n, p, config.h1_constant),
               detail::include_self(config, false));
  const double h = bandwidth_h(n, p, config.h_multiplier);
  TestResult r = detail::standardize(Method::zheng, fit, h, p);
  r.p = p;
  return r;
}

// ---------------------------------------------------------------------------
// Residual-marked empirical process

/// Centered indicator matrix C(i, j) = I(x_i <= x_j) - F_n(x_j), with the
/// componentwise order on rows of X.
inline Matrix marked_process_design(const Matrix &X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  Matrix c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      bool below = true;
      for (Eigen::Index k = 0; k < p && below; ++k)
        below = X(i, k) <= X(j, k);
      c(i, j) = below ? 1.0 : 0.0;
    }
  }
  const Eigen::RowVectorXd f = c.colwise().mean();
  c.rowwise() -= f;
  return c;
}

/// Cramer-von Mises functional (1/n) sum_j V_n(x_j)^2 with
/// V_n(x) = n^{-1/2} sum_i m_i (I(x_i <= x) - F_n(x)).
inline double cramer_von_mises(const Matrix &design, const Vector &marks) {
  const double n = static_cast<double>(marks.size());
  const Vector v = design.transpose() * marks / std::sqrt(n);
  return v.squaredNorm() / n;
}

inline double cramer_von_mises_statistic(const Matrix &X, const Vector &marks) {
  detail::require(X.rows() == marks.size(), "cramer_von_mises: length mismatch");
  return cramer_von_mises(marked_process_design(X), marks);
}

/// Wild-bootstrap p-value: fraction of Rademacher-reweighted statistics at
/// least as large as the observed one. Replicate b uses its own derived
/// stream, so the result does not depend on evaluation order.
inline double wild_bootstrap_p_value(const Matrix &design, const Vector &marks, double observed,
                                     int reps, std::uint64_t seed) {
  detail::require(reps >= 1, "bootstrap: need at least one replicate");
  int exceed = 0;
  Vector starred(marks.size());
  for (int b = 0; b < reps; ++b) {
    SignStream signs(derive_seed(seed, static_cast<std::uint64_t>(b)));
    for (Eigen::Index i = 0; i < marks.size(); ++i)
      starred[i] = signs.next() * marks[i];
    if (cramer_von_mises(design, starred) >= observed)
      ++exceed;
  }
  return static_cast<double>(exceed) / reps;
}

enum class ZfnVariant { full, low };

/// Residual-marked empirical-process test. The `low` variant fits the mean
/// on the leading DEE direction instead of the full covariate vector.
inline TestResult zfn(const Dataset &data, const TestConfig &config = {},
                      ZfnVariant variant = ZfnVariant::full) {
  detail::check_dataset(data);
  const long n = static_cast<long>(data.n());
  const int p = static_cast<int>(data.p());

  FitArtifacts fit;
  if (variant == ZfnVariant::full) {
    fit = fit_mean(data.X, data.y, bandwidth_h1(n, p, config.zfn_h1_constant),
                   detail::include_self(config, false));
  } else {
    const DeeDecomposition dee = dee_matrix(data.X, data.y);
    fit = fit_mean(data.X * dee.directions.leftCols(1), data.y,
                   bandwidth_h1(n, 1, config.zfn_h1_constant), detail::include_self(config, false));
  }
  const Vector marks = (fit.resid2.array() - fit.sigma2).matrix();
  const Matrix design = marked_process_design(data.X);

  TestResult r;
  r.method = variant == ZfnVariant::full ? Method::zfn : Method::zfn_low;
  r.raw_stat = cramer_von_mises(design, marks);
  r.statistic = r.raw_stat;
  r.p_value = wild_bootstrap_p_value(design, marks, r.raw_stat, config.boot_reps, config.seed);
  r.n = n;
  r.p = p;
  r.h1 = fit.h1;
  return r;
}

inline TestResult run_test(Method method, const Dataset &data, const TestConfig &config = {}) {
  switch (method) {
  case Method::drmat: return drmat(data, config);
  case Method::zheng: return zheng(data, config);
  case Method::zfn: return zfn(data, config, ZfnVariant::full);
  case Method::zfn_low: return zfn(data, config, ZfnVariant::low);
  }
  throw DomainError("unknown method");
}

} // namespace hettest
