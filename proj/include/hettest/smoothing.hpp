#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "hettest/errors.hpp"
#include "hettest/kernels.hpp"
#include "hettest/types.hpp"

namespace hettest {

/// Mean-function fit on the reduced predictors and the squared residuals
/// that mark the test statistics.
struct FitArtifacts {
  Matrix reduced;  // n x d, rows B^T x_i
  Vector ghat;     // fitted means
  Vector resid;    // y - ghat
  Vector resid2;   // squared residuals
  double sigma2 = 0.0;
  double h1 = 0.0;
};

/// Nadaraya-Watson fit evaluated at every sample point with the quartic
/// product kernel. By default the point's own response is part of its
/// average, so the denominator never vanishes. With `include_self = false`
/// the fit is leave-one-out; a point with no neighbour inside the window then
/// falls back to its own response.
inline Vector nw_regress(const Matrix &reduced, const Vector &y, double h1,
                         bool include_self = true) {
  const Eigen::Index n = reduced.rows();
  const auto d = static_cast<std::size_t>(reduced.cols());
  detail::require(n >= 2, "nw_regress: need at least two observations");
  detail::require(y.size() == n, "nw_regress: response length does not match rows");
  detail::require(d >= 1, "nw_regress: reduced predictors need at least one column");
  detail::require(h1 > 0.0 && std::isfinite(h1), "nw_regress: bandwidth must be positive");
  detail::require(reduced.allFinite(), "nw_regress: non-finite predictor");

  const RowMatrix z = reduced;
  Vector fitted(n);
  std::vector<double> diff(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i && !include_self)
        continue;
      for (std::size_t k = 0; k < d; ++k)
        diff[k] = z(j, static_cast<Eigen::Index>(k)) - z(i, static_cast<Eigen::Index>(k));
      const double w = detail::quartic_product_unscaled(diff.data(), d, h1);
      num += w * y[j];
      den += w;
    }
    fitted[i] = den > 0.0 ? num / den : y[i];
  }
  return fitted;
}

/// Squared residuals and their mean.
inline std::pair<Vector, double> residuals_sigma2(const Vector &y, const Vector &ghat) {
  if (y.size() != ghat.size())
    throw DomainError("residuals_sigma2: length mismatch");
  if (y.size() == 0)
    throw DomainError("residuals_sigma2: empty input");
  Vector resid2 = (y - ghat).array().square().matrix();
  const double sigma2 = resid2.mean();
  return {std::move(resid2), sigma2};
}

/// Test bandwidth multiplier * n^{-1/(4+qhat)}. The default multiplier is
/// 1.25; the sweep grid uses 0.5 + 0.25 i, i = 0..5.
inline double bandwidth_h(long n, int qhat, double multiplier = 1.25) {
  detail::require(n >= 2, "bandwidth_h: n must be >= 2");
  detail::require(qhat >= 1, "bandwidth_h: qhat must be >= 1");
  detail::require(multiplier > 0.0 && std::isfinite(multiplier),
                  "bandwidth_h: multiplier must be positive");
  return multiplier * std::pow(static_cast<double>(n), -1.0 / (4.0 + qhat));
}

/// Mean-estimation bandwidth c * n^{-1/(4+qhat)}.
inline double bandwidth_h1(long n, int qhat, double c = 1.0) {
  detail::require(n >= 2, "bandwidth_h1: n must be >= 2");
  detail::require(qhat >= 1, "bandwidth_h1: qhat must be >= 1");
  detail::require(c > 0.0 && std::isfinite(c), "bandwidth_h1: constant must be positive");
  return c * std::pow(static_cast<double>(n), -1.0 / (4.0 + qhat));
}

/// Runs the NW fit on `reduced` and collects residual summaries.
inline FitArtifacts fit_mean(Matrix reduced, const Vector &y, double h1,
                             bool include_self = true) {
  FitArtifacts fit;
  fit.ghat = nw_regress(reduced, y, h1, include_self);
  fit.resid = y - fit.ghat;
  auto [r2, s2] = residuals_sigma2(y, fit.ghat);
  fit.resid2 = std::move(r2);
  fit.sigma2 = s2;
  fit.reduced = std::move(reduced);
  fit.h1 = h1;
  return fit;
}

} // namespace hettest
