#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hettest/smoothing.hpp"

using namespace hettest;

namespace {

Matrix random_matrix(std::mt19937_64 &rng, int n, int d) {
  std::normal_distribution<double> z;
  Matrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      m(i, k) = z(rng);
  return m;
}

Vector random_vector(std::mt19937_64 &rng, int n) {
  std::normal_distribution<double> z;
  Vector v(n);
  for (int i = 0; i < n; ++i)
    v[i] = z(rng);
  return v;
}

} // namespace

TEST(NadarayaWatson, ConstantResponse) {
  std::mt19937_64 rng(3);
  const Matrix z = random_matrix(rng, 30, 2);
  const Vector y = Vector::Constant(30, 2.5);
  for (double h : {0.05, 0.5, 5.0}) {
    const Vector fit = nw_regress(z, y, h);
    for (int i = 0; i < 30; ++i)
      EXPECT_NEAR(fit[i], 2.5, 1e-14);
  }
}

TEST(NadarayaWatson, DisjointSupportsKeepSelf) {
  Matrix z(2, 1);
  z << 0.0, 10.0;
  Vector y(2);
  y << 1.0, 3.0;
  const Vector fit = nw_regress(z, y, 1.0);
  EXPECT_DOUBLE_EQ(fit[0], 1.0);
  EXPECT_DOUBLE_EQ(fit[1], 3.0);
}

TEST(NadarayaWatson, TwoPointWeightedMean) {
  Matrix z(2, 1);
  z << 0.0, 0.5;
  Vector y(2);
  y << 0.0, 1.0;
  const Vector fit = nw_regress(z, y, 1.0);
  // weights 0.9375 (self) and 0.52734375 (neighbour)
  EXPECT_NEAR(fit[0], 0.52734375 / 1.46484375, 1e-15);
  EXPECT_NEAR(fit[0], 0.36, 1e-15);
  EXPECT_NEAR(fit[1], 0.64, 1e-15);
}

TEST(NadarayaWatson, LeaveOneOut) {
  Matrix z(3, 1);
  z << 0.0, 0.5, 10.0;
  Vector y(3);
  y << 0.0, 1.0, 7.0;
  const Vector fit = nw_regress(z, y, 1.0, /*include_self=*/false);
  EXPECT_DOUBLE_EQ(fit[0], 1.0);
  EXPECT_DOUBLE_EQ(fit[1], 0.0);
  EXPECT_DOUBLE_EQ(fit[2], 7.0);  // isolated point keeps its own response
}

TEST(NadarayaWatson, Preconditions) {
  Matrix z(1, 1);
  z << 0.0;
  Vector y(1);
  y << 1.0;
  EXPECT_THROW(nw_regress(z, y, 1.0), DomainError);
  Matrix z2(2, 1);
  z2 << 0.0, 1.0;
  Vector y2(2);
  y2 << 1.0, 2.0;
  EXPECT_THROW(nw_regress(z2, y2, 0.0), DomainError);
  EXPECT_THROW(nw_regress(z2, y, 1.0), DomainError);
  z2(1, 0) = std::nan("");
  EXPECT_THROW(nw_regress(z2, y2, 1.0), DomainError);
}

TEST(NadarayaWatson, AffineInResponse) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix z = random_matrix(rng, 40, 1 + trial % 3);
    const Vector y = random_vector(rng, 40);
    const double a = -3.0 + 0.37 * trial;
    const double b = 1.5 - 0.2 * trial;
    const Vector base = nw_regress(z, y, 0.7);
    const Vector shifted = nw_regress(z, (a * y.array() + b).matrix(), 0.7);
    for (int i = 0; i < 40; ++i)
      EXPECT_NEAR(shifted[i], a * base[i] + b, 1e-10);
  }
}

TEST(NadarayaWatson, PermutationEquivariant) {
  std::mt19937_64 rng(23);
  const Matrix z = random_matrix(rng, 35, 2);
  const Vector y = random_vector(rng, 35);
  std::vector<int> perm(35);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix zp(35, 2);
  Vector yp(35);
  for (int i = 0; i < 35; ++i) {
    zp.row(i) = z.row(perm[i]);
    yp[i] = y[perm[i]];
  }
  const Vector fit = nw_regress(z, y, 0.8);
  const Vector fitp = nw_regress(zp, yp, 0.8);
  for (int i = 0; i < 35; ++i)
    EXPECT_NEAR(fitp[i], fit[perm[i]], 1e-12);
}

TEST(Residuals, Examples) {
  Vector y(2), g(2);
  y << 1.0, 2.0;
  g = y;
  auto [r0, s0] = residuals_sigma2(y, g);
  EXPECT_EQ(r0.sum(), 0.0);
  EXPECT_EQ(s0, 0.0);

  g << 0.0, 3.0;  // raw residuals (1, -1)
  auto [r1, s1] = residuals_sigma2(y, g);
  EXPECT_DOUBLE_EQ(r1[0], 1.0);
  EXPECT_DOUBLE_EQ(r1[1], 1.0);
  EXPECT_DOUBLE_EQ(s1, 1.0);

  Vector y3(3), g3 = Vector::Zero(3);
  y3 << 1.0, -1.0, 2.0;
  EXPECT_DOUBLE_EQ(residuals_sigma2(y3, g3).second, 2.0);

  EXPECT_THROW(residuals_sigma2(y3, g), DomainError);
}

TEST(Residuals, FitArtifactsInvariants) {
  std::mt19937_64 rng(5);
  const Matrix z = random_matrix(rng, 50, 1);
  const Vector y = random_vector(rng, 50);
  const FitArtifacts fit = fit_mean(z, y, 0.4);
  EXPECT_NEAR(fit.sigma2, fit.resid2.mean(), 1e-12);
  EXPECT_GE(fit.resid2.minCoeff(), 0.0);
  EXPECT_EQ(fit.reduced.cols(), 1);
  EXPECT_DOUBLE_EQ(fit.h1, 0.4);

  // Refitting after a shift of y leaves the residuals unchanged.
  const FitArtifacts shifted = fit_mean(z, (y.array() + 4.0).matrix(), 0.4);
  EXPECT_NEAR(shifted.sigma2, fit.sigma2, 1e-12);
}

TEST(Bandwidth, TestBandwidth) {
  EXPECT_NEAR(bandwidth_h(400, 1, 1.25), 0.3771360210340727, 1e-12);
  EXPECT_NEAR(bandwidth_h(400, 1, 0.5), 0.15085440841362907, 1e-12);
  EXPECT_NEAR(bandwidth_h(400, 1), 0.3771360210340727, 1e-12);
  EXPECT_THROW(bandwidth_h(400, 1, 0.0), DomainError);
  EXPECT_THROW(bandwidth_h(1, 1, 1.25), DomainError);
  EXPECT_THROW(bandwidth_h(400, 0, 1.25), DomainError);
}

TEST(Bandwidth, MeanBandwidth) {
  EXPECT_NEAR(bandwidth_h1(400, 1, 1.0), 0.30170881682725814, 1e-12);
  EXPECT_NEAR(bandwidth_h1(200, 2, 1.0), 0.41351855420001377, 1e-12);
  EXPECT_NEAR(bandwidth_h1(1600, 1) / bandwidth_h1(400, 1), std::pow(4.0, -0.2), 1e-12);
  EXPECT_THROW(bandwidth_h1(400, 1, -1.0), DomainError);
}
