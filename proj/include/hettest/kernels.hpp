#pragma once

#include <cmath>
#include <span>

#include "hettest/errors.hpp"

namespace hettest {

enum class KernelFamily { quartic };

/// Kernel family, dimension and bandwidth bundled together.
struct KernelSpec {
  KernelFamily family = KernelFamily::quartic;
  int dimension = 1;
  double bandwidth = 1.0;

  KernelSpec() = default;
  KernelSpec(int d, double h) : dimension(d), bandwidth(h) {
    detail::require(d >= 1, "kernel dimension must be >= 1");
    detail::require(h > 0.0 && std::isfinite(h), "kernel bandwidth must be positive");
  }
};

/// Biweight kernel (15/16)(1-u^2)^2 on [-1, 1].
inline double quartic(double u) {
  if (!std::isfinite(u))
    throw DomainError("quartic kernel: non-finite argument");
  if (std::abs(u) >= 1.0)
    return 0.0;
  const double w = 1.0 - u * u;
  return 0.9375 * w * w;
}

namespace detail {

// Unchecked product of quartic(v_k / h), without the h^{-d} factor. Hot path
// for the O(n^2) loops, where callers have already validated h.
inline double quartic_product_unscaled(const double *v, std::size_t d, double h) {
  double value = 1.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double u = v[k] / h;
    if (!(std::abs(u) < 1.0))
      return 0.0;
    const double w = 1.0 - u * u;
    value *= 0.9375 * w * w;
  }
  return value;
}

} // namespace detail

/// d-dimensional product kernel scaled by the bandwidth:
/// h^{-d} * prod_k quartic(v_k / h).
inline double product_kernel(std::span<const double> v, double h) {
  detail::require(!v.empty(), "product_kernel: empty argument");
  detail::require(h > 0.0 && std::isfinite(h), "product_kernel: bandwidth must be positive");
  double value = 1.0;
  for (double vk : v)
    value *= quartic(vk / h);
  return value / std::pow(h, static_cast<double>(v.size()));
}

inline double evaluate(const KernelSpec &spec, std::span<const double> v) {
  detail::require(static_cast<int>(v.size()) == spec.dimension,
                  "kernel argument length does not match dimension");
  return product_kernel(v, spec.bandwidth);
}

/// Integral of quartic(u)^2 over [-1, 1], i.e. 5/7.
inline constexpr double quartic_squared_integral = 5.0 / 7.0;

} // namespace hettest
