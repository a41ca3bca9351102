#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Cholesky>

#include "hettest/errors.hpp"
#include "hettest/random.hpp"
#include "hettest/smoothing.hpp"
#include "hettest/types.hpp"

namespace hettest {

enum class Example { ex1, ex2, ex3, local };
enum class Covariance { sigma1, sigma2 };
enum class ErrorLaw { std_normal, student_t6 };
/// Variance-shape function for the local alternative.
enum class LocalShape { zero, square };

/// A simulation design. For `Example::local`, `base` selects the null model
/// that the variance perturbation C_n f(B^T X) is added to.
struct ScenarioSpec {
  Example example = Example::ex1;
  long n = 200;
  int p = 2;
  double a = 0.0;
  Covariance covariance = Covariance::sigma1;
  ErrorLaw error = ErrorLaw::std_normal;
  std::uint64_t seed = 1;
  Example base = Example::ex1;
  LocalShape shape = LocalShape::square;
  bool allow_nonstandard = false;  // lift the fixed covariance/error law of ex1/ex3

  bool operator==(const ScenarioSpec &) const = default;
};

// ---------------------------------------------------------------------------
// Enum names

inline std::string_view to_string(Example e) {
  switch (e) {
  case Example::ex1: return "ex1";
  case Example::ex2: return "ex2";
  case Example::ex3: return "ex3";
  case Example::local: return "local";
  }
  return "?";
}
inline std::string_view to_string(Covariance c) {
  return c == Covariance::sigma1 ? "sigma1" : "sigma2";
}
inline std::string_view to_string(ErrorLaw e) {
  return e == ErrorLaw::std_normal ? "std_normal" : "student_t6";
}
inline std::string_view to_string(LocalShape s) { return s == LocalShape::zero ? "zero" : "square"; }

inline Example parse_example(std::string_view s) {
  if (s == "ex1" || s == "1") return Example::ex1;
  if (s == "ex2" || s == "2") return Example::ex2;
  if (s == "ex3" || s == "3") return Example::ex3;
  if (s == "local") return Example::local;
  throw DomainError("unknown example '" + std::string(s) + "'");
}
inline Covariance parse_covariance(std::string_view s) {
  if (s == "sigma1") return Covariance::sigma1;
  if (s == "sigma2") return Covariance::sigma2;
  throw DomainError("unknown covariance '" + std::string(s) + "'");
}
inline ErrorLaw parse_error_law(std::string_view s) {
  if (s == "std_normal" || s == "normal") return ErrorLaw::std_normal;
  if (s == "student_t6" || s == "t6") return ErrorLaw::student_t6;
  throw DomainError("unknown error law '" + std::string(s) + "'");
}
inline LocalShape parse_local_shape(std::string_view s) {
  if (s == "zero") return LocalShape::zero;
  if (s == "square") return LocalShape::square;
  throw DomainError("unknown local shape '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Flat key-value form

inline std::map<std::string, std::string> to_kv(const ScenarioSpec &s) {
  std::map<std::string, std::string> kv;
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  kv["example"] = to_string(s.example);
  kv["n"] = std::to_string(s.n);
  kv["p"] = std::to_string(s.p);
  kv["a"] = num(s.a);
  kv["cov"] = to_string(s.covariance);
  kv["error"] = to_string(s.error);
  kv["seed"] = std::to_string(s.seed);
  kv["base"] = to_string(s.base);
  kv["shape"] = to_string(s.shape);
  kv["nonstandard"] = s.allow_nonstandard ? "1" : "0";
  return kv;
}

inline ScenarioSpec from_kv(const std::map<std::string, std::string> &kv) {
  ScenarioSpec s;
  for (const auto &[key, value] : kv) {
    try {
      if (key == "example") s.example = parse_example(value);
      else if (key == "n") s.n = std::stol(value);
      else if (key == "p") s.p = std::stoi(value);
      else if (key == "a") s.a = std::stod(value);
      else if (key == "cov") s.covariance = parse_covariance(value);
      else if (key == "error") s.error = parse_error_law(value);
      else if (key == "seed") s.seed = std::stoull(value);
      else if (key == "base") s.base = parse_example(value);
      else if (key == "shape") s.shape = parse_local_shape(value);
      else if (key == "nonstandard") s.allow_nonstandard = (value == "1" || value == "true");
      else throw DomainError("unknown scenario key '" + key + "'");
    } catch (const std::logic_error &) {
      // std::invalid_argument/out_of_range from stoX, and DomainError itself
      throw DomainError("bad value '" + value + "' for scenario key '" + key + "'");
    }
  }
  return s;
}

/// Compact "key=value;..." summary in key order.
inline std::string summary(const ScenarioSpec &s) {
  std::string out;
  for (const auto &[k, v] : to_kv(s)) {
    if (k == "seed")
      continue;
    if (!out.empty())
      out += ';';
    out += k + '=' + v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

/// Sigma1: 0.5^{|i-j|}. Sigma2: 1 on the diagonal, 0.3 elsewhere.
inline Matrix covariance_matrix(Covariance kind, int p) {
  detail::require(p >= 1, "covariance_matrix: p must be >= 1");
  Matrix s(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      s(i, j) = i == j ? 1.0
                       : (kind == Covariance::sigma1 ? std::pow(0.5, std::abs(i - j)) : 0.3);
  return s;
}

/// Lower Cholesky factor, or NumericalError for a non-PD matrix.
inline Matrix covariance_factor(const Matrix &cov) {
  detail::require(cov.rows() == cov.cols() && cov.rows() >= 1, "covariance must be square");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("covariance matrix is not positive definite");
  return llt.matrixL();
}

inline Vector mvn_sample(Rng &rng, const Vector &mean, const Matrix &lower) {
  detail::require(mean.size() == lower.rows(), "mvn_sample: dimension mismatch");
  std::normal_distribution<double> normal;
  Vector z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k)
    z[k] = normal(rng);
  return mean + lower.triangularView<Eigen::Lower>() * z;
}

/// Draws with the factor computed from `cov`; errors for non-PD input.
inline Vector mvn_sample_cov(Rng &rng, const Vector &mean, const Matrix &cov) {
  return mvn_sample(rng, mean, covariance_factor(cov));
}

/// n x p sample with rows N(0, cov).
inline Matrix mvn_rows(Rng &rng, long n, const Matrix &cov) {
  const Matrix lower = covariance_factor(cov);
  const Vector zero = Vector::Zero(cov.rows());
  Matrix X(n, cov.rows());
  for (long i = 0; i < n; ++i)
    X.row(i) = mvn_sample(rng, zero, lower).transpose();
  return X;
}

/// Error stream: standard normal, or Student t(6) as Z / sqrt(chi2_6 / 6)
/// with the chi-square drawn from a separate engine.
class ErrorSampler {
public:
  ErrorSampler(ErrorLaw law, std::uint64_t seed)
      : law_(law), normal_rng_(derive_seed(seed, 0)), chi_rng_(derive_seed(seed, 1)) {}

  double operator()() {
    const double z = normal_(normal_rng_);
    if (law_ == ErrorLaw::std_normal)
      return z;
    return z / std::sqrt(chi_(chi_rng_) / 6.0);
  }

private:
  ErrorLaw law_;
  Rng normal_rng_;
  Rng chi_rng_;
  std::normal_distribution<double> normal_;
  std::chi_squared_distribution<double> chi_{6.0};
};

namespace detail {

inline Vector ex1_beta(int p) {
  Vector beta = Vector::Zero(p);
  beta.head(p / 2).setOnes();
  return beta / std::sqrt(p / 2.0);
}

inline Vector beta1() { return (Vector(4) << 1, 1, 0, 0).finished() / std::sqrt(2.0); }
inline Vector beta2() { return (Vector(4) << 0, 0, 1, 1).finished() / std::sqrt(2.0); }

struct Streams {
  Rng design;
  ErrorSampler errors;
  explicit Streams(const ScenarioSpec &s)
      : design(derive_seed(s.seed, 101)), errors(s.error, derive_seed(s.seed, 202)) {}
};

inline void check_sizes(const ScenarioSpec &s) {
  require(s.n >= 2, "scenario: n must be >= 2");
  require(s.p >= 1, "scenario: p must be >= 1");
  require(s.a >= 0.0 && std::isfinite(s.a), "scenario: a must be finite and >= 0");
}

} // namespace detail

/// Example 1: Y = b'X + exp(-(b'X)^2) + 0.5 (1 + a |b'X|) e,
/// b = (1,...,1,0,...,0)/sqrt(p/2) with p/2 ones, X ~ N(0, Sigma1).
inline Dataset gen_example1(const ScenarioSpec &s) {
  detail::check_sizes(s);
  detail::require(s.p % 2 == 0, "example 1 requires an even p");
  if (!s.allow_nonstandard)
    detail::require(s.covariance == Covariance::sigma1 && s.error == ErrorLaw::std_normal,
                    "example 1 uses Sigma1 and standard normal errors");
  detail::Streams st(s);
  Dataset d;
  d.X = mvn_rows(st.design, s.n, covariance_matrix(s.covariance, s.p));
  const Vector index = d.X * detail::ex1_beta(s.p);
  d.y.resize(s.n);
  for (long i = 0; i < s.n; ++i) {
    const double u = index[i];
    d.y[i] = u + std::exp(-u * u) + 0.5 * (1.0 + s.a * std::abs(u)) * st.errors();
  }
  return d;
}

/// Example 2: Y = b1'X + 0.5 [a {(b1'X)^2 + (b2'X)^2} + 1] e, p = 4.
inline Dataset gen_example2(const ScenarioSpec &s) {
  detail::check_sizes(s);
  detail::require(s.p == 4, "example 2 requires p = 4");
  detail::Streams st(s);
  Dataset d;
  d.X = mvn_rows(st.design, s.n, covariance_matrix(s.covariance, 4));
  const Vector u1 = d.X * detail::beta1();
  const Vector u2 = d.X * detail::beta2();
  d.y.resize(s.n);
  for (long i = 0; i < s.n; ++i)
    d.y[i] = u1[i] + 0.5 * (s.a * (u1[i] * u1[i] + u2[i] * u2[i]) + 1.0) * st.errors();
  return d;
}

/// Example 3: Y = b1'X + 2 sin(b2'X / 2) + 0.5 [a {(b1'X)^2 + (b2'X)^2} + 1]^{1/2} e.
inline Dataset gen_example3(const ScenarioSpec &s) {
  detail::check_sizes(s);
  detail::require(s.p == 4, "example 3 requires p = 4");
  if (!s.allow_nonstandard)
    detail::require(s.error == ErrorLaw::std_normal, "example 3 uses standard normal errors");
  detail::Streams st(s);
  Dataset d;
  d.X = mvn_rows(st.design, s.n, covariance_matrix(s.covariance, 4));
  const Vector u1 = d.X * detail::beta1();
  const Vector u2 = d.X * detail::beta2();
  d.y.resize(s.n);
  for (long i = 0; i < s.n; ++i) {
    const double scale = std::sqrt(s.a * (u1[i] * u1[i] + u2[i] * u2[i]) + 1.0);
    d.y[i] = u1[i] + 2.0 * std::sin(u2[i] / 2.0) + 0.5 * scale * st.errors();
  }
  return d;
}

/// Dimension of the null mean index for each base example.
inline int null_index_dimension(Example base) { return base == Example::ex3 ? 2 : 1; }

/// C_n = n^{-1/2} h^{-q1/4}, h = 1.25 n^{-1/(4+q1)}.
inline double local_rate(long n, int q1) {
  return std::pow(static_cast<double>(n), -0.5) * std::pow(bandwidth_h(n, q1, 1.25), -0.25 * q1);
}

using IndexFunction = std::function<double(const Vector &)>;

inline IndexFunction shape_function(LocalShape shape) {
  if (shape == LocalShape::zero)
    return [](const Vector &) { return 0.0; };
  return [](const Vector &z) { return z.squaredNorm(); };
}

/// Local alternative around the null (a = 0) model of `s.base`:
/// Y = g(B1'X) + e (1 + C_n f(B'X) / 2), i.e. Var = sigma^2 (1 + C_n f / 2)^2.
/// B is b for Example 1 and (b1, b2) for Examples 2 and 3.
inline Dataset gen_local_alternative(const ScenarioSpec &s, const IndexFunction &f) {
  detail::check_sizes(s);
  const Example base = s.example == Example::local ? s.base : s.example;
  detail::require(base != Example::local, "local alternative needs a concrete base example");
  if (base == Example::ex1)
    detail::require(s.p % 2 == 0, "example 1 requires an even p");
  else
    detail::require(s.p == 4, "examples 2 and 3 require p = 4");

  const double c_n = local_rate(s.n, null_index_dimension(base));
  detail::Streams st(s);
  Dataset d;
  d.X = mvn_rows(st.design, s.n, covariance_matrix(s.covariance, s.p));
  Matrix B;
  if (base == Example::ex1) {
    B = detail::ex1_beta(s.p);
  } else {
    B.resize(4, 2);
    B.col(0) = detail::beta1();
    B.col(1) = detail::beta2();
  }
  const Matrix index = d.X * B;
  d.y.resize(s.n);
  for (long i = 0; i < s.n; ++i) {
    const Vector z = index.row(i).transpose();
    const double scale = 1.0 + c_n * f(z) / 2.0;
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw DomainError("local alternative: nonpositive variance at draw " + std::to_string(i));
    double mean = 0.0;
    switch (base) {
    case Example::ex1: mean = z[0] + std::exp(-z[0] * z[0]); break;
    case Example::ex2: mean = z[0]; break;
    default: mean = z[0] + 2.0 * std::sin(z[1] / 2.0); break;
    }
    d.y[i] = mean + 0.5 * st.errors() * scale;
  }
  return d;
}

inline Dataset generate(const ScenarioSpec &s) {
  switch (s.example) {
  case Example::ex1: return gen_example1(s);
  case Example::ex2: return gen_example2(s);
  case Example::ex3: return gen_example3(s);
  case Example::local: return gen_local_alternative(s, shape_function(s.shape));
  }
  throw DomainError("unknown example");
}

} // namespace hettest
