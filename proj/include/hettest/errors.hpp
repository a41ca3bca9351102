#pragma once

#include <stdexcept>
#include <string>

namespace hettest {

/// Invalid argument or violated precondition.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input data cannot be used (missing values, bad columns, too few rows).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: ill-conditioned covariance, failed factorization.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The statistic is undefined because the variance estimate vanished
/// (for example a constant response gives all-zero residuals).
class DegenerateDataError : public DataError {
public:
  using DataError::DataError;
};

namespace detail {

inline void require(bool cond, const std::string &what) {
  if (!cond)
    throw DomainError(what);
}

} // namespace detail
} // namespace hettest
