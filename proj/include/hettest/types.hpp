#pragma once

#include <Eigen/Dense>

namespace hettest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Covariates X (n x p) and response y (n).
struct Dataset {
  Matrix X;
  Vector y;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

} // namespace hettest
