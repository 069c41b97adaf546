#pragma once

#include <Eigen/Dense>

namespace gossipopt {

struct NnlsResult {
  Eigen::VectorXd coefficients;
  double residual_norm = 0.0;
  bool converged = false;
};

/// Non-negative least squares min |E c - v| subject to c >= 0 (Lawson-Hanson).
/// Rank-deficient passive sets use the minimum-norm least-squares solution.
NnlsResult nnls(const Eigen::MatrixXd& columns, const Eigen::VectorXd& target);

}  // namespace gossipopt
