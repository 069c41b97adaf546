#include "gossipopt/nnls.hpp"

#include <algorithm>
#include <vector>

namespace gossipopt {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& columns, const std::vector<bool>& passive,
                              const Eigen::VectorXd& target) {
  const Eigen::Index m = columns.cols();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
  }
  Eigen::MatrixXd sub(columns.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = columns.col(idx[k]);
  const Eigen::VectorXd z = sub.completeOrthogonalDecomposition().solve(target);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < idx.size(); ++k) full(idx[k]) = z(static_cast<Eigen::Index>(k));
  return full;
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& columns, const Eigen::VectorXd& target) {
  const Eigen::Index m = columns.cols();
  NnlsResult out;
  out.coefficients = Eigen::VectorXd::Zero(m);
  if (m == 0) {
    out.residual_norm = target.norm();
    out.converged = true;
    return out;
  }

  const double scale = std::max(1.0, columns.norm() * std::max(1.0, target.norm()));
  const double tol = 1e-13 * scale;
  std::vector<bool> passive(static_cast<std::size_t>(m), false);
  Eigen::VectorXd& x = out.coefficients;

  const int max_outer = static_cast<int>(3 * m + 10);
  for (int outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd w = columns.transpose() * (target - columns * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) {
      out.converged = true;
      break;
    }
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < max_outer; ++inner) {
      const Eigen::VectorXd z = solve_passive(columns, passive, target);
      bool feasible = true;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      }
      if (feasible) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < m; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  out.residual_norm = (columns * x - target).norm();
  return out;
}

}  // namespace gossipopt
