#pragma once

#include <Eigen/Dense>

namespace ftle {

/// SVD of a column-graded matrix G = A diag(exp(log_scale)) without forming G.
///
/// A is expected to be well conditioned; log_scale may spread over thousands, far
/// beyond double range. Returns G = U diag(exp(log_sv)) V^T with log_sv sorted
/// descending, U and V orthogonal.
struct LogSvd {
  Eigen::MatrixXd u;
  Eigen::VectorXd log_sv;
  Eigen::MatrixXd v;
  int sweeps = 0;
};

/// One-sided Jacobi on columns carried as (unit direction, log length). Rotation
/// angles are formed from the ratio exp(-(s_p - s_q)) so no scale is ever
/// exponentiated on its own.
LogSvd log_scaled_svd(const Eigen::MatrixXd& a, const Eigen::VectorXd& log_scale);

}  // namespace ftle
