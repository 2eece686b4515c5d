#pragma once

#include <Eigen/Dense>

#include "ftle/ensemble.hpp"
#include "ftle/random.hpp"

namespace ftle {

/// Weights for the O(n^2) sampler of the isotropic matrix Brownian increment.
///
/// Off-diagonal entries are p G_ik + q G_ki with p^2 + q^2 = a and 2pq = c. The
/// diagonal has covariance (a + c) I + b J and is built from its two eigenspaces.
struct SamplerPlan {
  double p = 0.0;
  double q = 0.0;
  double diag_iso = 0.0;
  double diag_trace = 0.0;
  int n = 1;
};

struct MatrixIncrement {
  Eigen::MatrixXd delta_b;
  double dt = 0.0;
};

/// Throws ConstraintViolated if a radicand is below -kBoundarySlack; radicands
/// within the slack are clipped to zero.
SamplerPlan plan_sampler(const NoiseCoefficients& coeffs, int n);

MatrixIncrement sample_increment(const SamplerPlan& plan, double dt, RandomStream& rng);

/// In-place variant for hot loops; `out` is resized if needed.
void sample_increment_into(const SamplerPlan& plan, double dt, RandomStream& rng, Eigen::MatrixXd& out);

/// Dense reference sampler: symmetric square root of the explicit n^2 x n^2
/// covariance. Entry (i, k) maps to flat index i * n + k.
class DenseNoiseOracle {
 public:
  /// n <= 12. Throws NotPositiveSemidefinite if an eigenvalue is below -1e-9.
  DenseNoiseOracle(const NoiseCoefficients& coeffs, int n);

  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  MatrixIncrement sample(double dt, RandomStream& rng) const;

 private:
  int n_;
  Eigen::MatrixXd cov_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd root_;
};

Eigen::MatrixXd dense_noise_covariance(const NoiseCoefficients& coeffs, int n);

MatrixIncrement sample_increment_oracle(const NoiseCoefficients& coeffs, int n, double dt, RandomStream& rng);

}  // namespace ftle
