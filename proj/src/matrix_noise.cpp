#include "ftle/matrix_noise.hpp"

#include <cmath>
#include <sstream>

#include "ftle/error.hpp"

namespace ftle {

namespace {

double checked_root(double radicand, const char* what) {
  if (radicand < -kBoundarySlack) {
    std::ostringstream msg;
    msg << what << " = " << radicand << " < 0";
    throw Error(ErrorCode::ConstraintViolated, msg.str());
  }
  return std::sqrt(std::max(radicand, 0.0));
}

}  // namespace

SamplerPlan plan_sampler(const NoiseCoefficients& k, int n) {
  if (n < 1) throw Error(ErrorCode::NonPositiveDimension, "n must be >= 1");
  const double plus = checked_root(k.a + k.c, "a + c");
  const double minus = checked_root(k.a - k.c, "a - c");
  SamplerPlan plan;
  plan.n = n;
  plan.p = 0.5 * (plus + minus);
  plan.q = 0.5 * (plus - minus);
  plan.diag_iso = plus;
  plan.diag_trace = checked_root((k.a + k.c + n * k.b) / n, "(a + c + n b) / n");
  return plan;
}

void sample_increment_into(const SamplerPlan& plan, double dt, RandomStream& rng, Eigen::MatrixXd& out) {
  const int n = plan.n;
  out.resize(n, n);
  const double h = std::sqrt(dt);
  // Each unordered pair (i, k) uses two fresh normals, so G_ik and G_ki are independent.
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double g_ik = rng.normal();
      const double g_ki = rng.normal();
      out(i, k) = h * (plan.p * g_ik + plan.q * g_ki);
      out(k, i) = h * (plan.p * g_ki + plan.q * g_ik);
    }
  }
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    out(i, i) = rng.normal();
    mean += out(i, i);
  }
  mean /= n;
  const double shared = plan.diag_trace * rng.normal();
  for (int i = 0; i < n; ++i) out(i, i) = h * (plan.diag_iso * (out(i, i) - mean) + shared);
}

MatrixIncrement sample_increment(const SamplerPlan& plan, double dt, RandomStream& rng) {
  MatrixIncrement inc;
  inc.dt = dt;
  sample_increment_into(plan, dt, rng, inc.delta_b);
  return inc;
}

Eigen::MatrixXd dense_noise_covariance(const NoiseCoefficients& k, int n) {
  const int m = n * n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < n; ++i)
    for (int kk = 0; kk < n; ++kk)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
          double v = 0.0;
          if (i == j && kk == l) v += k.a;
          if (i == kk && j == l) v += k.b;
          if (i == l && j == kk) v += k.c;
          cov(i * n + kk, j * n + l) = v;
        }
  return cov;
}

DenseNoiseOracle::DenseNoiseOracle(const NoiseCoefficients& coeffs, int n) : n_(n) {
  if (n < 1) throw Error(ErrorCode::NonPositiveDimension, "n must be >= 1");
  if (n > 12) throw Error(ErrorCode::OutOfRange, "dense oracle limited to n <= 12");
  cov_ = dense_noise_covariance(coeffs, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
  eigenvalues_ = eig.eigenvalues();
  if (eigenvalues_.minCoeff() < -1e-9) {
    std::ostringstream msg;
    msg << "smallest covariance eigenvalue " << eigenvalues_.minCoeff();
    throw Error(ErrorCode::NotPositiveSemidefinite, msg.str());
  }
  const Eigen::VectorXd roots = eigenvalues_.cwiseMax(0.0).cwiseSqrt();
  root_ = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

MatrixIncrement DenseNoiseOracle::sample(double dt, RandomStream& rng) const {
  const int m = n_ * n_;
  Eigen::VectorXd z(m);
  for (int i = 0; i < m; ++i) z[i] = rng.normal();
  const Eigen::VectorXd flat = std::sqrt(dt) * (root_ * z);
  MatrixIncrement inc;
  inc.dt = dt;
  inc.delta_b.resize(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < n_; ++k) inc.delta_b(i, k) = flat[i * n_ + k];
  return inc;
}

MatrixIncrement sample_increment_oracle(const NoiseCoefficients& coeffs, int n, double dt, RandomStream& rng) {
  return DenseNoiseOracle(coeffs, n).sample(dt, rng);
}

}  // namespace ftle
