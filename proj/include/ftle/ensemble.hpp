#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

namespace ftle {

/// Inclusive slack used for every boundary constraint check. tau = -1/(n+1) is the
/// incompressible field and must be accepted.
inline constexpr double kBoundarySlack = 1e-12;

/// White-in-time model parameters: dimension n, relaxation rate mu, Jacobian noise
/// scale sigma2 and the interpolation parameter tau.
struct EnsembleParams {
  int n = 1;
  double mu = 0.0;
  double sigma2 = 0.0;
  double tau = 0.0;
};

/// Parameters that passed validate_params(). Only that function can create one.
class ValidatedParams {
 public:
  const EnsembleParams& raw() const { return params_; }
  int n() const { return params_.n; }
  double mu() const { return params_.mu; }
  double sigma2() const { return params_.sigma2; }
  double tau() const { return params_.tau; }

  /// mu == 0 is accepted for diagnostics (pure weak-noise edge law) but is not a
  /// model configuration.
  bool zero_rate_warning() const { return params_.mu == 0.0; }

 private:
  explicit ValidatedParams(EnsembleParams p) : params_(p) {}
  friend ValidatedParams validate_params(const EnsembleParams& p);

  EnsembleParams params_;
};

/// Throws Error(OutOfRange | NegativeVariance | NonPositiveDimension).
ValidatedParams validate_params(const EnsembleParams& p);

/// Lower end of the admissible tau range, -1/(n+1).
inline double tau_min(int n) { return -1.0 / (n + 1.0); }

/// Entry covariance a d_ij d_kl + b d_ik d_jl + c d_il d_jk of the matrix Brownian
/// motion, per unit time.
struct NoiseCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// a = sigma2, b = c = sigma2 * tau.
NoiseCoefficients to_noise_coefficients(const ValidatedParams& p);

/// a + c >= 0, a - c >= 0, a + n b + c >= 0 (with kBoundarySlack).
bool satisfies_constraints(const NoiseCoefficients& coeffs, int n);

// ---------------------------------------------------------------------------
// Kernels

/// (c0 + c1 * rho) * exp(-rho / length^2). The squared-exponential kernel is c1 = 0;
/// the linear term is what transverse random-feature fields produce.
struct GaussianPolyKernel {
  double c0 = 1.0;
  double c1 = 0.0;
  double length = 1.0;
};

/// Values on the uniform grid rho_k = k * step. Derivatives by finite differences.
struct TabulatedKernel {
  double step = 0.0;
  std::vector<double> values;
};

class ScalarKernel {
 public:
  ScalarKernel() : impl_(GaussianPolyKernel{0.0, 0.0, 1.0}) {}
  ScalarKernel(GaussianPolyKernel k) : impl_(k) {}
  ScalarKernel(TabulatedKernel k);

  static ScalarKernel squared_exponential(double amplitude, double length) {
    return GaussianPolyKernel{amplitude, 0.0, length};
  }
  static ScalarKernel zero() { return GaussianPolyKernel{0.0, 0.0, 1.0}; }

  double value(double rho) const;
  double d1(double rho) const;
  double d2(double rho) const;

  /// Non-increasing on a grid covering the kernel's effective range.
  bool monotone_decreasing() const;

  const std::variant<GaussianPolyKernel, TabulatedKernel>& impl() const { return impl_; }

 private:
  std::variant<GaussianPolyKernel, TabulatedKernel> impl_;
};

struct DiracTemporal {};
struct ExponentialTemporal {
  double t_c = 1.0;
};
struct ConstantTemporal {
  double level = 1.0;
};
struct TabulatedTemporal {
  double step = 0.0;
  std::vector<double> values;
};

/// Temporal correlation g(|t - s|).
class TemporalKernel {
 public:
  using Variant = std::variant<DiracTemporal, ExponentialTemporal, ConstantTemporal, TabulatedTemporal>;

  TemporalKernel() : impl_(DiracTemporal{}) {}
  TemporalKernel(Variant v) : impl_(std::move(v)) {}

  bool is_dirac() const { return std::holds_alternative<DiracTemporal>(impl_); }
  /// g(u) for u >= 0. Throws UnnormalizableKernel for the Dirac kernel.
  double value(double u) const;
  std::string name() const;

  const Variant& impl() const { return impl_; }

 private:
  Variant impl_;
};

struct KernelSpec {
  ScalarKernel gamma1;
  ScalarKernel gamma2;
  TemporalKernel g;
};

class ValidatedKernel {
 public:
  const KernelSpec& spec() const { return spec_; }
  int n() const { return n_; }
  /// -Gamma1'(0).
  double sigma2() const { return -spec_.gamma1.d1(0.0); }
  /// -Gamma2(0) / sigma2; 0 when sigma2 == 0.
  double tau() const;
  bool gamma1_monotone() const { return gamma1_monotone_; }

 private:
  ValidatedKernel(KernelSpec spec, int n, bool monotone)
      : spec_(std::move(spec)), n_(n), gamma1_monotone_(monotone) {}
  friend ValidatedKernel validate_kernel(const KernelSpec& k, int n);

  KernelSpec spec_;
  int n_;
  bool gamma1_monotone_;
};

/// Checks Gamma1'(0) <= 0 <= Gamma1(0) and Gamma1'(0)/(n+1) <= -Gamma2(0) <= -Gamma1'(0).
/// Throws KernelConstraintViolated naming the failed inequality.
ValidatedKernel validate_kernel(const KernelSpec& k, int n);

/// D_ij(r) = Gamma1(|r|^2/2) d_ij + Gamma2(|r|^2/2) r_i r_j.
Eigen::MatrixXd eval_spatial_covariance(const ValidatedKernel& k, const Eigen::VectorXd& r);

/// Dense rank-4 tensor indexed (i, j, k, l), row-major in that order.
class Tensor4 {
 public:
  explicit Tensor4(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}

  int n() const { return n_; }
  double& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }
  double max_abs_diff(const Tensor4& other) const;
  double max_abs() const;

 private:
  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * n_ + j) * n_ + k) * n_ + l;
  }
  int n_;
  std::vector<double> data_;
};

/// C_{ij;kl}(r) = E[J_ik(x) J_jl(x + r)] / g, the Jacobian covariance tensor.
Tensor4 eval_jacobian_covariance(const ValidatedKernel& k, const Eigen::VectorXd& r);

/// a d_ij d_kl + b d_ik d_jl + c d_il d_jk.
Tensor4 isotropic_tensor(const NoiseCoefficients& coeffs, int n);

}  // namespace ftle
