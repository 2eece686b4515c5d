#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ftle/ensemble.hpp"
#include "ftle/random.hpp"

namespace ftle {

enum class TemporalMode { White, OrnsteinUhlenbeck, Frozen };

struct TemporalSpec {
  TemporalMode mode = TemporalMode::White;
  /// Correlation time of the Ornstein-Uhlenbeck coefficients.
  double t_c = 1.0;
};

/// Random-feature vector field
///   f(x) = (s / sqrt(M)) sum_m e_m (alpha_m cos(k_m . x) + beta_m sin(k_m . x))
/// with k_m ~ N(0, I / length^2). The first `longitudinal_count` features have
/// e_m = k_m (gradient part); the rest have e_m = |k_m| u_m with u_m a uniform unit
/// vector orthogonal to k_m (divergence-free part). Because every feature carries a
/// cos/sin pair with independent coefficients, the covariance of f and of its
/// Jacobian depends only on separations, exactly, for any fixed set of features.
struct FieldModel {
  int n = 0;
  int m = 0;
  Eigen::MatrixXd wavevectors;   // n x M
  Eigen::MatrixXd polarization;  // n x M
  int longitudinal_count = 0;
  double amplitude = 0.0;  // s
  double length_scale = 1.0;
  TemporalSpec temporal;
  double target_sigma2 = 0.0;
  double target_tau = 0.0;
  /// Isotropic projection of the realized Jacobian covariance at r = 0.
  double sigma2_hat = 0.0;
  double tau_hat = 0.0;
  std::uint64_t seed = 0;

  double longitudinal_fraction() const { return m > 0 ? static_cast<double>(longitudinal_count) / m : 0.0; }
};

/// tau of the feature ensemble with longitudinal fraction w: (w n - 1)/(n + 1 - 2w).
double tau_for_fraction(double w, int n);
/// Inverse of tau_for_fraction: (1 + tau (n + 1))/(n + 2 tau).
double fraction_for_tau(double tau, int n);

/// Least-squares isotropic fit (a, b = c) of the realized Jacobian covariance at
/// r = 0 for amplitude 1 and the first `longitudinal` features longitudinal.
NoiseCoefficients realized_jacobian_coefficients(const Eigen::MatrixXd& wavevectors, int longitudinal);

/// Draws features, then chooses the longitudinal count whose realized tau is
/// closest to the target and the amplitude that reproduces sigma2.
/// Requires n >= 2 (transverse polarization) and M >= 8. Throws CalibrationFailed
/// if the realized sigma2 misses by more than 10% or tau by more than 0.1.
FieldModel synthesize_field(int n, double sigma2, double tau, double length_scale, int m,
                            const TemporalSpec& temporal, std::uint64_t seed);

/// Same features with the amplitude set to zero.
FieldModel zero_field(int n, int m, const TemporalSpec& temporal);

/// Feature-ensemble kernel, matched at r = 0 to the realized (sigma2_hat, tau_hat):
///   Gamma1 = s^2 e^{-rho/l^2} [1/l^2 - 2 (1 - w) rho / ((n - 1) l^4)],
///   Gamma2 = s^2 e^{-rho/l^2} (-w + (1 - w)/(n - 1)) / l^4.
KernelSpec field_kernel(const FieldModel& model);

/// Exact covariance of the realized field, per unit of coefficient variance:
/// (s^2 / M) sum_m e_m e_m^T cos(k_m . r).
Eigen::MatrixXd realized_spatial_covariance(const FieldModel& model, const Eigen::VectorXd& r);

/// Coefficients multiplying the cos and sin channels over one step.
struct StepCoefficients {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
};

/// Coefficient process of one trajectory. White: fresh N(0, dt) increments each
/// step. Ornstein-Uhlenbeck: stationary unit-variance AR(1) with correlation
/// exp(-dt / t_c) per step, integrated with its start-of-step value. Frozen: drawn
/// once at construction.
class FieldDriver {
 public:
  FieldDriver(const FieldModel& model, RandomStream rng);

  /// Coefficients for the step [t, t + dt); advances the process.
  const StepCoefficients& next(double dt);
  const StepCoefficients& current() const { return step_; }

 private:
  const FieldModel* model_;
  RandomStream rng_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd beta_;
  StepCoefficients step_;
};

/// Field displacement sum over features for the given step coefficients.
Eigen::VectorXd evaluate_increment(const FieldModel& model, const StepCoefficients& c, const Eigen::VectorXd& x);

/// Increment and its Jacobian d increment_i / d x_k.
void evaluate_increment_jacobian(const FieldModel& model, const StepCoefficients& c, const Eigen::VectorXd& x,
                                 Eigen::VectorXd& value, Eigen::MatrixXd& jacobian);

/// White-in-time increment f(x) dW drawn from `rng` (stateless); for OU and frozen
/// models pass a driver instead.
Eigen::VectorXd field_increment(const FieldModel& model, const Eigen::VectorXd& x, double dt, RandomStream& rng);
Eigen::VectorXd field_increment(const FieldModel& model, FieldDriver& driver, const Eigen::VectorXd& x, double dt);

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> positions;
  std::vector<Eigen::VectorXd> tangent_ftle;
};

struct TrajectoryConfig {
  double dt = 5e-3;
  int record_every = 1;
  int refactor_every = 50;
  /// Fixed-point corrector iterations of the Heun step.
  int corrector_iterations = 2;
  bool tangent = true;
};

/// Stratonovich (Heun) integration of dx = -mu x dt + f(x, dt) with the tangent
/// flow carried in factored form, so FTLEs are log singular values at any time.
/// Driver substream: RandomStream(seed, stream_id(FieldDriver, path_index)).
/// Throws StepTooLarge if the corrector stops contracting.
TrajectoryRecord simulate_trajectory(const FieldModel& model, double mu, const Eigen::VectorXd& x0, double t_final,
                                     const TrajectoryConfig& cfg, std::uint64_t seed, std::uint64_t path_index = 0);

/// Difference between the exponent drift of the Stratonovich tangent flow of a
/// homogeneous isotropic white field and that of the matrix equation driven by
/// its Jacobian: sigma2 (1 + (n + 1) tau) / 2. The second-order term of the
/// field's Stratonovich correction cancels the matrix equation's Ito drift, so
/// the field exponents behave like gdbm with mu replaced by mu + this shift.
/// Zero exactly for divergence-free fields.
double tangent_flow_drift_shift(double sigma2, double tau, int n);

struct AutocorrelationTime {
  bool finite = false;
  double value = 0.0;
  /// Share of the integral accumulated over the final tenth of the horizon.
  double tail_fraction = 0.0;
};

/// Trapezoidal integral of Gamma1(|x(u) - x(0)|^2 / 2) g(u) / (Gamma1(0) g(0)) over
/// recorded times in [0, horizon]. Divergence heuristic: the final tenth of the
/// horizon contributes more than 5% of the total. Throws UnnormalizableKernel for
/// a Dirac g or Gamma1(0) g(0) == 0.
AutocorrelationTime estimate_autocorrelation_time(const TrajectoryRecord& traj, const ValidatedKernel& kernel,
                                                  double horizon);

}  // namespace ftle
