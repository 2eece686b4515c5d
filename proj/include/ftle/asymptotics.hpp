#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ftle/ensemble.hpp"

namespace ftle {

struct AsymptoticSpectrum {
  /// mu_i = (1 + tau) sigma2 (n - 2i + 1)/2 - mu, descending.
  Eigen::VectorXd mu_i;
  /// sigma2 == 0: every exponent equals -mu.
  bool degenerate = false;
};

AsymptoticSpectrum lyapunov_spectrum(const ValidatedParams& p);

struct AsymptoticLaw {
  double mean = 0.0;
  double variance = 0.0;
};

/// Linear continuation lambda_i(s) + mu_i (t - s) with variance (1 + 2 tau) sigma2 (t - s).
/// `i` is 1-based.
AsymptoticLaw asymptotic_mean(const ValidatedParams& p, int i, double lambda_s, double s, double t);

enum class Stability { Stable, Unstable, Marginal };
const char* to_string(Stability s);

/// Compares (1 + tau)(n - 1)/2 with mu / sigma2; equality within 1e-12 is marginal.
Stability is_stable(const ValidatedParams& p);

/// Large-n critical rescaled rate (1 + tau)/2, with mu_hat = mu / (sigma2 n).
double critical_mu_hat(double tau);

/// True when tau lies in [0, 1], the range the model restricts itself to; smaller
/// admissible tau are still evaluated.
bool tau_in_model_range(double tau);

/// Finite-n critical rescaled rate (1 + tau)(n - 1)/(2n).
double finite_n_critical_mu_hat(double tau, int n);

/// sigma_t sqrt((1 + tau) n t) - mu t.
double weak_noise_edge(double sigma_t, double tau, double mu, int n, double t);

/// Root in t of weak_noise_edge: (1 + tau) n sigma_t^2 / mu^2.
double weak_noise_edge_time(double sigma_t, double tau, double mu, int n);

/// sqrt((1 + tau)/t).
double weak_noise_critical(double tau, double t);

/// Edge of the semicircle reached by the Dyson process from the origin,
/// sigma_t sqrt(2 (1 + tau) n t). Follows from the exact second moment
/// E sum lambda^2 = [(1 + tau) sigma_t^2 n (n - 1)/2 + n (1 + 2 tau) sigma_t^2] t.
double dyson_spectral_edge(double sigma_t, double tau, int n, double t);

struct FormulaEstimator {};
struct SimulationEstimator {
  double t = 50.0;
  int paths = 50;
  double dt = 2e-3;
};
using PhaseEstimator = std::variant<FormulaEstimator, SimulationEstimator>;

struct PhaseDiagram {
  std::vector<double> tau_grid;
  std::vector<double> mu_hat_grid;
  /// top_exponent(tau index, mu_hat index), in units of sigma2 = 1.
  Eigen::MatrixXd top_exponent;
  /// Standard error of each cell (zero in formula mode).
  Eigen::MatrixXd top_exponent_se;
  /// (1 + tau)/2 per tau.
  std::vector<double> boundary;
  /// (1 + tau)(n - 1)/(2n) per tau.
  std::vector<double> boundary_finite_n;
  int n = 0;
};

/// Cells hold mu_1 at sigma2 = 1 and mu = mu_hat n. The simulation estimator fits
/// lambda_1 over [t/2, t] for mu = 0 and uses mu_1(mu) = mu_1(0) - mu, which holds
/// path by path because U_mu(t) = exp(-mu t) U_0(t).
PhaseDiagram phase_scan(int n, const std::vector<double>& tau_grid, const std::vector<double>& mu_hat_grid,
                        const PhaseEstimator& estimator, std::uint64_t seed, int threads = 1);

/// First mu_hat in the grid row at which the sign of the top exponent turns
/// negative; returns the bracketing pair (NaN if there is no sign change).
std::pair<double, double> sign_change_bracket(const PhaseDiagram& d, std::size_t tau_index);

}  // namespace ftle
