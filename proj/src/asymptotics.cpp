#include "ftle/asymptotics.hpp"

#include <cmath>
#include <limits>

#include "ftle/error.hpp"
#include "ftle/gdbm.hpp"
#include "ftle/parallel.hpp"
#include "ftle/stats.hpp"

namespace ftle {

AsymptoticSpectrum lyapunov_spectrum(const ValidatedParams& p) {
  const int n = p.n();
  AsymptoticSpectrum out;
  out.mu_i.resize(n);
  const double gap = (1.0 + p.tau()) * p.sigma2();
  for (int i = 1; i <= n; ++i) out.mu_i[i - 1] = 0.5 * gap * (n - 2 * i + 1) - p.mu();
  out.degenerate = p.sigma2() == 0.0;
  return out;
}

AsymptoticLaw asymptotic_mean(const ValidatedParams& p, int i, double lambda_s, double s, double t) {
  if (i < 1 || i > p.n()) throw Error(ErrorCode::OutOfRange, "exponent index out of range");
  if (!(t >= s)) throw Error(ErrorCode::OutOfRange, "need t >= s");
  const double rate = lyapunov_spectrum(p).mu_i[i - 1];
  return {lambda_s + rate * (t - s), (1.0 + 2.0 * p.tau()) * p.sigma2() * (t - s)};
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
  }
  return "unknown";
}

Stability is_stable(const ValidatedParams& p) {
  // Compared as (1 + tau)(n - 1) sigma2 / 2 against mu so sigma2 = 0 needs no division.
  const double lhs = 0.5 * (1.0 + p.tau()) * (p.n() - 1) * p.sigma2();
  const double scale = std::max({1.0, std::abs(lhs), std::abs(p.mu())});
  if (std::abs(lhs - p.mu()) <= 1e-12 * scale) return Stability::Marginal;
  return lhs < p.mu() ? Stability::Stable : Stability::Unstable;
}

double critical_mu_hat(double tau) { return 0.5 * (1.0 + tau); }

bool tau_in_model_range(double tau) { return tau >= 0.0 && tau <= 1.0; }

double finite_n_critical_mu_hat(double tau, int n) { return 0.5 * (1.0 + tau) * (n - 1) / n; }

double weak_noise_edge(double sigma_t, double tau, double mu, int n, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::OutOfRange, "t must be > 0");
  return sigma_t * std::sqrt((1.0 + tau) * n * t) - mu * t;
}

double weak_noise_edge_time(double sigma_t, double tau, double mu, int n) {
  if (!(mu > 0.0)) throw Error(ErrorCode::OutOfRange, "edge time needs mu > 0");
  return (1.0 + tau) * n * sigma_t * sigma_t / (mu * mu);
}

double weak_noise_critical(double tau, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::OutOfRange, "t must be > 0");
  return std::sqrt((1.0 + tau) / t);
}

double dyson_spectral_edge(double sigma_t, double tau, int n, double t) {
  return sigma_t * std::sqrt(2.0 * (1.0 + tau) * n * t);
}

PhaseDiagram phase_scan(int n, const std::vector<double>& tau_grid, const std::vector<double>& mu_hat_grid,
                        const PhaseEstimator& estimator, std::uint64_t seed, int threads) {
  if (tau_grid.empty() || mu_hat_grid.empty()) throw Error(ErrorCode::OutOfRange, "phase grids must be nonempty");
  PhaseDiagram d;
  d.n = n;
  d.tau_grid = tau_grid;
  d.mu_hat_grid = mu_hat_grid;
  const auto nt = static_cast<Eigen::Index>(tau_grid.size());
  const auto nm = static_cast<Eigen::Index>(mu_hat_grid.size());
  d.top_exponent.resize(nt, nm);
  d.top_exponent_se = Eigen::MatrixXd::Zero(nt, nm);
  for (Eigen::Index a = 0; a < nt; ++a) {
    const double tau = tau_grid[a];
    d.boundary.push_back(critical_mu_hat(tau));
    d.boundary_finite_n.push_back(finite_n_critical_mu_hat(tau, n));
    for (Eigen::Index b = 0; b < nm; ++b) {
      const double mu_hat = mu_hat_grid[b];
      if (mu_hat < 0.0) throw Error(ErrorCode::OutOfRange, "mu_hat must be >= 0");
      validate_params({n, mu_hat * n, 1.0, tau});
    }
  }

  if (std::holds_alternative<FormulaEstimator>(estimator)) {
    for (Eigen::Index a = 0; a < nt; ++a)
      for (Eigen::Index b = 0; b < nm; ++b) {
        const ValidatedParams p = validate_params({n, mu_hat_grid[b] * n, 1.0, tau_grid[a]});
        d.top_exponent(a, b) = lyapunov_spectrum(p).mu_i[0];
      }
    return d;
  }

  const auto& sim = std::get<SimulationEstimator>(estimator);
  if (!(sim.t > 0.0) || sim.paths < 2) throw Error(ErrorCode::OutOfRange, "simulation needs t > 0 and >= 2 paths");
  GdbmConfig cfg;
  cfg.dt = sim.dt;
  cfg.record_every = std::max(1, static_cast<int>(std::lround(0.05 / sim.dt)));
  for (Eigen::Index a = 0; a < nt; ++a) {
    const ValidatedParams p0 = validate_params({n, 0.0, 1.0, tau_grid[a]});
    std::vector<double> slopes(static_cast<std::size_t>(sim.paths));
    // Each tau row gets its own block of path indices.
    const std::uint64_t base = static_cast<std::uint64_t>(a) << 32;
    parallel_for(slopes.size(), threads, [&](std::size_t k) {
      const FtlePath path = simulate_gdbm(p0, sim.t, cfg, seed, base + k);
      slopes[k] = fit_drift(path, 0.5 * sim.t, sim.t).slope[0];
    });
    const double mean = sample_mean(slopes);
    const double se = std::sqrt(sample_variance(slopes) / static_cast<double>(slopes.size()));
    for (Eigen::Index b = 0; b < nm; ++b) {
      d.top_exponent(a, b) = mean - mu_hat_grid[b] * n;
      d.top_exponent_se(a, b) = se;
    }
  }
  return d;
}

std::pair<double, double> sign_change_bracket(const PhaseDiagram& d, std::size_t tau_index) {
  const auto row = static_cast<Eigen::Index>(tau_index);
  for (Eigen::Index b = 0; b + 1 < d.top_exponent.cols(); ++b) {
    if (d.top_exponent(row, b) >= 0.0 && d.top_exponent(row, b + 1) < 0.0) {
      return {d.mu_hat_grid[b], d.mu_hat_grid[b + 1]};
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan};
}

}  // namespace ftle
