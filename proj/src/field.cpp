#include "ftle/field.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ftle/error.hpp"
#include "ftle/flow.hpp"

namespace ftle {

double tau_for_fraction(double w, int n) { return (w * n - 1.0) / (n + 1.0 - 2.0 * w); }

double fraction_for_tau(double tau, int n) { return (1.0 + tau * (n + 1.0)) / (n + 2.0 * tau); }

NoiseCoefficients realized_jacobian_coefficients(const Eigen::MatrixXd& wavevectors, int longitudinal) {
  const auto n = static_cast<double>(wavevectors.rows());
  const auto m = static_cast<double>(wavevectors.cols());
  // Contractions of (1/M) sum e_i e_j k_k k_l with d_ij d_kl and with d_ik d_jl
  // (= d_il d_jk): |e|^2 |k|^2 = |k|^4 for every feature, (e . k)^2 = |k|^4 only
  // for longitudinal ones.
  double p1 = 0.0, p2 = 0.0;
  for (Eigen::Index c = 0; c < wavevectors.cols(); ++c) {
    const double k4 = wavevectors.col(c).squaredNorm() * wavevectors.col(c).squaredNorm();
    p1 += k4;
    if (c < longitudinal) p2 += k4;
  }
  p1 /= m;
  p2 /= m;
  // Normal equations for a E1 + b (E2 + E3).
  const double det = 2.0 * n * n * (n - 1.0) * (n + 2.0);
  const double a = ((2.0 * n * n + 2.0 * n) * p1 - 4.0 * n * p2) / det;
  const double b = (2.0 * n * n * p2 - 2.0 * n * p1) / det;
  return {a, b, b};
}

FieldModel synthesize_field(int n, double sigma2, double tau, double length_scale, int m,
                            const TemporalSpec& temporal, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::OutOfRange, "field synthesis needs n >= 2 for transverse features");
  if (m < 8) throw Error(ErrorCode::OutOfRange, "field synthesis needs M >= 8 features");
  if (!(length_scale > 0.0)) throw Error(ErrorCode::OutOfRange, "length scale must be > 0");
  validate_params({n, 0.0, sigma2, tau});
  if (temporal.mode == TemporalMode::OrnsteinUhlenbeck && !(temporal.t_c > 0.0)) {
    throw Error(ErrorCode::OutOfRange, "t_c must be > 0");
  }

  FieldModel model;
  model.n = n;
  model.m = m;
  model.length_scale = length_scale;
  model.temporal = temporal;
  model.target_sigma2 = sigma2;
  model.target_tau = tau;
  model.seed = seed;
  model.wavevectors.resize(n, m);
  model.polarization.resize(n, m);

  RandomStream rng(seed, stream_id(StreamTag::FieldFeatures, 0));
  Eigen::MatrixXd transverse(n, m);
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < n; ++i) model.wavevectors(i, c) = rng.normal() / length_scale;
    const Eigen::VectorXd k = model.wavevectors.col(c);
    const Eigen::VectorXd khat = k.normalized();
    Eigen::VectorXd u;
    do {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v[i] = rng.normal();
      u = v - v.dot(khat) * khat;
    } while (u.norm() < 1e-8);
    transverse.col(c) = k.norm() * u.normalized();
  }

  // Features are i.i.d., so taking the first L as longitudinal is a random split.
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  NoiseCoefficients best_coeffs;
  for (int l = 0; l <= m; ++l) {
    const NoiseCoefficients k = realized_jacobian_coefficients(model.wavevectors, l);
    const double err = std::abs(k.b / k.a - tau);
    if (err < best_err) {
      best_err = err;
      best = l;
      best_coeffs = k;
    }
  }
  model.longitudinal_count = best;
  for (int c = 0; c < m; ++c) {
    model.polarization.col(c) = c < best ? Eigen::VectorXd(model.wavevectors.col(c)) : transverse.col(c);
  }
  model.amplitude = std::sqrt(sigma2 / best_coeffs.a);
  model.sigma2_hat = model.amplitude * model.amplitude * best_coeffs.a;
  model.tau_hat = best_coeffs.b / best_coeffs.a;

  const double sigma_err = sigma2 > 0.0 ? std::abs(model.sigma2_hat - sigma2) / sigma2 : 0.0;
  if (sigma_err > 0.1 || std::abs(model.tau_hat - tau) > 0.1) {
    std::ostringstream msg;
    msg << "realized (sigma2, tau) = (" << model.sigma2_hat << ", " << model.tau_hat << ") vs target (" << sigma2
        << ", " << tau << ") with M = " << m;
    throw Error(ErrorCode::CalibrationFailed, msg.str());
  }
  return model;
}

FieldModel zero_field(int n, int m, const TemporalSpec& temporal) {
  FieldModel model = synthesize_field(n, 1.0, 0.0, 1.0, m, temporal, 0);
  model.amplitude = 0.0;
  model.target_sigma2 = 0.0;
  model.sigma2_hat = 0.0;
  return model;
}

KernelSpec field_kernel(const FieldModel& model) {
  const int n = model.n;
  const double l2 = model.length_scale * model.length_scale;
  const double l4 = l2 * l2;
  const double w = fraction_for_tau(model.tau_hat, n);
  const double s2 = model.sigma2_hat * l4 * (n - 1.0) / (n + 1.0 - 2.0 * w);
  KernelSpec k;
  k.gamma1 = GaussianPolyKernel{s2 / l2, -2.0 * s2 * (1.0 - w) / ((n - 1.0) * l4), model.length_scale};
  k.gamma2 = GaussianPolyKernel{s2 * (-w + (1.0 - w) / (n - 1.0)) / l4, 0.0, model.length_scale};
  switch (model.temporal.mode) {
    case TemporalMode::White: k.g = TemporalKernel(DiracTemporal{}); break;
    case TemporalMode::OrnsteinUhlenbeck: k.g = TemporalKernel(ExponentialTemporal{model.temporal.t_c}); break;
    case TemporalMode::Frozen: k.g = TemporalKernel(ConstantTemporal{1.0}); break;
  }
  return k;
}

Eigen::MatrixXd realized_spatial_covariance(const FieldModel& model, const Eigen::VectorXd& r) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(model.n, model.n);
  for (int c = 0; c < model.m; ++c) {
    const Eigen::VectorXd e = model.polarization.col(c);
    d += std::cos(model.wavevectors.col(c).dot(r)) * (e * e.transpose());
  }
  return model.amplitude * model.amplitude / model.m * d;
}

FieldDriver::FieldDriver(const FieldModel& model, RandomStream rng) : model_(&model), rng_(rng) {
  alpha_.resize(model.m);
  beta_.resize(model.m);
  step_.alpha.resize(model.m);
  step_.beta.resize(model.m);
  if (model.temporal.mode != TemporalMode::White) {
    for (int c = 0; c < model.m; ++c) {
      alpha_[c] = rng_.normal();
      beta_[c] = rng_.normal();
    }
  }
}

const StepCoefficients& FieldDriver::next(double dt) {
  const int m = model_->m;
  switch (model_->temporal.mode) {
    case TemporalMode::White: {
      const double h = std::sqrt(dt);
      for (int c = 0; c < m; ++c) {
        step_.alpha[c] = h * rng_.normal();
        step_.beta[c] = h * rng_.normal();
      }
      break;
    }
    case TemporalMode::OrnsteinUhlenbeck: {
      step_.alpha = dt * alpha_;
      step_.beta = dt * beta_;
      const double rho = std::exp(-dt / model_->temporal.t_c);
      const double kick = std::sqrt(1.0 - rho * rho);
      for (int c = 0; c < m; ++c) {
        alpha_[c] = rho * alpha_[c] + kick * rng_.normal();
        beta_[c] = rho * beta_[c] + kick * rng_.normal();
      }
      break;
    }
    case TemporalMode::Frozen:
      step_.alpha = dt * alpha_;
      step_.beta = dt * beta_;
      break;
  }
  return step_;
}

Eigen::VectorXd evaluate_increment(const FieldModel& model, const StepCoefficients& c, const Eigen::VectorXd& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.n);
  for (int f = 0; f < model.m; ++f) {
    const double phase = model.wavevectors.col(f).dot(x);
    out += (c.alpha[f] * std::cos(phase) + c.beta[f] * std::sin(phase)) * model.polarization.col(f);
  }
  return model.amplitude / std::sqrt(static_cast<double>(model.m)) * out;
}

void evaluate_increment_jacobian(const FieldModel& model, const StepCoefficients& c, const Eigen::VectorXd& x,
                                 Eigen::VectorXd& value, Eigen::MatrixXd& jacobian) {
  value = Eigen::VectorXd::Zero(model.n);
  jacobian = Eigen::MatrixXd::Zero(model.n, model.n);
  for (int f = 0; f < model.m; ++f) {
    const double phase = model.wavevectors.col(f).dot(x);
    const double cs = std::cos(phase);
    const double sn = std::sin(phase);
    value += (c.alpha[f] * cs + c.beta[f] * sn) * model.polarization.col(f);
    jacobian += (c.beta[f] * cs - c.alpha[f] * sn) * model.polarization.col(f) * model.wavevectors.col(f).transpose();
  }
  const double scale = model.amplitude / std::sqrt(static_cast<double>(model.m));
  value *= scale;
  jacobian *= scale;
}

Eigen::VectorXd field_increment(const FieldModel& model, const Eigen::VectorXd& x, double dt, RandomStream& rng) {
  if (!(dt > 0.0)) throw Error(ErrorCode::OutOfRange, "dt must be > 0");
  if (model.temporal.mode != TemporalMode::White) {
    throw Error(ErrorCode::ConfigError, "time-correlated fields need a FieldDriver");
  }
  const double h = std::sqrt(dt);
  StepCoefficients c{Eigen::VectorXd(model.m), Eigen::VectorXd(model.m)};
  for (int f = 0; f < model.m; ++f) {
    c.alpha[f] = h * rng.normal();
    c.beta[f] = h * rng.normal();
  }
  return evaluate_increment(model, c, x);
}

Eigen::VectorXd field_increment(const FieldModel& model, FieldDriver& driver, const Eigen::VectorXd& x, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::OutOfRange, "dt must be > 0");
  return evaluate_increment(model, driver.next(dt), x);
}

TrajectoryRecord simulate_trajectory(const FieldModel& model, double mu, const Eigen::VectorXd& x0, double t_final,
                                     const TrajectoryConfig& cfg, std::uint64_t seed, std::uint64_t path_index) {
  if (x0.size() != model.n) throw Error(ErrorCode::OutOfRange, "x0 dimension does not match the field");
  if (!(t_final > 0.0) || !(cfg.dt > 0.0)) throw Error(ErrorCode::OutOfRange, "need t_final > 0 and dt > 0");
  if (cfg.record_every < 1 || cfg.refactor_every < 1 || cfg.corrector_iterations < 1) {
    throw Error(ErrorCode::OutOfRange, "record_every, refactor_every and corrector_iterations must be >= 1");
  }
  const int n = model.n;
  const double dt = cfg.dt;
  const std::int64_t steps = step_count(t_final, dt);
  FieldDriver driver(model, RandomStream(seed, stream_id(StreamTag::FieldDriver, path_index)));
  EvolutionState tangent = init_evolution(n);
  TrajectoryRecord rec;
  rec.times.push_back(0.0);
  rec.positions.push_back(x0);
  if (cfg.tangent) rec.tangent_ftle.push_back(tangent.log_sv);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd g0, g_pred;
  Eigen::MatrixXd j0, j_pred;
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  for (std::int64_t k = 0; k < steps; ++k) {
    const StepCoefficients& coeffs = driver.next(dt);
    evaluate_increment_jacobian(model, coeffs, x, g0, j0);
    const Eigen::VectorXd f0 = -mu * dt * x + g0;
    Eigen::VectorXd pred = x + f0;
    double last_move = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.corrector_iterations; ++it) {
      evaluate_increment_jacobian(model, coeffs, pred, g_pred, j_pred);
      const Eigen::VectorXd next = x + 0.5 * (f0 - mu * dt * pred + g_pred);
      const double move = (next - pred).norm();
      if (it > 0 && move > last_move + 1e-15 * (1.0 + x.norm())) {
        throw Error(ErrorCode::StepTooLarge, "Heun corrector iteration does not contract");
      }
      last_move = move;
      if (it + 1 < cfg.corrector_iterations) {
        pred = next;
      } else {
        if (cfg.tangent) {
          // Heun step of dU = (-mu dt + J(x; dW)) o U with the predictor U~ = A1 U.
          const Eigen::MatrixXd a1 = (1.0 - mu * dt) * id + j0;
          const Eigen::MatrixXd update = id - 0.5 * mu * dt * (id + a1) + 0.5 * (j0 + j_pred * a1);
          apply_update(tangent, update);
        }
        x = next;
      }
    }
    if (!x.allFinite()) throw Error(ErrorCode::StepTooLarge, "trajectory left the finite range");
    const bool last = k + 1 == steps;
    const bool record = last || (k + 1) % cfg.record_every == 0;
    if (cfg.tangent && (record || tangent.pending_steps >= cfg.refactor_every)) refactor_inplace(tangent);
    if (record) {
      rec.times.push_back(static_cast<double>(k + 1) * dt);
      rec.positions.push_back(x);
      if (cfg.tangent) rec.tangent_ftle.push_back(tangent.log_sv);
    }
  }
  return rec;
}

double tangent_flow_drift_shift(double sigma2, double tau, int n) { return 0.5 * sigma2 * (1.0 + (n + 1.0) * tau); }

AutocorrelationTime estimate_autocorrelation_time(const TrajectoryRecord& traj, const ValidatedKernel& kernel,
                                                  double horizon) {
  const KernelSpec& k = kernel.spec();
  if (k.g.is_dirac()) throw Error(ErrorCode::UnnormalizableKernel, "white-in-time kernel has no finite g(0)");
  const double norm = k.gamma1.value(0.0) * k.g.value(0.0);
  if (!std::isfinite(norm) || norm == 0.0) throw Error(ErrorCode::UnnormalizableKernel, "Gamma1(0) g(0) is zero");
  if (traj.times.empty() || traj.times.back() < horizon * (1.0 - 1e-12)) {
    throw Error(ErrorCode::OutOfRange, "trajectory does not cover the horizon");
  }
  const Eigen::VectorXd& x0 = traj.positions.front();
  auto integrand = [&](std::size_t i) {
    const double rho = 0.5 * (traj.positions[i] - x0).squaredNorm();
    return k.gamma1.value(rho) * k.g.value(traj.times[i] - traj.times.front()) / norm;
  };
  const double tail_start = traj.times.front() + 0.9 * (horizon - traj.times.front());
  double total = 0.0, tail = 0.0;
  double prev = integrand(0);
  for (std::size_t i = 1; i < traj.times.size() && traj.times[i] <= horizon * (1.0 + 1e-12); ++i) {
    const double cur = integrand(i);
    const double piece = 0.5 * (prev + cur) * (traj.times[i] - traj.times[i - 1]);
    total += piece;
    if (traj.times[i - 1] >= tail_start - 1e-12 * horizon) tail += piece;
    prev = cur;
  }
  AutocorrelationTime out;
  out.value = total;
  out.tail_fraction = total != 0.0 ? std::abs(tail / total) : 0.0;
  out.finite = out.tail_fraction <= 0.05;
  return out;
}

}  // namespace ftle
