#include "ftle/flow.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "ftle/error.hpp"
#include "ftle/log_svd.hpp"
#include "ftle/random.hpp"

namespace ftle {

EvolutionState init_evolution(int n) {
  if (n < 1) throw Error(ErrorCode::NonPositiveDimension, "n must be >= 1");
  EvolutionState s;
  s.left_frame = Eigen::MatrixXd::Identity(n, n);
  s.log_sv = Eigen::VectorXd::Zero(n);
  s.right_frame = Eigen::MatrixXd::Identity(n, n);
  s.pending = Eigen::MatrixXd::Identity(n, n);
  return s;
}

double ito_drift_constant(const ValidatedParams& p) {
  const NoiseCoefficients k = to_noise_coefficients(p);
  return 0.5 * (k.a + k.b + p.n() * k.c) - p.mu();
}

namespace {

void check_factor(const Eigen::MatrixXd& m, const Eigen::MatrixXd& perturbation) {
  if (!m.allFinite()) throw Error(ErrorCode::StepTooLarge, "non-finite step factor");
  // I + X with |X|_F < 1 is always invertible.
  if (perturbation.norm() < 1.0) return;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw Error(ErrorCode::StepTooLarge, "step factor singular to working precision");
}

}  // namespace

void step_evolution_inplace(EvolutionState& s, const MatrixIncrement& inc, const ValidatedParams& p,
                            FlowScheme scheme) {
  const int n = s.n();
  if (inc.delta_b.rows() != n || inc.delta_b.cols() != n) {
    throw Error(ErrorCode::OutOfRange, "increment dimension does not match state");
  }
  if (inc.delta_b.norm() > 0.5 && inc.delta_b.operatorNorm() > 0.5) ++s.large_increment_steps;
  Eigen::MatrixXd factor;
  if (scheme == FlowScheme::ItoEuler) {
    Eigen::MatrixXd x = inc.delta_b;
    x.diagonal().array() += ito_drift_constant(p) * inc.dt;
    factor = x;
    factor.diagonal().array() += 1.0;
    check_factor(factor, x);
  } else {
    factor = inc.delta_b.exp() * std::exp(-p.mu() * inc.dt);
    if (!factor.allFinite()) throw Error(ErrorCode::StepTooLarge, "non-finite step factor");
  }
  s.pending = factor * s.pending;
  ++s.pending_steps;
  s.t += inc.dt;
}

EvolutionState step_evolution(EvolutionState s, const MatrixIncrement& inc, const ValidatedParams& p,
                              FlowScheme scheme) {
  step_evolution_inplace(s, inc, p, scheme);
  return s;
}

void apply_update(EvolutionState& s, const Eigen::MatrixXd& factor) {
  if (!factor.allFinite()) throw Error(ErrorCode::StepTooLarge, "non-finite update factor");
  s.pending = factor * s.pending;
  ++s.pending_steps;
}

void refactor_inplace(EvolutionState& s) {
  const int n = s.n();
  const LogSvd svd = log_scaled_svd(s.pending * s.left_frame, s.log_sv);
  if (!svd.log_sv.allFinite()) throw Error(ErrorCode::StepTooLarge, "non-finite singular values");
  s.left_frame = svd.u;
  s.log_sv = svd.log_sv;
  // Rounding in V^T R accumulates over many refactors; project back onto O(n).
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(svd.v.transpose() * s.right_frame);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < n; ++k) {
    if (r(k, k) < 0.0) q.col(k) = -q.col(k);
  }
  s.right_frame = q;
  s.pending.setIdentity(n, n);
  s.pending_steps = 0;
}

EvolutionState refactor(EvolutionState s) {
  refactor_inplace(s);
  return s;
}

Eigen::VectorXd ftle(const EvolutionState& s) {
  if (s.pending_steps == 0) return s.log_sv;
  return refactor(s).log_sv;
}

Eigen::MatrixXd reconstruct(const EvolutionState& s) {
  if (s.log_sv.maxCoeff() > 600.0 || s.log_sv.minCoeff() < -600.0) {
    throw Error(ErrorCode::Overflow, "dense U(t) not representable");
  }
  return s.pending * s.left_frame * s.log_sv.array().exp().matrix().asDiagonal() * s.right_frame;
}

Eigen::VectorXd wishart_eigen_oracle(const EvolutionState& s) {
  const EvolutionState c = s.pending_steps == 0 ? s : refactor(s);
  const double top = c.log_sv.maxCoeff();
  if (top - c.log_sv.minCoeff() > 300.0) throw Error(ErrorCode::Overflow, "log_sv spread exceeds 300");
  if (2.0 * top > 700.0) throw Error(ErrorCode::Overflow, "exp(2 lambda_1) overflows");
  const Eigen::VectorXd shifted = (c.log_sv.array() - top).exp().matrix();
  const Eigen::MatrixXd u = c.left_frame * shifted.asDiagonal() * c.right_frame;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(u * u.transpose(), Eigen::EigenvaluesOnly);
  Eigen::VectorXd out = eig.eigenvalues().reverse() * std::exp(2.0 * top);
  return out;
}

double default_flow_dt(const ValidatedParams& p) {
  const double scale = p.sigma2() * p.n();
  return 1e-3 * (scale > 1.0 ? 1.0 / scale : 1.0);
}

std::int64_t step_count(double t, double dt) {
  if (!(dt > 0.0) || !(t >= 0.0)) throw Error(ErrorCode::OutOfRange, "need t >= 0 and dt > 0");
  return std::max<std::int64_t>(1, std::llround(t / dt));
}

EvolutionState run_matrix_flow(const ValidatedParams& p, double t_final, const MatrixPathConfig& cfg,
                               std::uint64_t seed, std::uint64_t stream, FtlePath* record) {
  if (!(t_final > 0.0)) throw Error(ErrorCode::OutOfRange, "t_final must be > 0");
  if (cfg.refactor_every < 1 || cfg.record_every < 1) {
    throw Error(ErrorCode::OutOfRange, "refactor_every and record_every must be >= 1");
  }
  const int n = p.n();
  const std::int64_t steps = step_count(t_final, cfg.dt);
  const SamplerPlan plan = plan_sampler(to_noise_coefficients(p), n);
  EvolutionState s = init_evolution(n);
  MatrixIncrement inc;
  inc.dt = cfg.dt;
  if (record) {
    record->times.push_back(0.0);
    record->exponents.push_back(s.log_sv);
  }
  for (std::int64_t k = 0; k < steps; ++k) {
    RandomStream rng(seed, stream, static_cast<std::uint32_t>(k));
    sample_increment_into(plan, cfg.dt, rng, inc.delta_b);
    step_evolution_inplace(s, inc, p, cfg.scheme);
    const bool last = k + 1 == steps;
    const bool rec = record && (last || (k + 1) % cfg.record_every == 0);
    if (rec || last || s.pending_steps >= cfg.refactor_every) refactor_inplace(s);
    if (rec) {
      s.t = static_cast<double>(k + 1) * cfg.dt;
      record->times.push_back(s.t);
      record->exponents.push_back(s.log_sv);
    }
  }
  s.t = static_cast<double>(steps) * cfg.dt;
  return s;
}

FtlePath simulate_matrix_path(const ValidatedParams& p, double t_final, const MatrixPathConfig& cfg,
                              std::uint64_t seed, std::uint64_t path_index) {
  FtlePath path;
  path.params = p.raw();
  path.seed = seed;
  path.path_index = path_index;
  run_matrix_flow(p, t_final, cfg, seed, stream_id(StreamTag::MatrixRoute, path_index), &path);
  return path;
}

FtlePath simulate_matrix_path(const ValidatedParams& p, double t_final, double dt, int refactor_every,
                              std::uint64_t seed) {
  MatrixPathConfig cfg;
  cfg.dt = dt;
  cfg.refactor_every = refactor_every;
  return simulate_matrix_path(p, t_final, cfg, seed, 0);
}

}  // namespace ftle
