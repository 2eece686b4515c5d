#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "ftle/ensemble.hpp"
#include "ftle/matrix_noise.hpp"
#include "ftle/path.hpp"

namespace ftle {

/// U(t) = pending * left_frame * diag(exp(log_sv)) * right_frame.
///
/// `pending` collects the small step factors since the last refactor; it stays
/// well conditioned because it only spans a few dozen steps. The canonical
/// (pending = I) form is restored by refactor().
struct EvolutionState {
  Eigen::MatrixXd left_frame;
  Eigen::VectorXd log_sv;
  Eigen::MatrixXd right_frame;
  Eigen::MatrixXd pending;
  int pending_steps = 0;
  double t = 0.0;
  /// Steps whose increment had spectral norm above 0.5.
  std::uint64_t large_increment_steps = 0;

  int n() const { return static_cast<int>(log_sv.size()); }
};

enum class FlowScheme {
  /// U <- (I + dB + ((a + b + n c)/2 - mu) dt) U
  ItoEuler,
  /// U <- exp(dB - mu dt) U; keeps the orthogonal case exactly orthogonal.
  Exponential,
};

EvolutionState init_evolution(int n);

/// Drift constant (a + b + n c)/2 - mu of the Ito form.
double ito_drift_constant(const ValidatedParams& p);

/// Multiplies the step factor into `pending`. Throws StepTooLarge if the factor is
/// singular to working precision.
void step_evolution_inplace(EvolutionState& s, const MatrixIncrement& inc, const ValidatedParams& p,
                            FlowScheme scheme = FlowScheme::ItoEuler);

EvolutionState step_evolution(EvolutionState s, const MatrixIncrement& inc, const ValidatedParams& p,
                              FlowScheme scheme = FlowScheme::ItoEuler);

/// Left-multiplies an arbitrary nonsingular factor (used by the tangent flow of
/// the nonlinear field). Does not advance t.
void apply_update(EvolutionState& s, const Eigen::MatrixXd& factor);

void refactor_inplace(EvolutionState& s);
EvolutionState refactor(EvolutionState s);

/// Sorted log singular values of U(t). Refactors a copy if factors are pending.
Eigen::VectorXd ftle(const EvolutionState& s);

/// Dense U(t); only for spreads where that is representable (<= 600).
Eigen::MatrixXd reconstruct(const EvolutionState& s);

/// Eigenvalues exp(2 lambda_i) of S = U U^T, descending, computed from a dense
/// shifted product. Throws Overflow if the spread exceeds 300.
Eigen::VectorXd wishart_eigen_oracle(const EvolutionState& s);

struct MatrixPathConfig {
  double dt = 1e-3;
  int refactor_every = 50;
  /// Record a row every this many steps (the final time is always recorded).
  int record_every = 1;
  FlowScheme scheme = FlowScheme::ItoEuler;
};

/// Default step 1e-3 * min(1, 1/(sigma2 n)).
double default_flow_dt(const ValidatedParams& p);

/// Substream layout: the increment of step k (0-based) is drawn from
/// RandomStream(seed, stream, k).
EvolutionState run_matrix_flow(const ValidatedParams& p, double t_final, const MatrixPathConfig& cfg,
                               std::uint64_t seed, std::uint64_t stream, FtlePath* record = nullptr);

FtlePath simulate_matrix_path(const ValidatedParams& p, double t_final, const MatrixPathConfig& cfg,
                              std::uint64_t seed, std::uint64_t path_index = 0);

FtlePath simulate_matrix_path(const ValidatedParams& p, double t_final, double dt, int refactor_every,
                              std::uint64_t seed);

/// Number of steps of size dt needed to reach t (rounded, at least one).
std::int64_t step_count(double t, double dt);

}  // namespace ftle
