#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ftle/ensemble.hpp"
#include "ftle/path.hpp"
#include "ftle/polynomial.hpp"
#include "ftle/random.hpp"

namespace ftle {

/// Exponents sorted strictly descending.
struct ParticleState {
  Eigen::VectorXd lambda;
  double t = 0.0;
};

/// How the n driving noises of the particle system are correlated.
enum class ParticleNoise {
  /// Independent, each with variance (a + b + c) per unit time. A neighbouring gap
  /// then behaves like a Bessel process of dimension 1 + (1 + tau)/(1 + 2 tau),
  /// which is below 2 for tau > 0: gaps genuinely reach zero, and the stepper
  /// keeps them ordered only through its implicit fallback (see StepControl).
  Independent,
  /// Covariance (a + c) I + b J per unit time: the diagonal law of a conjugated
  /// matrix increment. Matches the matrix route for every tau; coincides with
  /// Independent at tau = 0.
  MatrixConsistent,
};

/// Step-size control of the particle integrator. A proposal that breaks the
/// ordering is refined by Brownian-bridge halving up to max_halvings levels. If
/// the deepest level still fails and implicit_fallback is set, that sub-step is
/// taken drift-implicitly, which is ordered by construction; otherwise the step
/// throws OrderingUnrecoverable.
struct StepControl {
  int max_halvings = 30;
  bool implicit_fallback = true;
};

struct GdbmConfig {
  double dt = 1e-3;
  /// Matrix-route bootstrap duration; negative selects 100 * dt.
  double warm_start_t0 = -1.0;
  int max_halvings = 30;
  bool implicit_fallback = true;
  int record_every = 1;
  ParticleNoise noise = ParticleNoise::Independent;

  double resolved_t0() const { return warm_start_t0 < 0.0 ? 100.0 * dt : warm_start_t0; }
  StepControl control() const { return {max_halvings, implicit_fallback}; }
};

enum class Interaction { Coth, Inverse };

/// Coefficients of d lambda_i = noise - mu dt + kappa sum_{j != i} k(lambda_i - lambda_j) dt.
struct ParticleDynamics {
  int n = 1;
  double mu = 0.0;
  double kappa = 0.0;
  Interaction interaction = Interaction::Coth;
  ParticleNoise noise = ParticleNoise::Independent;
  /// Independent: per-coordinate noise scale.
  double noise_scale = 0.0;
  /// MatrixConsistent: weights of the centred and the common component.
  double diag_iso = 0.0;
  double diag_trace = 0.0;
};

ParticleDynamics gdbm_dynamics(const ValidatedParams& p, ParticleNoise noise = ParticleNoise::Independent);

/// Parameters of the ordinary Dyson process in natural weak-noise units.
struct WeakNoiseParams {
  int n = 1;
  double mu = 0.0;
  double sigma_t = 1.0;
  double tau = 0.0;
};

/// Throws like validate_params.
void validate_weak_noise(const WeakNoiseParams& w);
ParticleDynamics dyson_dynamics(const WeakNoiseParams& w);

/// coth via expm1; series 1/x + x/3 below 1e-4, +-1 beyond |x| = 20.
double stable_coth(double x);

Eigen::VectorXd particle_drift(const Eigen::VectorXd& lambda, const ParticleDynamics& d);

/// -mu + ((1 + tau) sigma2 / 2) sum_{j != i} coth(lambda_i - lambda_j).
/// Throws DegenerateConfiguration if the minimum gap is below 1e-12.
Eigen::VectorXd gdbm_drift(const Eigen::VectorXd& lambda, const ValidatedParams& p);

struct StepReport {
  int halvings = 0;
};

/// One Euler-Maruyama step from `rng` (n normals, plus n per refinement). A
/// proposal that breaks the ordering is replaced by two half steps along a
/// Brownian-bridge refinement of the same increment, as `control` allows. The
/// total noise displacement is written to `noise_out` if given.
void step_particles(ParticleState& s, const ParticleDynamics& d, double dt, RandomStream& rng,
                    StepControl control, StepReport* report = nullptr, Eigen::VectorXd* noise_out = nullptr);

ParticleState step_gdbm(ParticleState s, const ValidatedParams& p, double dt, RandomStream& rng,
                        int max_halvings = 30);

ParticleState step_dyson(ParticleState s, const WeakNoiseParams& w, double dt, RandomStream& rng,
                         int max_halvings = 30);

/// Matrix route from the identity over [0, t0] with steps of `dt`, drawn from
/// RandomStream(seed, stream_id(ParticleRoute, path_index), k).
ParticleState warm_start(const ValidatedParams& p, double t0, std::uint64_t seed, std::uint64_t path_index = 0,
                         double dt = 1e-3, FtlePath* record = nullptr, int record_every = 1);

/// Warm start followed by particle steps on the same stream (step k continues the
/// warm start's substream numbering).
FtlePath simulate_gdbm(const ValidatedParams& p, double t_final, const GdbmConfig& cfg, std::uint64_t seed,
                       std::uint64_t path_index = 0);

/// Final state only, without recording. `halvings` accumulates refinements.
ParticleState run_gdbm(const ValidatedParams& p, double t_final, const GdbmConfig& cfg, std::uint64_t seed,
                       std::uint64_t path_index, std::uint64_t* halvings = nullptr);

struct DysonConfig {
  double dt = 1e-3;
  /// Exact start time; negative selects 100 * dt.
  double t0 = -1.0;
  int max_halvings = 30;
  bool implicit_fallback = true;
  int record_every = 1;

  double resolved_t0() const { return t0 < 0.0 ? 100.0 * dt : t0; }
  StepControl control() const { return {max_halvings, implicit_fallback}; }
};

/// Exact sample of the Dyson process at time t0 > 0 started from the origin:
/// s sqrt(t0) * eig(H) - mu t0 with H the Dumitriu-Edelman beta-Hermite
/// tridiagonal matrix, beta = 2 kappa / s^2.
Eigen::VectorXd dyson_exact_sample(const WeakNoiseParams& w, double t0, RandomStream& rng);

FtlePath simulate_dyson(const WeakNoiseParams& w, double t_final, const DysonConfig& cfg, std::uint64_t seed,
                        std::uint64_t path_index = 0);

/// Coupled weak-noise comparison. Both runs share the Dyson warm start at t0 and
/// every driving normal; the gdbm run uses sigma = eps sigma_t, mu = eps mu and
/// is reported as lambda / eps.
struct WeakNoisePair {
  Eigen::VectorXd dyson;
  Eigen::VectorXd rescaled_gdbm;
};
WeakNoisePair simulate_weak_noise_pair(const WeakNoiseParams& w, double eps, double t_final, const DysonConfig& cfg,
                                       std::uint64_t seed, std::uint64_t path_index);

/// sum_i [(-mu + ((a + c)/2) sum_{j != i} coth(lambda_i - lambda_j)) d_i phi + ((a + b + c)/2) d_ii phi].
double generator_apply(const Polynomial& phi, const Eigen::VectorXd& lambda, const ValidatedParams& p);

struct GeneratorCheckRow {
  std::string label;
  double fd_rate = 0.0;
  double fd_rate_se = 0.0;
  double generator_mean = 0.0;
  double relative_error = 0.0;
};

struct GeneratorCheckConfig {
  double t = 1.0;
  double h = 1e-3;
  int substeps = 10;
  std::int64_t paths = 100000;
  GdbmConfig gdbm;
  int threads = 1;
};

/// Finite-difference rate (E phi(t + h) - E phi(t)) / h against E[L* phi(t)].
/// The martingale part grad phi(lambda(t)) . (noise over [t, t + h]) has zero mean
/// and is subtracted from each path's difference as a control variate.
std::vector<GeneratorCheckRow> generator_check(const ValidatedParams& p, const std::vector<Polynomial>& basis,
                                               const GeneratorCheckConfig& cfg, std::uint64_t seed);

}  // namespace ftle
