#include "ftle/gdbm.hpp"

#include <cmath>
#include <sstream>

#include "ftle/error.hpp"
#include "ftle/flow.hpp"
#include "ftle/parallel.hpp"

namespace ftle {

namespace {

constexpr double kMinGap = 1e-12;
// Substream of the exact Dyson start; step substreams count up from the start step.
constexpr std::uint32_t kWarmStartSub = 0xFFFFFFFFu;

bool strictly_ordered(const Eigen::VectorXd& x, bool strict) {
  if (!x.allFinite()) return false;
  if (!strict) return true;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    if (!(x[i] - x[i + 1] > kMinGap)) return false;
  }
  return true;
}

Eigen::VectorXd noise_displacement(const ParticleDynamics& d, const Eigen::VectorXd& dw) {
  if (d.noise == ParticleNoise::Independent) return d.noise_scale * dw;
  const double mean = dw.mean();
  const double common = d.diag_trace * std::sqrt(static_cast<double>(d.n)) * mean;
  return (d.diag_iso * (dw.array() - mean) + common).matrix();
}

// log sinh(g) for g > 0 without overflow or cancellation.
double log_sinh(double g) {
  if (g < 1e-4) return std::log(g) + g * g / 6.0;
  if (g > 20.0) return g - std::log(2.0);
  return std::log(std::sinh(g));
}

// Interaction energy E = -kappa sum_{i<j} phi(x_i - x_j), phi = log sinh or log.
// The drift is -grad E and E is convex on the ordered chamber with a barrier at
// its walls, so the drift-implicit step x = y + dt drift_int(x) is the unique
// minimiser of |x - y|^2/2 + dt E(x), which is always strictly ordered.
double interaction_energy(const Eigen::VectorXd& x, const ParticleDynamics& d) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = i + 1; j < x.size(); ++j) {
      const double g = x[i] - x[j];
      e -= d.interaction == Interaction::Coth ? log_sinh(g) : std::log(g);
    }
  return d.kappa * e;
}

bool implicit_step(Eigen::VectorXd& lambda, const ParticleDynamics& d, double dt, const Eigen::VectorXd& noise) {
  const Eigen::Index n = lambda.size();
  const Eigen::VectorXd y = (lambda.array() - d.mu * dt).matrix() + noise;
  auto objective = [&](const Eigen::VectorXd& x) { return 0.5 * (x - y).squaredNorm() + dt * interaction_energy(x, d); };
  Eigen::VectorXd x = lambda;  // feasible start
  double fx = objective(x);
  // Damped Newton until the decrement reaches the rounding level of the objective,
  // where Armijo can no longer see progress; then a few plain Newton steps.
  int polish = 0;
  for (int iter = 0; iter < 200 && polish < 3; ++iter) {
    Eigen::VectorXd grad = x - y;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double g = x[i] - x[j];
        const double force = d.interaction == Interaction::Coth ? stable_coth(g) : 1.0 / g;
        const double s = d.interaction == Interaction::Coth ? std::sinh(g) : g;
        const double curv = dt * d.kappa / (s * s);
        grad[i] -= dt * d.kappa * force;
        grad[j] += dt * d.kappa * force;
        hess(i, i) += curv;
        hess(j, j) += curv;
        hess(i, j) -= curv;
        hess(j, i) -= curv;
      }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    const double decrement = grad.dot(step);
    if (!std::isfinite(decrement)) return false;
    if (polish > 0 || decrement < 1e-12 * (1.0 + std::abs(fx))) ++polish;
    double a = 1.0;
    for (;; a *= 0.5) {
      if (a < 1e-30) return false;
      const Eigen::VectorXd trial = x - a * step;
      if (!strictly_ordered(trial, true)) continue;
      const double ft = objective(trial);
      if (polish > 0 || ft <= fx - 0.25 * a * decrement) {
        x = trial;
        fx = ft;
        break;
      }
    }
  }
  if (polish == 0) return false;
  lambda = std::move(x);
  return true;
}

// Advances by dt along the Brownian increment dw (in units of sqrt(time)).
void advance(Eigen::VectorXd& lambda, const ParticleDynamics& d, double dt, const Eigen::VectorXd& dw,
             int depth, int max_depth, bool implicit_fallback, RandomStream& rng, int& halvings) {
  const bool strict = d.kappa != 0.0;
  Eigen::VectorXd proposal = lambda + particle_drift(lambda, d) * dt + noise_displacement(d, dw);
  if (strictly_ordered(proposal, strict)) {
    lambda = std::move(proposal);
    return;
  }
  if (depth >= max_depth) {
    if (implicit_fallback && strict && implicit_step(lambda, d, dt, noise_displacement(d, dw))) return;
    std::ostringstream msg;
    msg << "ordering still violated after " << max_depth << " halvings (dt = " << dt << ")";
    throw Error(ErrorCode::OrderingUnrecoverable, msg.str());
  }
  ++halvings;
  // W(dt/2) given W(dt) = dw is N(dw/2, dt/4).
  const double half_sd = 0.5 * std::sqrt(dt);
  Eigen::VectorXd first(dw.size());
  for (Eigen::Index i = 0; i < dw.size(); ++i) first[i] = 0.5 * dw[i] + half_sd * rng.normal();
  const Eigen::VectorXd second = dw - first;
  advance(lambda, d, 0.5 * dt, first, depth + 1, max_depth, implicit_fallback, rng, halvings);
  advance(lambda, d, 0.5 * dt, second, depth + 1, max_depth, implicit_fallback, rng, halvings);
}

std::uint64_t particle_stream(std::uint64_t path_index) { return stream_id(StreamTag::ParticleRoute, path_index); }
std::uint64_t dyson_stream(std::uint64_t path_index) { return stream_id(StreamTag::Dyson, path_index); }

// Steps k in [first, last) of a particle run, step k drawing from substream k.
void run_steps(ParticleState& s, const ParticleDynamics& d, double dt, std::int64_t first, std::int64_t last,
               std::uint64_t seed, std::uint64_t stream, StepControl control, std::uint64_t* halvings,
               FtlePath* record, int record_every) {
  StepReport report;
  for (std::int64_t k = first; k < last; ++k) {
    RandomStream rng(seed, stream, static_cast<std::uint32_t>(k));
    step_particles(s, d, dt, rng, control, &report);
    s.t = static_cast<double>(k + 1) * dt;
    if (record && ((k + 1) % record_every == 0 || k + 1 == last)) {
      record->times.push_back(s.t);
      record->exponents.push_back(s.lambda);
    }
  }
  if (halvings) *halvings += static_cast<std::uint64_t>(report.halvings);
}

}  // namespace

double stable_coth(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-4) return 1.0 / x + x / 3.0;
  if (ax > 20.0) return x > 0.0 ? 1.0 : -1.0;
  return 1.0 + 2.0 / std::expm1(2.0 * x);
}

ParticleDynamics gdbm_dynamics(const ValidatedParams& p, ParticleNoise noise) {
  const NoiseCoefficients k = to_noise_coefficients(p);
  ParticleDynamics d;
  d.n = p.n();
  d.mu = p.mu();
  d.kappa = 0.5 * (k.a + k.c);
  d.interaction = Interaction::Coth;
  d.noise = noise;
  d.noise_scale = std::sqrt(std::max(0.0, k.a + k.b + k.c));
  d.diag_iso = std::sqrt(std::max(0.0, k.a + k.c));
  d.diag_trace = std::sqrt(std::max(0.0, (k.a + k.c + p.n() * k.b) / p.n()));
  return d;
}

void validate_weak_noise(const WeakNoiseParams& w) {
  validate_params({w.n, w.mu, w.sigma_t * w.sigma_t, w.tau});
  if (!(w.sigma_t >= 0.0)) throw Error(ErrorCode::NegativeVariance, "sigma_t must be >= 0");
}

ParticleDynamics dyson_dynamics(const WeakNoiseParams& w) {
  validate_weak_noise(w);
  const double s2 = w.sigma_t * w.sigma_t;
  ParticleDynamics d;
  d.n = w.n;
  d.mu = w.mu;
  d.kappa = 0.5 * (1.0 + w.tau) * s2;
  d.interaction = Interaction::Inverse;
  d.noise_scale = std::sqrt((1.0 + 2.0 * w.tau) * s2);
  return d;
}

Eigen::VectorXd particle_drift(const Eigen::VectorXd& lambda, const ParticleDynamics& d) {
  const Eigen::Index n = lambda.size();
  Eigen::VectorXd drift = Eigen::VectorXd::Constant(n, -d.mu);
  if (d.kappa == 0.0) return drift;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double gap = lambda[i] - lambda[j];
      if (!(std::abs(gap) >= kMinGap)) {
        std::ostringstream msg;
        msg << "exponents " << i + 1 << " and " << j + 1 << " coincide (gap " << gap << ")";
        throw Error(ErrorCode::DegenerateConfiguration, msg.str());
      }
      const double v = d.kappa * (d.interaction == Interaction::Coth ? stable_coth(gap) : 1.0 / gap);
      drift[i] += v;
      drift[j] -= v;
    }
  }
  return drift;
}

Eigen::VectorXd gdbm_drift(const Eigen::VectorXd& lambda, const ValidatedParams& p) {
  return particle_drift(lambda, gdbm_dynamics(p));
}

void step_particles(ParticleState& s, const ParticleDynamics& d, double dt, RandomStream& rng, StepControl control,
                    StepReport* report, Eigen::VectorXd* noise_out) {
  if (!(dt > 0.0)) throw Error(ErrorCode::OutOfRange, "dt must be > 0");
  const double h = std::sqrt(dt);
  Eigen::VectorXd dw(d.n);
  for (int i = 0; i < d.n; ++i) dw[i] = h * rng.normal();
  int halvings = 0;
  advance(s.lambda, d, dt, dw, 0, control.max_halvings, control.implicit_fallback, rng, halvings);
  s.t += dt;
  if (report) report->halvings += halvings;
  if (noise_out) *noise_out = noise_displacement(d, dw);
}

ParticleState step_gdbm(ParticleState s, const ValidatedParams& p, double dt, RandomStream& rng, int max_halvings) {
  step_particles(s, gdbm_dynamics(p), dt, rng, {max_halvings});
  return s;
}

ParticleState step_dyson(ParticleState s, const WeakNoiseParams& w, double dt, RandomStream& rng,
                         int max_halvings) {
  step_particles(s, dyson_dynamics(w), dt, rng, {max_halvings});
  return s;
}

ParticleState warm_start(const ValidatedParams& p, double t0, std::uint64_t seed, std::uint64_t path_index,
                         double dt, FtlePath* record, int record_every) {
  if (!(t0 > 0.0)) throw Error(ErrorCode::OutOfRange, "warm start needs t0 > 0");
  MatrixPathConfig cfg;
  cfg.dt = dt;
  cfg.record_every = record_every;
  const EvolutionState s = run_matrix_flow(p, t0, cfg, seed, particle_stream(path_index), record);
  return {s.log_sv, s.t};
}

ParticleState run_gdbm(const ValidatedParams& p, double t_final, const GdbmConfig& cfg, std::uint64_t seed,
                       std::uint64_t path_index, std::uint64_t* halvings) {
  const double t0 = cfg.resolved_t0();
  if (!(t_final > t0)) throw Error(ErrorCode::OutOfRange, "t_final must exceed the warm-start time");
  const std::int64_t total = step_count(t_final, cfg.dt);
  ParticleState s;
  std::int64_t first = 0;
  if (t0 > 0.0) {
    s = warm_start(p, t0, seed, path_index, cfg.dt);
    first = step_count(t0, cfg.dt);
  } else {
    s.lambda = Eigen::VectorXd::Zero(p.n());
  }
  run_steps(s, gdbm_dynamics(p, cfg.noise), cfg.dt, first, total, seed, particle_stream(path_index),
            cfg.control(), halvings, nullptr, 1);
  return s;
}

FtlePath simulate_gdbm(const ValidatedParams& p, double t_final, const GdbmConfig& cfg, std::uint64_t seed,
                       std::uint64_t path_index) {
  const double t0 = cfg.resolved_t0();
  if (!(t_final > t0)) throw Error(ErrorCode::OutOfRange, "t_final must exceed the warm-start time");
  if (cfg.record_every < 1) throw Error(ErrorCode::OutOfRange, "record_every must be >= 1");
  FtlePath path;
  path.params = p.raw();
  path.seed = seed;
  path.path_index = path_index;
  ParticleState s;
  std::int64_t first = 0;
  if (t0 > 0.0) {
    s = warm_start(p, t0, seed, path_index, cfg.dt, &path, cfg.record_every);
    first = step_count(t0, cfg.dt);
  } else {
    s.lambda = Eigen::VectorXd::Zero(p.n());
    path.times.push_back(0.0);
    path.exponents.push_back(s.lambda);
  }
  path.warm_start_rows = path.times.size();
  run_steps(s, gdbm_dynamics(p, cfg.noise), cfg.dt, first, step_count(t_final, cfg.dt), seed,
            particle_stream(path_index), cfg.control(), nullptr, &path, cfg.record_every);
  return path;
}

Eigen::VectorXd dyson_exact_sample(const WeakNoiseParams& w, double t0, RandomStream& rng) {
  const ParticleDynamics d = dyson_dynamics(w);
  const int n = w.n;
  if (!(t0 > 0.0)) throw Error(ErrorCode::OutOfRange, "t0 must be > 0");
  if (d.noise_scale == 0.0) return Eigen::VectorXd::Constant(n, -w.mu * t0);
  const double beta = 2.0 * d.kappa / (d.noise_scale * d.noise_scale);
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max(0, n - 1));
  for (int k = 0; k < n; ++k) diag[k] = rng.normal();
  for (int k = 0; k + 1 < n; ++k) sub[k] = rng.chi(beta * (n - 1 - k)) / std::sqrt(2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = eig.eigenvalues().reverse();
  return (d.noise_scale * std::sqrt(t0) * ev.array() - w.mu * t0).matrix();
}

FtlePath simulate_dyson(const WeakNoiseParams& w, double t_final, const DysonConfig& cfg, std::uint64_t seed,
                        std::uint64_t path_index) {
  const ParticleDynamics d = dyson_dynamics(w);
  const double t0 = cfg.resolved_t0();
  if (!(t_final > t0)) throw Error(ErrorCode::OutOfRange, "t_final must exceed t0");
  FtlePath path;
  path.params = {w.n, w.mu, w.sigma_t * w.sigma_t, w.tau};
  path.seed = seed;
  path.path_index = path_index;
  path.times.push_back(0.0);
  path.exponents.push_back(Eigen::VectorXd::Zero(w.n));
  RandomStream start(seed, dyson_stream(path_index), kWarmStartSub);
  const std::int64_t first = step_count(t0, cfg.dt);
  ParticleState s{dyson_exact_sample(w, static_cast<double>(first) * cfg.dt, start),
                  static_cast<double>(first) * cfg.dt};
  path.times.push_back(s.t);
  path.exponents.push_back(s.lambda);
  path.warm_start_rows = path.times.size();
  run_steps(s, d, cfg.dt, first, step_count(t_final, cfg.dt), seed, dyson_stream(path_index),
            cfg.control(), nullptr, &path, cfg.record_every);
  return path;
}

WeakNoisePair simulate_weak_noise_pair(const WeakNoiseParams& w, double eps, double t_final, const DysonConfig& cfg,
                                       std::uint64_t seed, std::uint64_t path_index) {
  if (!(eps > 0.0)) throw Error(ErrorCode::OutOfRange, "eps must be > 0");
  const ParticleDynamics dyson = dyson_dynamics(w);
  const ValidatedParams gp = validate_params({w.n, eps * w.mu, eps * eps * w.sigma_t * w.sigma_t, w.tau});
  const ParticleDynamics gdbm = gdbm_dynamics(gp);
  const std::int64_t first = step_count(cfg.resolved_t0(), cfg.dt);
  const std::int64_t last = step_count(t_final, cfg.dt);
  if (last <= first) throw Error(ErrorCode::OutOfRange, "t_final must exceed t0");
  RandomStream start(seed, dyson_stream(path_index), kWarmStartSub);
  ParticleState a{dyson_exact_sample(w, static_cast<double>(first) * cfg.dt, start), 0.0};
  ParticleState b{eps * a.lambda, 0.0};
  const std::uint64_t stream = dyson_stream(path_index);
  for (std::int64_t k = first; k < last; ++k) {
    RandomStream ra(seed, stream, static_cast<std::uint32_t>(k));
    RandomStream rb = ra;
    step_particles(a, dyson, cfg.dt, ra, cfg.control());
    step_particles(b, gdbm, cfg.dt, rb, cfg.control());
  }
  return {a.lambda, b.lambda / eps};
}

double generator_apply(const Polynomial& phi, const Eigen::VectorXd& lambda, const ValidatedParams& p) {
  const NoiseCoefficients k = to_noise_coefficients(p);
  const Eigen::VectorXd drift = gdbm_drift(lambda, p);
  return drift.dot(phi.gradient(lambda)) + 0.5 * (k.a + k.b + k.c) * phi.hessian_diagonal(lambda).sum();
}

std::vector<GeneratorCheckRow> generator_check(const ValidatedParams& p, const std::vector<Polynomial>& basis,
                                               const GeneratorCheckConfig& cfg, std::uint64_t seed) {
  if (cfg.paths < 2) throw Error(ErrorCode::TooFewSamples, "generator check needs at least 2 paths");
  if (!(cfg.h > 0.0) || cfg.substeps < 1) throw Error(ErrorCode::OutOfRange, "need h > 0 and substeps >= 1");
  const std::size_t m = basis.size();
  const auto paths = static_cast<std::size_t>(cfg.paths);
  // Per path: m control-variated differences followed by m generator values.
  std::vector<double> samples(paths * 2 * m);
  const ParticleDynamics dyn = gdbm_dynamics(p, cfg.gdbm.noise);
  const double sub_dt = cfg.h / cfg.substeps;
  const std::int64_t base = step_count(cfg.t, cfg.gdbm.dt);

  parallel_for(paths, cfg.threads, [&](std::size_t path) {
    ParticleState s = run_gdbm(p, cfg.t, cfg.gdbm, seed, path);
    const Eigen::VectorXd start = s.lambda;
    Eigen::VectorXd noise_total = Eigen::VectorXd::Zero(p.n());
    Eigen::VectorXd noise;
    for (int k = 0; k < cfg.substeps; ++k) {
      RandomStream rng(seed, particle_stream(path), static_cast<std::uint32_t>(base + k));
      step_particles(s, dyn, sub_dt, rng, cfg.gdbm.control(), nullptr, &noise);
      noise_total += noise;
    }
    double* out = &samples[path * 2 * m];
    for (std::size_t b = 0; b < m; ++b) {
      const double diff = basis[b].value(s.lambda) - basis[b].value(start);
      out[b] = diff - basis[b].gradient(start).dot(noise_total);
      out[m + b] = generator_apply(basis[b], start, p);
    }
  });

  std::vector<GeneratorCheckRow> rows(m);
  const double np = static_cast<double>(paths);
  for (std::size_t b = 0; b < m; ++b) {
    double sum = 0.0, sum2 = 0.0, gen = 0.0;
    for (std::size_t path = 0; path < paths; ++path) {
      const double d = samples[path * 2 * m + b];
      sum += d;
      sum2 += d * d;
      gen += samples[path * 2 * m + m + b];
    }
    const double mean = sum / np;
    const double var = std::max(0.0, (sum2 - np * mean * mean) / (np - 1.0));
    GeneratorCheckRow& r = rows[b];
    r.label = basis[b].label();
    r.fd_rate = mean / cfg.h;
    r.fd_rate_se = std::sqrt(var / np) / cfg.h;
    r.generator_mean = gen / np;
    r.relative_error = std::abs(r.fd_rate - r.generator_mean) / std::abs(r.generator_mean);
  }
  return rows;
}

}  // namespace ftle
