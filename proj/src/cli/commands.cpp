#include "ftle/cli/commands.hpp"

#include <cmath>

#include "ftle/asymptotics.hpp"
#include "ftle/cli/output.hpp"
#include "ftle/error.hpp"
#include "ftle/field.hpp"
#include "ftle/flow.hpp"
#include "ftle/gdbm.hpp"
#include "ftle/parallel.hpp"
#include "ftle/stats.hpp"

namespace ftle::cli {

namespace {

struct Context {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  int threads;
  std::string out;
  Json meta;
};

ValidatedParams ensemble_params(const ExperimentConfig& c) {
  return validate_params({static_cast<int>(c.integer("ensemble.n")), c.number("ensemble.mu"),
                          c.number("ensemble.sigma2"), c.number("ensemble.tau")});
}

int checked_int(const ExperimentConfig& c, const std::string& key, std::int64_t lo) {
  const std::int64_t v = c.integer(key);
  if (v < lo || v > 1'000'000'000) {
    throw Error(ErrorCode::ConfigError, key + " must be in [" + std::to_string(lo) + ", 1e9]");
  }
  return static_cast<int>(v);
}

double positive(const ExperimentConfig& c, const std::string& key) {
  const double v = c.number(key);
  if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, key + " must be > 0");
  return v;
}

FlowScheme parse_scheme(const std::string& s) {
  if (s == "ito-euler") return FlowScheme::ItoEuler;
  if (s == "exponential") return FlowScheme::Exponential;
  throw Error(ErrorCode::ConfigError, "integrator.scheme must be 'ito-euler' or 'exponential'");
}

ParticleNoise parse_noise(const std::string& s) {
  if (s == "independent") return ParticleNoise::Independent;
  if (s == "matrix-consistent") return ParticleNoise::MatrixConsistent;
  throw Error(ErrorCode::ConfigError, "integrator.noise must be 'independent' or 'matrix-consistent'");
}

TemporalSpec parse_temporal(const ExperimentConfig& c) {
  const std::string s = c.text("field.temporal");
  TemporalSpec t;
  t.t_c = c.number("field.t_c");
  if (s == "white") t.mode = TemporalMode::White;
  else if (s == "ou") t.mode = TemporalMode::OrnsteinUhlenbeck;
  else if (s == "frozen") t.mode = TemporalMode::Frozen;
  else throw Error(ErrorCode::ConfigError, "field.temporal must be 'white', 'ou' or 'frozen'");
  return t;
}

MatrixPathConfig matrix_config(const ExperimentConfig& c) {
  MatrixPathConfig m;
  m.dt = positive(c, "integrator.dt");
  m.refactor_every = checked_int(c, "integrator.refactor_every", 1);
  m.record_every = checked_int(c, "integrator.record_every", 1);
  m.scheme = parse_scheme(c.text("integrator.scheme"));
  return m;
}

GdbmConfig gdbm_config(const ExperimentConfig& c) {
  GdbmConfig g;
  g.dt = positive(c, "integrator.dt");
  g.warm_start_t0 = c.number("integrator.warm_start_t0");
  g.max_halvings = checked_int(c, "integrator.max_halvings", 0);
  g.implicit_fallback = c.flag("integrator.implicit_fallback");
  g.record_every = checked_int(c, "integrator.record_every", 1);
  g.noise = parse_noise(c.text("integrator.noise"));
  return g;
}

Json params_json(const EnsembleParams& p) { return {{"n", p.n}, {"mu", p.mu}, {"sigma2", p.sigma2}, {"tau", p.tau}}; }

Json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Long form: one row per (path, time, index).
std::size_t write_paths(CsvWriter& csv, const std::string& route, const std::vector<FtlePath>& paths) {
  for (const auto& p : paths) {
    for (std::size_t r = 0; r < p.times.size(); ++r) {
      for (Eigen::Index i = 0; i < p.exponents[r].size(); ++i) {
        csv.field(route)
            .field(static_cast<unsigned long long>(p.path_index))
            .field(p.times[r])
            .field(static_cast<long long>(i + 1))
            .field(p.exponents[r][i])
            .field(static_cast<long long>(r < p.warm_start_rows ? 1 : 0));
        csv.end_row();
      }
    }
  }
  return csv.non_finite();
}

const std::vector<std::string> kPathColumns = {"route", "path", "time", "index", "lambda", "warm_start"};

Json final_summary(const std::vector<FtlePath>& paths) {
  const Eigen::Index n = paths.front().exponents.back().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  std::vector<double> trace;
  for (const auto& p : paths) {
    mean += p.exponents.back();
    trace.push_back(p.exponents.back().sum());
  }
  mean /= static_cast<double>(paths.size());
  Json s;
  s["paths"] = paths.size();
  s["t_final"] = paths.front().times.back();
  s["mean_final_exponents"] = vector_json(mean);
  s["mean_trace"] = sample_mean(trace);
  if (trace.size() > 1) s["var_trace"] = sample_variance(trace);
  return s;
}

CommandResult finish(const Context& ctx, const std::string& stem, std::vector<std::string> files, Json summary) {
  const std::string sidecar = stem + ".json";
  write_sidecar(join_path(ctx.out, sidecar), ctx.meta, summary, files);
  files.push_back(sidecar);
  return {files, summary};
}

// ---------------------------------------------------------------------------

CommandResult cmd_validate(const Context& ctx) {
  const ValidatedParams p = ensemble_params(ctx.cfg);
  const NoiseCoefficients k = to_noise_coefficients(p);
  Json s;
  s["params"] = params_json(p.raw());
  s["coefficients"] = {{"a", k.a}, {"b", k.b}, {"c", k.c}};
  s["stability"] = to_string(is_stable(p));
  s["lyapunov_spectrum"] = vector_json(lyapunov_spectrum(p).mu_i);
  s["mu_hat"] = p.sigma2() > 0.0 ? Json(p.mu() / (p.sigma2() * p.n())) : Json(nullptr);
  s["critical_mu_hat"] = critical_mu_hat(p.tau());
  s["critical_mu_hat_finite_n"] = finite_n_critical_mu_hat(p.tau(), p.n());
  s["tau_in_model_range"] = tau_in_model_range(p.tau());
  if (p.zero_rate_warning()) s["warning"] = "mu = 0 is accepted for diagnostics only";
  return {{}, s};
}

template <class Sim>
std::vector<FtlePath> run_paths(const Context& ctx, std::size_t count, Sim&& sim) {
  std::vector<FtlePath> paths(count);
  parallel_for(count, ctx.threads, [&](std::size_t i) { paths[i] = sim(i); });
  return paths;
}

CommandResult cmd_simulate_matrix(const Context& ctx) {
  const ValidatedParams p = ensemble_params(ctx.cfg);
  const MatrixPathConfig mc = matrix_config(ctx.cfg);
  const double t = positive(ctx.cfg, "integrator.t_final");
  const auto paths = run_paths(ctx, checked_int(ctx.cfg, "paths.count", 1),
                               [&](std::size_t i) { return simulate_matrix_path(p, t, mc, ctx.seed, i); });
  CsvWriter csv(join_path(ctx.out, "matrix_paths.csv"), kPathColumns);
  Json s = final_summary(paths);
  s["non_finite"] = write_paths(csv, "matrix", paths);
  return finish(ctx, "matrix_paths", {"matrix_paths.csv"}, s);
}

CommandResult cmd_simulate_gdbm(const Context& ctx) {
  const ValidatedParams p = ensemble_params(ctx.cfg);
  const GdbmConfig gc = gdbm_config(ctx.cfg);
  const double t = positive(ctx.cfg, "integrator.t_final");
  const auto paths = run_paths(ctx, checked_int(ctx.cfg, "paths.count", 1),
                               [&](std::size_t i) { return simulate_gdbm(p, t, gc, ctx.seed, i); });
  CsvWriter csv(join_path(ctx.out, "gdbm_paths.csv"), kPathColumns);
  Json s = final_summary(paths);
  s["non_finite"] = write_paths(csv, "gdbm", paths);
  s["asymptotic_spectrum"] = vector_json(lyapunov_spectrum(p).mu_i);
  return finish(ctx, "gdbm_paths", {"gdbm_paths.csv"}, s);
}

CommandResult cmd_simulate_dyson(const Context& ctx) {
  const auto& c = ctx.cfg;
  const WeakNoiseParams w{static_cast<int>(c.integer("ensemble.n")), c.number("ensemble.mu"),
                          c.number("dyson.sigma_t"), c.number("ensemble.tau")};
  validate_weak_noise(w);
  DysonConfig dc;
  dc.dt = positive(c, "integrator.dt");
  dc.t0 = c.number("dyson.t0");
  dc.max_halvings = checked_int(c, "integrator.max_halvings", 0);
  dc.implicit_fallback = c.flag("integrator.implicit_fallback");
  dc.record_every = checked_int(c, "integrator.record_every", 1);
  const double t = positive(c, "integrator.t_final");
  const auto paths = run_paths(ctx, checked_int(c, "paths.count", 1),
                               [&](std::size_t i) { return simulate_dyson(w, t, dc, ctx.seed, i); });
  CsvWriter csv(join_path(ctx.out, "dyson_paths.csv"), kPathColumns);
  Json s = final_summary(paths);
  s["non_finite"] = write_paths(csv, "dyson", paths);
  s["edge_formula"] = weak_noise_edge(w.sigma_t, w.tau, w.mu, w.n, t);
  s["semicircle_edge"] = dyson_spectral_edge(w.sigma_t, w.tau, w.n, t) - w.mu * t;
  return finish(ctx, "dyson_paths", {"dyson_paths.csv"}, s);
}

CommandResult cmd_compare_routes(const Context& ctx) {
  const ValidatedParams p = ensemble_params(ctx.cfg);
  const MatrixPathConfig mc = matrix_config(ctx.cfg);
  GdbmConfig gc = gdbm_config(ctx.cfg);
  const double t = positive(ctx.cfg, "integrator.t_final");
  const std::size_t count = checked_int(ctx.cfg, "paths.count", 1);
  std::vector<Eigen::VectorXd> matrix(count), particle(count);
  parallel_for(count, ctx.threads, [&](std::size_t i) {
    matrix[i] = run_matrix_flow(p, t, mc, ctx.seed, stream_id(StreamTag::MatrixRoute, i)).log_sv;
    particle[i] = run_gdbm(p, t, gc, ctx.seed, i).lambda;
  });
  CsvWriter csv(join_path(ctx.out, "compare_routes.csv"), {"route", "path", "index", "lambda"});
  for (int r = 0; r < 2; ++r) {
    const auto& rows = r == 0 ? matrix : particle;
    for (std::size_t i = 0; i < count; ++i) {
      for (Eigen::Index k = 0; k < rows[i].size(); ++k) {
        csv.field(std::string(r == 0 ? "matrix" : "gdbm"))
            .field(static_cast<unsigned long long>(i))
            .field(static_cast<long long>(k + 1))
            .field(rows[i][k]);
        csv.end_row();
      }
    }
  }
  Json s;
  s["t"] = t;
  s["paths_per_route"] = count;
  Json ks = Json::array();
  for (int k = 0; k < p.n(); ++k) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < count; ++i) {
      a.push_back(matrix[i][k]);
      b.push_back(particle[i][k]);
    }
    ks.push_back(ks_distance(a, b));
  }
  s["ks_by_index"] = ks;
  s["ks_critical_0.05"] = ks_critical_value(count, count, 0.05);
  s["non_finite"] = csv.non_finite();
  return finish(ctx, "compare_routes", {"compare_routes.csv"}, s);
}

CommandResult cmd_phase_scan(const Context& ctx) {
  const auto& c = ctx.cfg;
  const int n = checked_int(c, "phase.n", 1);
  const std::vector<double> taus = c.grid("phase.tau");
  const std::vector<double> mus = c.grid("phase.mu_hat");
  PhaseEstimator est;
  const std::string mode = c.text("phase.estimator");
  if (mode == "formula") {
    est = FormulaEstimator{};
  } else if (mode == "simulate") {
    est = SimulationEstimator{positive(c, "phase.t"), checked_int(c, "phase.paths", 2), positive(c, "phase.dt")};
  } else {
    throw Error(ErrorCode::ConfigError, "phase.estimator must be 'formula' or 'simulate'");
  }
  const PhaseDiagram d = phase_scan(n, taus, mus, est, ctx.seed, ctx.threads);
  CsvWriter csv(join_path(ctx.out, "phase_scan.csv"),
                {"tau", "mu_hat", "mu1_estimate", "mu1_se", "boundary", "boundary_finite_n"});
  Json brackets = Json::array();
  for (std::size_t a = 0; a < taus.size(); ++a) {
    for (std::size_t b = 0; b < mus.size(); ++b) {
      csv.field(taus[a])
          .field(mus[b])
          .field(d.top_exponent(a, b))
          .field(d.top_exponent_se(a, b))
          .field(d.boundary[a])
          .field(d.boundary_finite_n[a]);
      csv.end_row();
    }
    const auto [lo, hi] = sign_change_bracket(d, a);
    brackets.push_back({{"tau", taus[a]},
                        {"sign_change", std::isnan(lo) ? Json(nullptr) : Json({lo, hi})},
                        {"boundary", d.boundary[a]},
                        {"boundary_finite_n", d.boundary_finite_n[a]}});
  }
  Json s;
  s["n"] = n;
  s["estimator"] = mode;
  s["rows"] = brackets;
  s["non_finite"] = csv.non_finite();
  return finish(ctx, "phase_scan", {"phase_scan.csv"}, s);
}

CommandResult cmd_field_check(const Context& ctx) {
  const auto& c = ctx.cfg;
  const int n = checked_int(c, "field.n", 2);
  const FieldModel model = synthesize_field(n, c.number("field.sigma2"), c.number("field.tau"),
                                            positive(c, "field.length_scale"), checked_int(c, "field.features", 8),
                                            parse_temporal(c), ctx.seed);
  const double mu = c.number("field.mu");
  const double t = positive(c, "field.t_final");
  const std::size_t count = checked_int(c, "field.paths", 2);
  TrajectoryConfig tc;
  tc.dt = positive(c, "field.dt");
  tc.record_every = static_cast<int>(step_count(t, tc.dt));

  const ValidatedParams calibrated = validate_params({n, mu, model.sigma2_hat, model.tau_hat});
  const double shift = tangent_flow_drift_shift(model.sigma2_hat, model.tau_hat, n);
  const ValidatedParams shifted = validate_params({n, mu + shift, model.sigma2_hat, model.tau_hat});
  GdbmConfig gc;
  gc.dt = positive(c, "field.gdbm_dt");

  std::vector<Eigen::VectorXd> field(count), gdbm(count), gdbm_shifted(count);
  parallel_for(count, ctx.threads, [&](std::size_t i) {
    field[i] = simulate_trajectory(model, mu, Eigen::VectorXd::Zero(n), t, tc, ctx.seed, i).tangent_ftle.back();
    gdbm[i] = run_gdbm(calibrated, t, gc, ctx.seed, i).lambda;
    gdbm_shifted[i] = run_gdbm(shifted, t, gc, ctx.seed, i).lambda;
  });
  CsvWriter csv(join_path(ctx.out, "field_check.csv"), {"source", "path", "index", "lambda"});
  const std::pair<const char*, const std::vector<Eigen::VectorXd>*> sources[] = {
      {"field", &field}, {"gdbm", &gdbm}, {"gdbm_shifted", &gdbm_shifted}};
  for (const auto& [name, rows] : sources) {
    for (std::size_t i = 0; i < count; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) {
        csv.field(std::string(name))
            .field(static_cast<unsigned long long>(i))
            .field(static_cast<long long>(k + 1))
            .field((*rows)[i][k]);
        csv.end_row();
      }
    }
  }
  auto column = [&](const std::vector<Eigen::VectorXd>& rows, int k) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r[k]);
    return v;
  };
  Json s;
  s["sigma2_hat"] = model.sigma2_hat;
  s["tau_hat"] = model.tau_hat;
  s["longitudinal_fraction"] = model.longitudinal_fraction();
  s["ks_lambda1_vs_gdbm"] = ks_distance(column(field, 0), column(gdbm, 0));
  s["ks_lambda1_vs_shifted_gdbm"] = ks_distance(column(field, 0), column(gdbm_shifted, 0));
  s["drift_shift"] = shift;
  s["non_finite"] = csv.non_finite();
  return finish(ctx, "field_check", {"field_check.csv"}, s);
}

CommandResult cmd_autocorr(const Context& ctx) {
  const auto& c = ctx.cfg;
  const int n = checked_int(c, "field.n", 2);
  const TemporalSpec temporal = parse_temporal(c);
  if (temporal.mode == TemporalMode::White) {
    throw Error(ErrorCode::UnnormalizableKernel, "autocorr needs field.temporal = 'ou' or 'frozen'");
  }
  const FieldModel model = synthesize_field(n, c.number("field.sigma2"), c.number("field.tau"),
                                            positive(c, "field.length_scale"), checked_int(c, "field.features", 8),
                                            temporal, ctx.seed);
  const ValidatedKernel kernel = validate_kernel(field_kernel(model), n);
  FieldModel driven = model;
  driven.amplitude *= c.number("autocorr.drive");
  const double horizon = positive(c, "autocorr.horizon");
  TrajectoryConfig tc;
  tc.dt = positive(c, "autocorr.dt");
  tc.tangent = false;
  const TrajectoryRecord traj =
      simulate_trajectory(driven, c.number("field.mu"), Eigen::VectorXd::Zero(n), horizon, tc, ctx.seed, 0);
  const AutocorrelationTime at = estimate_autocorrelation_time(traj, kernel, horizon);
  CsvWriter csv(join_path(ctx.out, "autocorr.csv"), {"time", "distance", "integrand"});
  const double norm = kernel.spec().gamma1.value(0.0) * kernel.spec().g.value(0.0);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double dist = (traj.positions[i] - traj.positions.front()).norm();
    csv.field(traj.times[i])
        .field(dist)
        .field(kernel.spec().gamma1.value(0.5 * dist * dist) * kernel.spec().g.value(traj.times[i]) / norm);
    csv.end_row();
  }
  Json s;
  s["temporal"] = kernel.spec().g.name();
  s["t_c"] = temporal.t_c;
  s["horizon"] = horizon;
  s["autocorrelation_time"] = at.finite ? Json(at.value) : Json(nullptr);
  s["integral"] = at.value;
  s["finite"] = at.finite;
  s["tail_fraction"] = at.tail_fraction;
  s["divergence_test"] = "heuristic: final tenth of the horizon contributes more than 5% of the integral";
  s["non_finite"] = csv.non_finite();
  return finish(ctx, "autocorr", {"autocorr.csv"}, s);
}

CommandResult cmd_reproduce_fig1(const Context& ctx) {
  const auto& c = ctx.cfg;
  const ValidatedParams p = validate_params({static_cast<int>(c.integer("fig1.n")), c.number("fig1.mu"),
                                             c.number("fig1.sigma2"), c.number("fig1.tau")});
  const std::size_t count = checked_int(c, "fig1.paths", 1);
  GdbmConfig shortc, longc;
  shortc.dt = positive(c, "fig1.short_dt");
  shortc.record_every = checked_int(c, "fig1.short_record_every", 1);
  longc.dt = positive(c, "fig1.long_dt");
  longc.record_every = checked_int(c, "fig1.long_record_every", 1);
  const double t_short = positive(c, "fig1.short_t");
  const double t_long = positive(c, "fig1.long_t");
  // Long paths use path indices offset by 2^32 so the panels are independent.
  const auto short_paths =
      run_paths(ctx, count, [&](std::size_t i) { return simulate_gdbm(p, t_short, shortc, ctx.seed, i); });
  const auto long_paths = run_paths(ctx, count, [&](std::size_t i) {
    return simulate_gdbm(p, t_long, longc, ctx.seed, (std::uint64_t{1} << 32) + i);
  });
  CsvWriter cs(join_path(ctx.out, "fig1_short.csv"), kPathColumns);
  write_paths(cs, "gdbm", short_paths);
  CsvWriter cl(join_path(ctx.out, "fig1_long.csv"), kPathColumns);
  write_paths(cl, "gdbm", long_paths);
  const AsymptoticSpectrum spec = lyapunov_spectrum(p);
  CsvWriter ca(join_path(ctx.out, "fig1_asymptotes.csv"), {"index", "time", "predicted"});
  for (int i = 0; i < p.n(); ++i) {
    for (double t : {0.0, t_long}) {
      ca.field(static_cast<long long>(i + 1)).field(t).field(spec.mu_i[i] * t);
      ca.end_row();
    }
  }
  Json s;
  s["predicted_slopes"] = vector_json(spec.mu_i);
  s["fitted_slopes"] = vector_json(fit_drift(long_paths, 0.5 * t_long, t_long).slope);
  s["fit_window"] = {0.5 * t_long, t_long};
  s["non_finite"] = cs.non_finite() + cl.non_finite() + ca.non_finite();
  return finish(ctx, "fig1", {"fig1_short.csv", "fig1_long.csv", "fig1_asymptotes.csv"}, s);
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"validate",       "simulate-matrix", "simulate-gdbm",
                                                 "simulate-dyson", "compare-routes",  "phase-scan",
                                                 "field-check",    "autocorr",        "reproduce-fig1"};
  return names;
}

CommandResult run_command(const std::string& name, const ExperimentConfig& cfg) {
  const std::int64_t threads = cfg.integer("threads");
  if (threads < 1 || threads > 1024) throw Error(ErrorCode::ConfigError, "threads must be in [1, 1024]");
  Context ctx{cfg, cfg.json()["seed"].get<std::uint64_t>(), static_cast<int>(threads), cfg.text("out"),
              run_metadata(name, cfg)};
  if (name != "validate") ensure_directory(ctx.out);
  if (name == "validate") return cmd_validate(ctx);
  if (name == "simulate-matrix") return cmd_simulate_matrix(ctx);
  if (name == "simulate-gdbm") return cmd_simulate_gdbm(ctx);
  if (name == "simulate-dyson") return cmd_simulate_dyson(ctx);
  if (name == "compare-routes") return cmd_compare_routes(ctx);
  if (name == "phase-scan") return cmd_phase_scan(ctx);
  if (name == "field-check") return cmd_field_check(ctx);
  if (name == "autocorr") return cmd_autocorr(ctx);
  if (name == "reproduce-fig1") return cmd_reproduce_fig1(ctx);
  throw Error(ErrorCode::ConfigError, "unknown subcommand '" + name + "'");
}

}  // namespace ftle::cli
