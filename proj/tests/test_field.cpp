#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ftle/error.hpp"
#include "ftle/field.hpp"
#include "oracles.hpp"

using namespace ftle;

namespace {

StepCoefficients random_coefficients(int m, RandomStream& rng) {
  StepCoefficients c{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (int f = 0; f < m; ++f) {
    c.alpha[f] = rng.normal();
    c.beta[f] = rng.normal();
  }
  return c;
}

Eigen::VectorXd random_point(int n, RandomStream& rng) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.normal();
  return x;
}

// Least-squares fit of the tensor (s^2/M) sum e_i e_j k_k k_l onto the isotropic
// basis {d_ij d_kl, d_ik d_jl + d_il d_jk}, built entry by entry.
std::pair<double, double> isotropic_projection(const FieldModel& model) {
  const int n = model.n;
  const int entries = n * n * n * n;
  Eigen::MatrixXd basis(entries, 2);
  Eigen::VectorXd target(entries);
  int e = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l, ++e) {
          basis(e, 0) = oracle::delta(i, j) * oracle::delta(k, l);
          basis(e, 1) = oracle::delta(i, k) * oracle::delta(j, l) + oracle::delta(i, l) * oracle::delta(j, k);
          double t = 0.0;
          for (int f = 0; f < model.m; ++f) {
            t += model.polarization(i, f) * model.polarization(j, f) * model.wavevectors(k, f) * model.wavevectors(l, f);
          }
          target[e] = model.amplitude * model.amplitude * t / model.m;
        }
  const Eigen::Vector2d ab = basis.colPivHouseholderQr().solve(target);
  return {ab[0], ab[1]};
}

}  // namespace

TEST_SUITE("field") {

TEST_CASE("fraction and tau are inverse maps") {
  for (int n : {2, 3, 5}) {
    CHECK(tau_for_fraction(1.0, n) == doctest::Approx(1.0));
    CHECK(tau_for_fraction(0.0, n) == doctest::Approx(-1.0 / (n + 1.0)));
    double prev = -2.0;
    for (double w = 0.0; w <= 1.0; w += 0.05) {
      const double tau = tau_for_fraction(w, n);
      CHECK(tau > prev);
      prev = tau;
      CHECK(fraction_for_tau(tau, n) == doctest::Approx(w).epsilon(1e-12));
    }
  }
}

TEST_CASE("calibration reproduces sigma2 and tau") {
  for (int n : {2, 3}) {
    for (double tau : {tau_min(n), 0.0, 0.5, 1.0}) {
      const FieldModel m = synthesize_field(n, 1.3, tau, 0.7, 256, {}, 11);
      CAPTURE(n);
      CAPTURE(tau);
      CHECK(m.sigma2_hat == doctest::Approx(1.3));
      CHECK(std::abs(m.tau_hat - tau) < 0.1);
      const auto [a, b] = isotropic_projection(m);
      CHECK(a == doctest::Approx(m.sigma2_hat).epsilon(1e-10));
      CHECK(b / a == doctest::Approx(m.tau_hat).epsilon(1e-10));
    }
  }
}

TEST_CASE("pure longitudinal and pure transverse fields") {
  RandomStream rng(3, 0);
  const FieldModel grad = synthesize_field(3, 1.0, 1.0, 1.0, 64, {}, 2);
  CHECK(grad.longitudinal_count == grad.m);
  CHECK(grad.tau_hat == doctest::Approx(1.0).epsilon(1e-12));
  const FieldModel solenoidal = synthesize_field(3, 1.0, -0.25, 1.0, 64, {}, 2);
  CHECK(solenoidal.longitudinal_count == 0);
  CHECK(solenoidal.tau_hat == doctest::Approx(-0.25).epsilon(1e-12));
  for (int trial = 0; trial < 20; ++trial) {
    const StepCoefficients c = random_coefficients(64, rng);
    const Eigen::VectorXd x = random_point(3, rng);
    Eigen::VectorXd v;
    Eigen::MatrixXd j;
    evaluate_increment_jacobian(grad, c, x, v, j);
    CHECK((j - j.transpose()).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + j.cwiseAbs().maxCoeff()));
    evaluate_increment_jacobian(solenoidal, c, x, v, j);
    CHECK(std::abs(j.trace()) < 1e-10);
  }
}

TEST_CASE("input checks") {
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  CHECK(code([] { synthesize_field(1, 1.0, 0.0, 1.0, 64, {}, 1); }) == ErrorCode::OutOfRange);
  CHECK(code([] { synthesize_field(2, 1.0, 0.0, 1.0, 4, {}, 1); }) == ErrorCode::OutOfRange);
  CHECK(code([] { synthesize_field(2, 1.0, 2.0, 1.0, 64, {}, 1); }) == ErrorCode::OutOfRange);
  // With 8 features the achievable tau values are coarse; some draw misses 0.85.
  bool failed = false;
  for (std::uint64_t seed = 0; seed < 200 && !failed; ++seed) {
    failed = code([&] { synthesize_field(2, 1.0, 0.85, 1.0, 8, {}, seed); }) == ErrorCode::CalibrationFailed;
  }
  CHECK(failed);
}

TEST_CASE("jacobian matches finite differences") {
  const FieldModel m = synthesize_field(3, 1.0, 0.3, 0.8, 32, {}, 5);
  RandomStream rng(4, 0);
  const StepCoefficients c = random_coefficients(32, rng);
  const Eigen::VectorXd x = random_point(3, rng);
  Eigen::VectorXd v;
  Eigen::MatrixXd j;
  evaluate_increment_jacobian(m, c, x, v, j);
  CHECK((v - evaluate_increment(m, c, x)).cwiseAbs().maxCoeff() < 1e-12);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Eigen::VectorXd fd = (evaluate_increment(m, c, xp) - evaluate_increment(m, c, xm)) / (2 * h);
    CHECK((fd - j.col(k)).cwiseAbs().maxCoeff() < 1e-7 * (1.0 + j.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("white increments have the realized spatial covariance") {
  const FieldModel m = synthesize_field(2, 1.0, 0.0, 1.0, 64, {}, 6);
  RandomStream rng(6, 0);
  Eigen::VectorXd x(2), y(2);
  x << 0.2, -0.1;
  y << 0.9, 0.4;
  const double dt = 0.01;
  const int draws = 20000;
  std::vector<std::vector<double>> prod(4);
  for (int d = 0; d < draws; ++d) {
    StepCoefficients c = random_coefficients(64, rng);
    c.alpha *= std::sqrt(dt);
    c.beta *= std::sqrt(dt);
    const Eigen::VectorXd fx = evaluate_increment(m, c, x), fy = evaluate_increment(m, c, y);
    for (int i = 0; i < 2; ++i)
      for (int jj = 0; jj < 2; ++jj) prod[i * 2 + jj].push_back(fx[i] * fy[jj] / dt);
  }
  const Eigen::MatrixXd want = realized_spatial_covariance(m, x - y);
  for (int i = 0; i < 2; ++i)
    for (int jj = 0; jj < 2; ++jj) {
      const auto& p = prod[i * 2 + jj];
      CHECK(std::abs(oracle::mean(p) - want(i, jj)) < 5.0 * std::sqrt(oracle::variance(p) / draws));
    }
}

TEST_CASE("realized covariance approaches the feature-ensemble kernel") {
  const FieldModel m = synthesize_field(2, 1.0, 0.0, 1.0, 4096, {}, 7);
  const ValidatedKernel k = validate_kernel(field_kernel(m), 2);
  CHECK(k.sigma2() == doctest::Approx(m.sigma2_hat).epsilon(1e-12));
  CHECK(k.tau() == doctest::Approx(m.tau_hat).epsilon(1e-12));
  const double scale = eval_spatial_covariance(k, Eigen::VectorXd::Zero(2)).trace();
  for (const auto& r : {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.7, -0.9),
                        Eigen::Vector2d(2.0, 1.0)}) {
    const Eigen::VectorXd rv = r;
    CHECK((realized_spatial_covariance(m, rv) - eval_spatial_covariance(k, rv)).cwiseAbs().maxCoeff() < 0.1 * scale);
  }
}

TEST_CASE("temporal modes of the driver") {
  const int m = 256;
  const double t_c = 1.0, dt = 0.05;
  const FieldModel ou = synthesize_field(2, 1.0, 0.0, 1.0, m, {TemporalMode::OrnsteinUhlenbeck, t_c}, 8);
  FieldDriver driver(ou, RandomStream(8, stream_id(StreamTag::Test, 0)));
  const int steps = 80000;
  std::vector<Eigen::VectorXd> series;
  series.reserve(steps);
  for (int s = 0; s < steps; ++s) series.push_back(driver.next(dt).alpha / dt);
  for (int lag : {10, 20, 40, 60}) {
    double sum = 0.0;
    for (int s = 0; s + lag < steps; ++s) sum += series[s].dot(series[s + lag]);
    const double corr = sum / (static_cast<double>(steps - lag) * m);
    const double want = std::exp(-lag * dt / t_c);
    CAPTURE(lag);
    CHECK(std::abs(corr - want) < 0.1 * want);
  }

  const FieldModel frozen = synthesize_field(2, 1.0, 0.0, 1.0, 16, {TemporalMode::Frozen, 1.0}, 8);
  FieldDriver still(frozen, RandomStream(8, 1));
  const Eigen::VectorXd first = still.next(0.1).alpha;
  for (int s = 0; s < 10; ++s) CHECK((still.next(0.1).alpha - first).cwiseAbs().maxCoeff() == 0.0);

  RandomStream rng(9, 0);
  CHECK_THROWS_AS(field_increment(ou, Eigen::VectorXd::Zero(2), 0.1, rng), Error);
}

TEST_CASE("zero field trajectory contracts deterministically") {
  const FieldModel z = zero_field(3, 16, {});
  const double mu = 0.8, t = 1.0;
  Eigen::VectorXd x0(3);
  x0 << 1.0, -2.0, 0.5;
  TrajectoryConfig cfg;
  const TrajectoryRecord rec = simulate_trajectory(z, mu, x0, t, cfg, 1);
  CHECK((rec.positions.back() - std::exp(-mu * t) * x0).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(rec.tangent_ftle.front().cwiseAbs().maxCoeff() == 0.0);
  CHECK((rec.tangent_ftle.back().array() + mu * t).abs().maxCoeff() < 1e-5);
}

TEST_CASE("trajectories are reproducible and keep the tangent volume") {
  const FieldModel m = synthesize_field(3, 1.0, -0.25, 1.0, 64, {}, 10);
  REQUIRE(m.longitudinal_count == 0);
  TrajectoryConfig cfg;
  cfg.record_every = 40;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
  const double mu = 0.5, t = 2.0;
  const TrajectoryRecord a = simulate_trajectory(m, mu, x0, t, cfg, 3, 4);
  const TrajectoryRecord b = simulate_trajectory(m, mu, x0, t, cfg, 3, 4);
  const TrajectoryRecord c = simulate_trajectory(m, mu, x0, t, cfg, 3, 5);
  CHECK(a.times.size() == 11);
  CHECK((a.tangent_ftle.back() - b.tangent_ftle.back()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.positions.back() - c.positions.back()).norm() > 0.0);
  // Divergence-free field: log det of the tangent map is -n mu t up to discretization.
  CHECK(std::abs(a.tangent_ftle.back().sum() + 3 * mu * t) < 0.02);
  for (std::size_t r = 1; r < a.tangent_ftle.size(); ++r) {
    for (int i = 0; i + 1 < 3; ++i) CHECK(a.tangent_ftle[r][i] >= a.tangent_ftle[r][i + 1]);
  }
}

TEST_CASE("autocorrelation time") {
  const double t_c = 0.5;
  const FieldModel z = zero_field(2, 16, {TemporalMode::Frozen, 1.0});
  TrajectoryConfig cfg;
  cfg.dt = t_c / 100.0;
  cfg.tangent = false;
  const double horizon = 20.0 * t_c;
  const TrajectoryRecord still = simulate_trajectory(z, 0.0, Eigen::VectorXd::Ones(2), horizon, cfg, 1);
  const ScalarKernel g1 = ScalarKernel::squared_exponential(1.0, 1.0);

  const ValidatedKernel expo = validate_kernel({g1, ScalarKernel::zero(), TemporalKernel(ExponentialTemporal{t_c})}, 2);
  const AutocorrelationTime te = estimate_autocorrelation_time(still, expo, horizon);
  CHECK(te.finite);
  CHECK(te.value == doctest::Approx(t_c).epsilon(1e-3));

  const ValidatedKernel flat = validate_kernel({g1, ScalarKernel::zero(), TemporalKernel(ConstantTemporal{1.0})}, 2);
  const AutocorrelationTime tf = estimate_autocorrelation_time(still, flat, horizon);
  CHECK_FALSE(tf.finite);
  CHECK(tf.tail_fraction == doctest::Approx(0.1).epsilon(1e-6));

  const ValidatedKernel dirac = validate_kernel({g1, ScalarKernel::zero(), TemporalKernel{}}, 2);
  try {
    estimate_autocorrelation_time(still, dirac, horizon);
    FAIL("expected UnnormalizableKernel");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnnormalizableKernel);
  }

  // Narrowing g: the integral of a Gaussian of width w divided by its peak is w sqrt(pi/2).
  TrajectoryConfig fine = cfg;
  fine.dt = 1e-3;
  const TrajectoryRecord dense = simulate_trajectory(z, 0.0, Eigen::VectorXd::Ones(2), 2.0, fine, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (double w : {0.3, 0.1, 0.03}) {
    TabulatedTemporal tab{w / 50.0, {}};
    for (int k = 0; k <= 1000; ++k) tab.values.push_back(std::exp(-0.5 * std::pow(k * tab.step / w, 2)) / w);
    const ValidatedKernel narrow = validate_kernel({g1, ScalarKernel::zero(), TemporalKernel(tab)}, 2);
    const double got = estimate_autocorrelation_time(dense, narrow, 2.0).value;
    CAPTURE(w);
    CHECK(got < prev);
    CHECK(got == doctest::Approx(w * std::sqrt(std::numbers::pi / 2.0)).epsilon(0.02));
    prev = got;
  }

  // A moving trajectory decorrelates faster than the temporal kernel alone.
  const FieldModel moving = synthesize_field(2, 1.0, 0.0, 1.0, 64, {TemporalMode::Frozen, 1.0}, 12);
  const TrajectoryRecord drift = simulate_trajectory(moving, 0.0, Eigen::VectorXd::Zero(2), horizon, cfg, 2);
  const ValidatedKernel own = validate_kernel([&] {
    KernelSpec s = field_kernel(moving);
    s.g = TemporalKernel(ExponentialTemporal{t_c});
    return s;
  }(), 2);
  CHECK(estimate_autocorrelation_time(drift, own, horizon).value < t_c);
}

TEST_CASE("drift shift of the tangent flow") {
  CHECK(tangent_flow_drift_shift(1.0, 0.0, 2) == 0.5);
  CHECK(tangent_flow_drift_shift(2.0, -1.0 / 3.0, 2) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(tangent_flow_drift_shift(1.0, 1.0, 3) == doctest::Approx(2.5));
}

}  // TEST_SUITE
