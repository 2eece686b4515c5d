#include <doctest.h>

#include <cmath>

#include "ftle/error.hpp"
#include "ftle/random.hpp"
#include "ftle/stats.hpp"
#include "oracles.hpp"

using namespace ftle;

namespace {

std::vector<double> normals(std::size_t count, double mean, double sd, std::uint64_t index) {
  RandomStream rng(77, stream_id(StreamTag::Test, index));
  std::vector<double> v(count);
  for (double& x : v) x = mean + sd * rng.normal();
  return v;
}

FtlePath linear_path(double t_end, double dt, const Eigen::VectorXd& slope, const Eigen::VectorXd& offset) {
  FtlePath p;
  for (int k = 0; k * dt <= t_end + 1e-12; ++k) {
    p.times.push_back(k * dt);
    p.exponents.push_back(offset + k * dt * slope);
  }
  return p;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ftle::Error");
  return ErrorCode::ConfigError;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("ks distance matches brute force, ties included") {
  RandomStream rng(1, 0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(1 + trial % 17), b(1 + (trial * 7) % 23);
    // Coarse values force ties within and across samples.
    for (double& x : a) x = std::floor(rng.uniform() * 6.0);
    for (double& x : b) x = std::floor(rng.uniform() * 6.0);
    CHECK(ks_distance(a, b) == doctest::Approx(oracle::ks_bruteforce(a, b)).epsilon(1e-14));
  }
  CHECK(ks_distance({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(ks_distance({0.0}, {1.0}) == 1.0);
  CHECK(code_of([] { ks_distance({}, {1.0}); }) == ErrorCode::EmptySample);
  CHECK(code_of([] { ks_distance({std::nan("")}, {1.0}); }) == ErrorCode::OutOfRange);
}

TEST_CASE("ks null behaviour") {
  const double d = ks_distance(normals(10000, 0.0, 1.0, 0), normals(10000, 0.0, 1.0, 1));
  CHECK(d < 0.03);
  CHECK(d < ks_critical_value(10000, 10000, 0.01));
  CHECK(ks_distance(normals(10000, 0.0, 1.0, 0), normals(10000, 0.2, 1.0, 1)) > ks_critical_value(10000, 10000, 0.001));
}

TEST_CASE("ks critical value and p-value") {
  // c(0.05) = 1.3581 for large samples.
  CHECK(ks_critical_value(1000, 1000, 0.05) == doctest::Approx(1.3581 * std::sqrt(2.0 / 1000)).epsilon(1e-4));
  for (double d : {0.02, 0.05, 0.1}) {
    const double ne = 400.0 * 600.0 / 1000.0;
    const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    CHECK(ks_p_value(d, 400, 600) == doctest::Approx(std::min(1.0, oracle::kolmogorov_q(lam))).epsilon(1e-10));
  }
  CHECK(ks_p_value(0.0, 10, 10) == 1.0);
  // The p-value at the critical distance sits near alpha for large samples.
  CHECK(ks_p_value(ks_critical_value(5000, 5000, 0.05), 5000, 5000) == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("drift fit") {
  Eigen::VectorXd slope(3), offset(3);
  slope << 0.5, -1.0, -2.5;
  offset << 3.0, 0.0, -1.0;
  const FtlePath p = linear_path(10.0, 0.1, slope, offset);
  const DriftFit f = fit_drift(p, 2.0, 8.0);
  CHECK((f.slope - slope).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(f.stderr_.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(f.points == 61);
  CHECK(code_of([&] { fit_drift(p, 2.0, 2.5); }) == ErrorCode::WindowTooShort);

  // Across paths the spread of the individual slopes sets the error.
  std::vector<FtlePath> paths;
  for (double s : {-1.0, -2.0, -3.0}) paths.push_back(linear_path(10.0, 0.1, Eigen::VectorXd::Constant(1, s), Eigen::VectorXd::Zero(1)));
  const DriftFit m = fit_drift(paths, 0.0, 10.0);
  CHECK(m.slope[0] == doctest::Approx(-2.0));
  CHECK(m.stderr_[0] == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(code_of([] { fit_drift(std::vector<FtlePath>{}, 0.0, 1.0); }) == ErrorCode::EmptySample);
}

TEST_CASE("moment test and skewness") {
  const std::vector<double> x = normals(20000, 1.5, 2.0, 2);
  const MomentTest t = moment_test(x, 1.5, 4.0);
  CHECK(std::abs(t.z_mean) < 5.0);
  CHECK(std::abs(t.z_variance) < 5.0);
  CHECK(t.mean == doctest::Approx(oracle::mean(x)));
  CHECK(t.variance == doctest::Approx(oracle::variance(x)));
  CHECK(std::abs(moment_test(x, 1.7, 4.0).z_mean) > 5.0);
  CHECK(code_of([] { moment_test(std::vector<double>(50, 1.0), 0.0, 1.0); }) == ErrorCode::TooFewSamples);

  const Skewness s = skewness(x);
  CHECK(std::abs(s.value) < 5.0 * s.stderr_);
  CHECK(s.stderr_ == doctest::Approx(std::sqrt(6.0 / 20000)));
  std::vector<double> expo;
  RandomStream rng(3, 0);
  for (int i = 0; i < 20000; ++i) expo.push_back(-std::log(rng.uniform()));
  CHECK(skewness(expo).value == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("empirical density") {
  const std::vector<double> x = normals(5000, 0.0, 1.0, 3);
  const EmpiricalDensity d(x, 40);
  CHECK(d.integral() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.sample_count() == 5000);
  const EmpiricalDensity r(x, 20, -1.0, 1.0);
  CHECK(r.integral() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.bin_edges().front() == -1.0);
  CHECK(r.bin_edges().back() == 1.0);
  // Clamped tails pile into the end bins.
  CHECK(r.counts().front() > r.counts()[1]);
  CHECK(code_of([] { EmpiricalDensity({}, 10); }) == ErrorCode::EmptySample);
}

}  // TEST_SUITE
