#include "ftle/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ftle/error.hpp"

namespace ftle {

ValidatedParams validate_params(const EnsembleParams& p) {
  if (p.n < 1) {
    throw Error(ErrorCode::NonPositiveDimension, "n must be >= 1, got " + std::to_string(p.n));
  }
  if (!std::isfinite(p.sigma2) || p.sigma2 < 0.0) {
    std::ostringstream msg;
    msg << "sigma2 must be >= 0, got " << p.sigma2;
    throw Error(ErrorCode::NegativeVariance, msg.str());
  }
  const double lo = tau_min(p.n);
  if (!std::isfinite(p.tau) || p.tau < lo - kBoundarySlack || p.tau > 1.0 + kBoundarySlack) {
    std::ostringstream msg;
    msg << "tau must lie in [-1/(n+1), 1] = [" << lo << ", 1] for n = " << p.n << ", got " << p.tau;
    throw Error(ErrorCode::OutOfRange, msg.str());
  }
  if (!std::isfinite(p.mu) || p.mu < 0.0) {
    std::ostringstream msg;
    msg << "mu must be >= 0, got " << p.mu;
    throw Error(ErrorCode::OutOfRange, msg.str());
  }
  return ValidatedParams(p);
}

NoiseCoefficients to_noise_coefficients(const ValidatedParams& p) {
  const NoiseCoefficients out{p.sigma2(), p.sigma2() * p.tau(), p.sigma2() * p.tau()};
  if (!satisfies_constraints(out, p.n())) {
    throw Error(ErrorCode::ConstraintViolated, "validated params produced invalid coefficients");
  }
  return out;
}

bool satisfies_constraints(const NoiseCoefficients& k, int n) {
  const double scale = std::max({1.0, std::abs(k.a), std::abs(k.b), std::abs(k.c)});
  const double slack = kBoundarySlack * scale * (n + 2);
  return k.a + k.c >= -slack && k.a - k.c >= -slack && k.a + n * k.b + k.c >= -slack;
}

// ---------------------------------------------------------------------------

namespace {

double poly_value(const GaussianPolyKernel& k, double rho) {
  const double kappa = 1.0 / (k.length * k.length);
  return (k.c0 + k.c1 * rho) * std::exp(-kappa * rho);
}

double poly_d1(const GaussianPolyKernel& k, double rho) {
  const double kappa = 1.0 / (k.length * k.length);
  return (k.c1 - kappa * k.c0 - kappa * k.c1 * rho) * std::exp(-kappa * rho);
}

double poly_d2(const GaussianPolyKernel& k, double rho) {
  const double kappa = 1.0 / (k.length * k.length);
  return (-2.0 * kappa * k.c1 + kappa * kappa * (k.c0 + k.c1 * rho)) * std::exp(-kappa * rho);
}

// Linear interpolation of node values, clamped at both ends.
double interp(const std::vector<double>& v, double step, double x) {
  if (v.size() == 1 || x <= 0.0) return v.front();
  const double pos = x / step;
  const auto last = static_cast<double>(v.size() - 1);
  if (pos >= last) return v.back();
  const auto k = static_cast<std::size_t>(pos);
  const double w = pos - static_cast<double>(k);
  return (1.0 - w) * v[k] + w * v[k + 1];
}

std::vector<double> node_d1(const TabulatedKernel& t) {
  const auto& f = t.values;
  const std::size_t m = f.size();
  std::vector<double> d(m, 0.0);
  if (m < 3) return d;
  const double h = t.step;
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  for (std::size_t k = 1; k + 1 < m; ++k) d[k] = (f[k + 1] - f[k - 1]) / (2.0 * h);
  d[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * h);
  return d;
}

std::vector<double> node_d2(const TabulatedKernel& t) {
  const auto& f = t.values;
  const std::size_t m = f.size();
  std::vector<double> d(m, 0.0);
  if (m < 4) return d;
  const double h2 = t.step * t.step;
  d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
  for (std::size_t k = 1; k + 1 < m; ++k) d[k] = (f[k + 1] - 2.0 * f[k] + f[k - 1]) / h2;
  d[m - 1] = (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) / h2;
  return d;
}

}  // namespace

ScalarKernel::ScalarKernel(TabulatedKernel k) : impl_(std::move(k)) {
  const auto& t = std::get<TabulatedKernel>(impl_);
  if (t.values.empty() || !(t.step > 0.0)) {
    throw Error(ErrorCode::ConfigError, "tabulated kernel needs a positive step and at least one value");
  }
}

double ScalarKernel::value(double rho) const {
  if (const auto* p = std::get_if<GaussianPolyKernel>(&impl_)) return poly_value(*p, rho);
  const auto& t = std::get<TabulatedKernel>(impl_);
  return interp(t.values, t.step, rho);
}

double ScalarKernel::d1(double rho) const {
  if (const auto* p = std::get_if<GaussianPolyKernel>(&impl_)) return poly_d1(*p, rho);
  const auto& t = std::get<TabulatedKernel>(impl_);
  return interp(node_d1(t), t.step, rho);
}

double ScalarKernel::d2(double rho) const {
  if (const auto* p = std::get_if<GaussianPolyKernel>(&impl_)) return poly_d2(*p, rho);
  const auto& t = std::get<TabulatedKernel>(impl_);
  return interp(node_d2(t), t.step, rho);
}

bool ScalarKernel::monotone_decreasing() const {
  if (const auto* t = std::get_if<TabulatedKernel>(&impl_)) {
    for (std::size_t k = 1; k < t->values.size(); ++k) {
      if (t->values[k] > t->values[k - 1] + kBoundarySlack) return false;
    }
    return true;
  }
  const auto& p = std::get<GaussianPolyKernel>(impl_);
  const double rho_max = 40.0 * p.length * p.length;
  constexpr int kGrid = 400;
  for (int k = 0; k <= kGrid; ++k) {
    if (poly_d1(p, rho_max * k / kGrid) > kBoundarySlack) return false;
  }
  return true;
}

double TemporalKernel::value(double u) const {
  u = std::abs(u);
  return std::visit(
      [u](const auto& g) -> double {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, DiracTemporal>) {
          throw Error(ErrorCode::UnnormalizableKernel, "dirac temporal kernel has no finite g(0)");
        } else if constexpr (std::is_same_v<T, ExponentialTemporal>) {
          return std::exp(-u / g.t_c);
        } else if constexpr (std::is_same_v<T, ConstantTemporal>) {
          return g.level;
        } else {
          return interp(g.values, g.step, u);
        }
      },
      impl_);
}

std::string TemporalKernel::name() const {
  return std::visit(
      [](const auto& g) -> std::string {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, DiracTemporal>) return "dirac";
        else if constexpr (std::is_same_v<T, ExponentialTemporal>) return "exponential";
        else if constexpr (std::is_same_v<T, ConstantTemporal>) return "constant";
        else return "tabulated";
      },
      impl_);
}

double ValidatedKernel::tau() const {
  const double s2 = sigma2();
  return s2 > 0.0 ? -spec_.gamma2.value(0.0) / s2 : 0.0;
}

ValidatedKernel validate_kernel(const KernelSpec& k, int n) {
  if (n < 1) throw Error(ErrorCode::NonPositiveDimension, "n must be >= 1");
  const double g1 = k.gamma1.value(0.0);
  const double g1p = k.gamma1.d1(0.0);
  const double g2 = k.gamma2.value(0.0);
  const double slack = kBoundarySlack * std::max({1.0, std::abs(g1), std::abs(g1p), std::abs(g2)});
  auto fail = [](const std::string& which, double lhs, double rhs) {
    std::ostringstream msg;
    msg << which << " violated (" << lhs << " vs " << rhs << ")";
    throw Error(ErrorCode::KernelConstraintViolated, msg.str());
  };
  if (g1p > slack) fail("Gamma1'(0) <= 0", g1p, 0.0);
  if (g1 < -slack) fail("0 <= Gamma1(0)", 0.0, g1);
  if (g1p / (n + 1.0) > -g2 + slack) fail("Gamma1'(0)/(n+1) <= -Gamma2(0)", g1p / (n + 1.0), -g2);
  if (-g2 > -g1p + slack) fail("-Gamma2(0) <= -Gamma1'(0)", -g2, -g1p);
  return ValidatedKernel(k, n, k.gamma1.monotone_decreasing());
}

Eigen::MatrixXd eval_spatial_covariance(const ValidatedKernel& k, const Eigen::VectorXd& r) {
  const double rho = 0.5 * r.squaredNorm();
  const double g1 = k.spec().gamma1.value(rho);
  const double g2 = k.spec().gamma2.value(rho);
  Eigen::MatrixXd d = g2 * (r * r.transpose());
  d.diagonal().array() += g1;
  return d;
}

double Tensor4::max_abs_diff(const Tensor4& other) const {
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - other.data_[i]));
  return m;
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor4 eval_jacobian_covariance(const ValidatedKernel& k, const Eigen::VectorXd& r) {
  const int n = static_cast<int>(r.size());
  const double rho = 0.5 * r.squaredNorm();
  const auto& s = k.spec();
  const double g1p = s.gamma1.d1(rho);
  const double g1pp = s.gamma1.d2(rho);
  const double g2 = s.gamma2.value(rho);
  const double g2p = s.gamma2.d1(rho);
  const double g2pp = s.gamma2.d2(rho);
  auto delta = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  Tensor4 c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int kk = 0; kk < n; ++kk)
        for (int l = 0; l < n; ++l) {
          double v = -g1p * delta(i, j) * delta(kk, l);
          v -= g2 * (delta(i, kk) * delta(j, l) + delta(i, l) * delta(j, kk));
          v -= g1pp * delta(i, j) * r[kk] * r[l];
          v -= g2p * (delta(i, kk) * r[j] * r[l] + delta(j, kk) * r[i] * r[l] + delta(i, l) * r[j] * r[kk] +
                      delta(j, l) * r[i] * r[kk] + delta(kk, l) * r[i] * r[j]);
          v -= g2pp * r[i] * r[j] * r[kk] * r[l];
          c(i, j, kk, l) = v;
        }
  return c;
}

Tensor4 isotropic_tensor(const NoiseCoefficients& q, int n) {
  Tensor4 t(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double v = 0.0;
          if (i == j && k == l) v += q.a;
          if (i == k && j == l) v += q.b;
          if (i == l && j == k) v += q.c;
          t(i, j, k, l) = v;
        }
  return t;
}

}  // namespace ftle
