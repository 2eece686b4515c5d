#include "ftle/stats.hpp"

#include <algorithm>
#include <cmath>

#include "ftle/error.hpp"

namespace ftle {

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "ks_distance needs two nonempty samples");
  auto is_nan = [](double v) { return std::isnan(v); };
  if (std::any_of(a.begin(), a.end(), is_nan) || std::any_of(b.begin(), b.end(), is_nan)) {
    throw Error(ErrorCode::OutOfRange, "ks_distance sample contains NaN");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    // Consume every copy of the smaller value from both sides before comparing.
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_value(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(0.5 * alpha));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

double ks_p_value(double d, std::size_t n, std::size_t m) {
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double lam = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  if (lam < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lam * lam);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

DriftFit fit_drift(const FtlePath& path, double t_lo, double t_hi) {
  std::vector<std::size_t> rows;
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    if (path.times[k] >= t_lo && path.times[k] <= t_hi) rows.push_back(k);
  }
  if (rows.size() < 10) throw Error(ErrorCode::WindowTooShort, "fit window holds fewer than 10 grid points");
  const Eigen::Index n = path.exponents[rows.front()].size();
  const double m = static_cast<double>(rows.size());
  double t_mean = 0.0;
  for (std::size_t k : rows) t_mean += path.times[k];
  t_mean /= m;
  double sxx = 0.0;
  for (std::size_t k : rows) sxx += (path.times[k] - t_mean) * (path.times[k] - t_mean);

  DriftFit fit;
  fit.points = rows.size();
  fit.slope.resize(n);
  fit.stderr_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double y_mean = 0.0;
    for (std::size_t k : rows) y_mean += path.exponents[k][i];
    y_mean /= m;
    double sxy = 0.0;
    for (std::size_t k : rows) sxy += (path.times[k] - t_mean) * (path.exponents[k][i] - y_mean);
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t k : rows) {
      const double r = path.exponents[k][i] - y_mean - slope * (path.times[k] - t_mean);
      rss += r * r;
    }
    fit.slope[i] = slope;
    fit.stderr_[i] = std::sqrt(rss / (m - 2.0) / sxx);
  }
  return fit;
}

DriftFit fit_drift(const std::vector<FtlePath>& paths, double t_lo, double t_hi) {
  if (paths.empty()) throw Error(ErrorCode::EmptySample, "no paths to fit");
  std::vector<DriftFit> fits;
  fits.reserve(paths.size());
  for (const auto& p : paths) fits.push_back(fit_drift(p, t_lo, t_hi));
  const Eigen::Index n = fits.front().slope.size();
  const double count = static_cast<double>(fits.size());
  DriftFit out;
  out.points = fits.front().points;
  out.slope = Eigen::VectorXd::Zero(n);
  for (const auto& f : fits) out.slope += f.slope;
  out.slope /= count;
  out.stderr_ = Eigen::VectorXd::Zero(n);
  if (fits.size() > 1) {
    for (const auto& f : fits) out.stderr_ += (f.slope - out.slope).cwiseAbs2();
    out.stderr_ = (out.stderr_ / (count - 1.0) / count).cwiseSqrt();
  }
  return out;
}

double sample_mean(const std::vector<double>& x) {
  if (x.empty()) throw Error(ErrorCode::EmptySample, "empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) throw Error(ErrorCode::TooFewSamples, "variance needs at least 2 samples");
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

MomentTest moment_test(const std::vector<double>& x, double target_mean, double target_var) {
  if (x.size() < 100) throw Error(ErrorCode::TooFewSamples, "moment_test needs at least 100 samples");
  const double n = static_cast<double>(x.size());
  MomentTest out;
  out.mean = sample_mean(x);
  out.variance = sample_variance(x);
  double m4 = 0.0;
  for (double v : x) {
    const double d = v - out.mean;
    m4 += d * d * d * d;
  }
  m4 /= n;
  out.z_mean = (out.mean - target_mean) / std::sqrt(out.variance / n);
  const double var_se = std::sqrt(std::max(m4 - out.variance * out.variance, 0.0) / n);
  out.z_variance = (out.variance - target_var) / var_se;
  return out;
}

Skewness skewness(const std::vector<double>& x) {
  if (x.size() < 3) throw Error(ErrorCode::TooFewSamples, "skewness needs at least 3 samples");
  const double n = static_cast<double>(x.size());
  const double m = sample_mean(x);
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return {m3 / std::pow(m2, 1.5), std::sqrt(6.0 / n)};
}

EmpiricalDensity::EmpiricalDensity(const std::vector<double>& samples, int bins) {
  if (samples.empty()) throw Error(ErrorCode::EmptySample, "density of an empty sample");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  double a = *lo, b = *hi;
  if (!(b > a)) {
    a -= 0.5;
    b += 0.5;
  }
  fill(samples, bins, a, b);
}

EmpiricalDensity::EmpiricalDensity(const std::vector<double>& samples, int bins, double lo, double hi) {
  if (samples.empty()) throw Error(ErrorCode::EmptySample, "density of an empty sample");
  if (!(hi > lo)) throw Error(ErrorCode::OutOfRange, "density range must have hi > lo");
  fill(samples, bins, lo, hi);
}

void EmpiricalDensity::fill(const std::vector<double>& samples, int bins, double lo, double hi) {
  if (bins < 1) throw Error(ErrorCode::OutOfRange, "need at least one bin");
  edges_.resize(static_cast<std::size_t>(bins) + 1);
  for (int k = 0; k <= bins; ++k) edges_[k] = lo + (hi - lo) * k / bins;
  counts_.assign(static_cast<std::size_t>(bins), 0);
  for (double v : samples) {
    const double pos = (v - lo) / (hi - lo) * bins;
    const int k = std::clamp(static_cast<int>(std::floor(pos)), 0, bins - 1);
    ++counts_[k];
  }
  total_ = samples.size();
}

double EmpiricalDensity::density(std::size_t bin) const {
  const double width = edges_[bin + 1] - edges_[bin];
  return static_cast<double>(counts_[bin]) / (static_cast<double>(total_) * width);
}

double EmpiricalDensity::integral() const {
  double s = 0.0;
  for (std::size_t k = 0; k < counts_.size(); ++k) s += density(k) * (edges_[k + 1] - edges_[k]);
  return s;
}

}  // namespace ftle
