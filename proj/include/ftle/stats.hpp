#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ftle/path.hpp"
#include "ftle/random.hpp"

namespace ftle {

/// Sup distance between the two empirical CDFs. Throws EmptySample, or OutOfRange on NaN.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Asymptotic two-sample critical distance at level alpha.
double ks_critical_value(std::size_t n, std::size_t m, double alpha);

/// Asymptotic two-sample p-value for distance d.
double ks_p_value(double d, std::size_t n, std::size_t m);

struct DriftFit {
  Eigen::VectorXd slope;
  Eigen::VectorXd stderr_;
  std::size_t points = 0;
};

/// Least-squares slope of every exponent over rows with t in [t_lo, t_hi].
/// Throws WindowTooShort below 10 grid points.
DriftFit fit_drift(const FtlePath& path, double t_lo, double t_hi);

/// Mean of per-path slopes; the standard error is the across-path spread / sqrt(N).
DriftFit fit_drift(const std::vector<FtlePath>& paths, double t_lo, double t_hi);

struct MomentTest {
  double mean = 0.0;
  double variance = 0.0;
  double z_mean = 0.0;
  double z_variance = 0.0;
};

/// z-scores of the sample mean and unbiased variance against targets. The
/// variance standard error uses the sample fourth central moment. Throws
/// TooFewSamples below 100 samples.
MomentTest moment_test(const std::vector<double>& samples, double target_mean, double target_var);

struct Skewness {
  double value = 0.0;
  /// sqrt(6 / N), the Gaussian-null standard error.
  double stderr_ = 0.0;
};
Skewness skewness(const std::vector<double>& samples);

double sample_mean(const std::vector<double>& samples);
double sample_variance(const std::vector<double>& samples);

/// Histogram normalized as a probability density over [edges.front(), edges.back()].
class EmpiricalDensity {
 public:
  /// Equal-width bins spanning the sample range. Throws EmptySample.
  EmpiricalDensity(const std::vector<double>& samples, int bins);
  /// Fixed range; samples outside are clamped into the end bins.
  EmpiricalDensity(const std::vector<double>& samples, int bins, double lo, double hi);

  const std::vector<double>& bin_edges() const { return edges_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t sample_count() const { return total_; }
  double density(std::size_t bin) const;
  double integral() const;

 private:
  void fill(const std::vector<double>& samples, int bins, double lo, double hi);

  std::vector<double> edges_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

}  // namespace ftle
