#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ftle/ensemble.hpp"

namespace ftle {

/// Sampled exponent trajectory. Row k holds the sorted exponents at times[k].
struct FtlePath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> exponents;
  EnsembleParams params;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  /// Rows [0, warm_start_rows) come from the matrix-route warm start.
  std::size_t warm_start_rows = 0;
};

}  // namespace ftle
