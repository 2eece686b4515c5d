#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "ftle/cli/config.hpp"

namespace ftle::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal form (std::to_chars); identical across runs.
std::string format_double(double v);

/// Comma-separated writer; the header is written on construction.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);

  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(unsigned long long v);
  CsvWriter& field(const std::string& v);
  void end_row();
  /// Number of non-finite doubles written so far.
  std::size_t non_finite() const { return non_finite_; }

 private:
  void separator();

  std::ofstream out_;
  std::string path_;
  bool row_started_ = false;
  std::size_t non_finite_ = 0;
};

/// Metadata shared by every artifact: versions, resolved config, its hash, seed.
Json run_metadata(const std::string& subcommand, const ExperimentConfig& cfg);

/// Writes `<out>/<stem>.json` with metadata, file list and summary.
void write_sidecar(const std::string& path, const Json& metadata, const Json& summary,
                   const std::vector<std::string>& files);

std::string join_path(const std::string& dir, const std::string& file);

/// Creates the output directory (and parents). Throws ConfigError on failure.
void ensure_directory(const std::string& dir);

}  // namespace ftle::cli
