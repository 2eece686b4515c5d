#include "ftle/cli/output.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>

#include "ftle/error.hpp"

namespace ftle::cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw Error(ErrorCode::ConfigError, "cannot write '" + path + "'");
  for (const auto& c : columns) field(c);
  end_row();
}

void CsvWriter::separator() {
  if (row_started_) out_ << ',';
  row_started_ = true;
}

CsvWriter& CsvWriter::field(double v) {
  separator();
  if (!std::isfinite(v)) ++non_finite_;
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::field(long long v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::field(unsigned long long v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::field(const std::string& v) {
  separator();
  out_ << v;
  return *this;
}

void CsvWriter::end_row() {
  out_ << '\n';
  row_started_ = false;
  if (!out_) throw Error(ErrorCode::ConfigError, "write to '" + path_ + "' failed");
}

Json run_metadata(const std::string& subcommand, const ExperimentConfig& cfg) {
  Json m;
  m["schema_version"] = kSchemaVersion;
  m["tool_version"] = kToolVersion;
  m["subcommand"] = subcommand;
  m["config_hash"] = cfg.hash();
  m["seed"] = cfg.json()["seed"];
  Json resolved = cfg.json();
  // Thread count and output location do not affect results.
  resolved.erase("threads");
  resolved.erase("out");
  m["config"] = resolved;
  return m;
}

void write_sidecar(const std::string& path, const Json& metadata, const Json& summary,
                   const std::vector<std::string>& files) {
  Json doc = metadata;
  doc["files"] = files;
  doc["summary"] = summary;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::ConfigError, "cannot create output directory '" + dir + "': " + ec.message());
}

}  // namespace ftle::cli
