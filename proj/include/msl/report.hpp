#pragma once

#include "msl/diagnostics.hpp"

#include "json.hpp"

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace msl {

/// Raised when an output file cannot be created or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip-safe decimal (17 significant digits at most).
std::string format_number(double value);

/// Small CSV writer: header first, then rows of cells.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  CsvWriter& cell(double value);
  CsvWriter& cell(Index value);
  CsvWriter& cell(std::optional<double> value);  // empty cell when absent
  CsvWriter& cell(const std::string& value);
  void end_row();
  /// Flushes and throws IoError if any write failed.
  void close();

 private:
  void separator();

  std::string path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::size_t filled_ = 0;
};

/// Column names of run_*.csv, in order.
const std::vector<std::string>& run_csv_header();

void write_run_csv(const std::string& path, const std::vector<DiagnosticsRecord>& records);

/// Reads back run_*.csv (used by tests and tools); absent cells become nullopt.
std::vector<DiagnosticsRecord> read_run_csv(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& j);

/// Creates the directory (and parents) or throws IoError.
void ensure_directory(const std::string& path);

/// git-describe string of the source tree at build time.
const char* version_string();

}  // namespace msl
