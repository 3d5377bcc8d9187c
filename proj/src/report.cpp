#include "msl/report.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#ifndef MSL_VERSION
#define MSL_VERSION "unknown"
#endif

namespace msl {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::out | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError("cannot open " + path + " for writing: " + std::strerror(errno));
  for (const std::string& name : header) cell(name);
  end_row();
}

void CsvWriter::separator() {
  if (filled_ >= columns_) throw std::logic_error("CsvWriter: too many cells in row of " + path_);
  if (filled_ > 0) out_ << ',';
  ++filled_;
}

CsvWriter& CsvWriter::cell(double value) {
  separator();
  out_ << format_number(value);
  return *this;
}

CsvWriter& CsvWriter::cell(Index value) {
  separator();
  out_ << value;
  return *this;
}

CsvWriter& CsvWriter::cell(std::optional<double> value) {
  separator();
  if (value) out_ << format_number(*value);
  return *this;
}

CsvWriter& CsvWriter::cell(const std::string& value) {
  separator();
  out_ << value;
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_)
    throw std::logic_error("CsvWriter: row of " + path_ + " has " + std::to_string(filled_) +
                           " cells, expected " + std::to_string(columns_));
  out_ << '\n';
  filled_ = 0;
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw IoError("write to " + path_ + " failed");
  out_.close();
}

const std::vector<std::string>& run_csv_header() {
  static const std::vector<std::string> header{
      "iter",           "train_loss",         "rel_test_error_fro",     "rel_test_error_spec",
      "sigma_min_signal", "nuisance_norm",    "angle_norm",             "imbalance_norm",
      "imbalance_nuisance", "imbalance_signal_angle", "vw_imbalance",   "delta_norm",
      "z_norm",         "sigma_min_LZ"};
  return header;
}

void write_run_csv(const std::string& path, const std::vector<DiagnosticsRecord>& records) {
  CsvWriter csv(path, run_csv_header());
  for (const DiagnosticsRecord& rec : records) {
    csv.cell(rec.iter)
        .cell(rec.train_loss)
        .cell(rec.rel_test_error_fro)
        .cell(rec.rel_test_error_spec)
        .cell(rec.sigma_min_signal)
        .cell(rec.nuisance_norm)
        .cell(rec.angle_norm)
        .cell(rec.imbalance_norm)
        .cell(rec.imbalance_nuisance)
        .cell(rec.imbalance_signal_angle)
        .cell(rec.vw_imbalance)
        .cell(rec.delta_norm)
        .cell(rec.z_norm)
        .cell(rec.sigma_min_LZ);
    csv.end_row();
  }
  csv.close();
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_cell(const std::string& cell, const std::string& path) {
  if (cell.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw IoError(path + ": bad numeric cell '" + cell + "'");
}

}  // namespace

std::vector<DiagnosticsRecord> read_run_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || split(line) != run_csv_header())
    throw IoError(path + ": header does not match the run schema");
  std::vector<DiagnosticsRecord> out;
  while (std::getline(in, line)) {
    const std::vector<std::string> c = split(line);
    if (c.size() != run_csv_header().size()) throw IoError(path + ": ragged row");
    auto req = [&](std::size_t i) {
      const auto v = parse_cell(c[i], path);
      if (!v) throw IoError(path + ": empty cell in column " + run_csv_header()[i]);
      return *v;
    };
    DiagnosticsRecord rec;
    rec.iter = static_cast<Index>(req(0));
    rec.train_loss = req(1);
    rec.rel_test_error_fro = req(2);
    rec.rel_test_error_spec = req(3);
    rec.sigma_min_signal = parse_cell(c[4], path);
    rec.nuisance_norm = parse_cell(c[5], path);
    rec.angle_norm = parse_cell(c[6], path);
    rec.imbalance_norm = req(7);
    rec.imbalance_nuisance = parse_cell(c[8], path);
    rec.imbalance_signal_angle = parse_cell(c[9], path);
    rec.vw_imbalance = req(10);
    rec.delta_norm = parse_cell(c[11], path);
    rec.z_norm = req(12);
    rec.sigma_min_LZ = req(13);
    out.push_back(rec);
  }
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing: " + std::strerror(errno));
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write to " + path + " failed");
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec || !std::filesystem::is_directory(path))
    throw IoError("cannot create output directory " + path + ": " + ec.message());
}

const char* version_string() { return MSL_VERSION; }

}  // namespace msl
