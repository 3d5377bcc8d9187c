#include "msl/report.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

using namespace msl;
using msl::testing::TempDir;

TEST(FormatNumber, RoundTripsExactly) {
  NormalSource normal(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = normal() * std::pow(10.0, static_cast<int>(normal() * 20));
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1e-5), "1e-05");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(CsvWriter, EnforcesColumnCount) {
  TempDir dir("csv");
  CsvWriter csv(dir.file("a.csv"), {"x", "y"});
  csv.cell(1.5).cell(Index{2});
  csv.end_row();
  csv.cell(std::optional<double>{}).cell(std::string("s"));
  csv.end_row();
  csv.cell(1.0);
  EXPECT_THROW(csv.end_row(), std::logic_error);
  EXPECT_THROW(csv.cell(1.0).cell(2.0), std::logic_error);
}

TEST(CsvWriter, WritesTheExpectedText) {
  TempDir dir("csv2");
  {
    CsvWriter csv(dir.file("a.csv"), {"x", "y"});
    csv.cell(0.25).cell(std::optional<double>{});
    csv.end_row();
    csv.close();
  }
  std::ifstream in(dir.file("a.csv"));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, "x,y\n0.25,\n");
}

TEST(CsvWriter, UnwritablePathIsAnIoError) {
  EXPECT_THROW(CsvWriter("/nonexistent_dir_for_tests/a.csv", {"x"}), IoError);
  EXPECT_THROW(ensure_directory("/proc/msl_cannot_create"), IoError);
  EXPECT_THROW(write_json("/nonexistent_dir_for_tests/a.json", nlohmann::json::object()), IoError);
}

TEST(RunCsv, RoundTripKeepsAbsentCells) {
  TempDir dir("runcsv");
  const GroundTruth gt = make_ground_truth(9, 7, 2, 1);
  std::vector<DiagnosticsRecord> recs;
  recs.push_back(record_snapshot(gt, msl::testing::random_factors(9, 7, 3, 1), 0, 1.25, 0.5));
  recs.push_back(record_snapshot(gt, msl::testing::random_factors(9, 7, 1, 2), 10, 1e-9, std::nullopt));
  write_run_csv(dir.file("run.csv"), recs);
  const auto back = read_run_csv(dir.file("run.csv"));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].iter, recs[i].iter);
    EXPECT_EQ(back[i].train_loss, recs[i].train_loss);
    EXPECT_EQ(back[i].rel_test_error_spec, recs[i].rel_test_error_spec);
    EXPECT_EQ(back[i].angle_norm, recs[i].angle_norm);
    EXPECT_EQ(back[i].imbalance_signal_angle, recs[i].imbalance_signal_angle);
    EXPECT_EQ(back[i].delta_norm, recs[i].delta_norm);
    EXPECT_EQ(back[i].sigma_min_LZ, recs[i].sigma_min_LZ);
    EXPECT_EQ(back[i].z_norm, recs[i].z_norm);
  }
  EXPECT_FALSE(back[1].angle_norm.has_value());
  EXPECT_EQ(run_csv_header().size(), 14u);
  EXPECT_THROW(read_run_csv(dir.file("missing.csv")), IoError);
}

TEST(Version, IsNotEmpty) { EXPECT_GT(std::string(version_string()).size(), 0u); }
