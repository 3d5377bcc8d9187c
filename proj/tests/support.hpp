#pragma once

#include "msl/diagnostics.hpp"
#include "msl/model.hpp"
#include "msl/rng.hpp"
#include "msl/sensing.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <string>

namespace msl::testing {

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

struct Small {
  GroundTruth gt;
  SensingOperator op;
  Targets targets;
};

inline Small small_problem(bool population, std::uint64_t seed = 3, Index n1 = 12, Index n2 = 8,
                           Index r = 2, Index m = 300) {
  GroundTruth gt = make_ground_truth(n1, n2, r, seed);
  SensingOperator op = population ? make_population_operator(n1, n2)
                                  : make_gaussian_operator(n1, n2, m, seed + 1000);
  Targets t = observe(op, gt);
  return Small{std::move(gt), std::move(op), std::move(t)};
}

/// Random factor pair with O(1) entries.
inline FactorPair random_factors(Index n1, Index n2, Index k, std::uint64_t seed, double scale = 0.5) {
  NormalSource normal(seed);
  return FactorPair{normal.matrix(n1, k, scale), normal.matrix(n2, k, scale)};
}

/// Exact balanced factorization V = P sqrt(S), W = Q sqrt(S), padded with
/// `extra` zero columns.
inline FactorPair balanced_exact(const GroundTruth& gt, Index extra = 0) {
  const Vector root = gt.Sigma_X.cwiseSqrt();
  FactorPair fp{Matrix::Zero(gt.n1(), gt.r + extra), Matrix::Zero(gt.n2(), gt.r + extra)};
  fp.V.leftCols(gt.r) = gt.P_X * root.asDiagonal();
  fp.W.leftCols(gt.r) = gt.Q_X * root.asDiagonal();
  return fp;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("msl_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace msl::testing
