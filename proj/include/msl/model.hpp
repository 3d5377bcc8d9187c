#pragma once

#include "msl/linalg.hpp"

#include <cstdint>

namespace msl {

/// Planted rank-r matrix together with the exact SVD it was built from and
/// the fixed eigenbasis of its symmetric embedding.
struct GroundTruth {
  Matrix X;           // n1 x n2
  Matrix P_X;         // n1 x r, orthonormal
  Vector Sigma_X;     // r, descending, positive
  Matrix Q_X;         // n2 x r, orthonormal
  Index r = 0;
  double kappa = 1.0;  // Sigma_X[0] / Sigma_X[r-1]
  Matrix L_X;         // (1/sqrt 2) [P_X; Q_X]
  Matrix L_tilde_X;   // (1/sqrt 2) [P_X; -Q_X]
  Matrix L_X_perp;    // orthonormal complement of span(L_X), (n1+n2) x (n1+n2-r)

  Index n1() const { return X.rows(); }
  Index n2() const { return X.cols(); }
  double norm() const { return Sigma_X(0); }
  double sigma_min() const { return Sigma_X(r - 1); }

  /// diag(Id_{n1}, -Id_{n2}) L_X_perp.
  Matrix L_tilde_X_perp() const;
};

/// X = X1 X2 / ||X1 X2|| with standard normal X1 (n1 x r) and X2 (r x n2).
GroundTruth make_ground_truth(Index n1, Index n2, Index r, std::uint64_t seed);

/// X = P diag(sigma) Q^T, random orthonormal P and Q, sigma log-spaced from
/// 1 down to 1/kappa_target.
GroundTruth make_ground_truth_conditioned(Index n1, Index n2, Index r, double kappa_target,
                                          std::uint64_t seed);

/// Trainable factors, X is approximated by V W^T.
struct FactorPair {
  Matrix V;  // n1 x k
  Matrix W;  // n2 x k

  Index k() const { return V.cols(); }
  Matrix product() const { return V * W.transpose(); }
};

/// Symmetric lift: Z = (1/sqrt 2)[V; W], Z_tilde = (1/sqrt 2)[V; -W].
struct LiftedPair {
  Matrix Z;
  Matrix Z_tilde;
};

/// V0 = alpha G1, W0 = alpha G2 with G1, G2 standard normal (V drawn first).
FactorPair init_random(Index n1, Index n2, Index k, double alpha, std::uint64_t seed);

LiftedPair lift(const FactorPair& fp);

/// Inverse of lift; n1 is the row count of V.
FactorPair unlift(const LiftedPair& lp, Index n1);

}  // namespace msl
