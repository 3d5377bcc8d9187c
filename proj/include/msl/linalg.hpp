#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace msl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Spectral norm (largest singular value). Zero for empty matrices.
double spectral_norm(const Eigen::Ref<const Matrix>& m);

// Nuclear norm (sum of singular values).
double nuclear_norm(const Eigen::Ref<const Matrix>& m);

// Singular values in descending order.
Vector singular_values(const Eigen::Ref<const Matrix>& m);

// Smallest of the first min(rows, cols) singular values.
double sigma_min(const Eigen::Ref<const Matrix>& m);

// Spectral norm of U * B^T without forming the product. U is a x p, B is b x p.
double spectral_norm_of_product(const Eigen::Ref<const Matrix>& u,
                                const Eigen::Ref<const Matrix>& b);

// Orthonormal basis (d x (d - cols)) of the orthogonal complement of the
// column span of an orthonormal d x cols matrix.
Matrix orthogonal_complement(const Eigen::Ref<const Matrix>& basis);

// Thin orthonormal factor of a full-column-rank matrix via Householder QR.
Matrix orthonormalize(const Eigen::Ref<const Matrix>& m);

// [[0, X], [X^T, 0]].
Matrix sym_embed(const Eigen::Ref<const Matrix>& x);

}  // namespace msl
