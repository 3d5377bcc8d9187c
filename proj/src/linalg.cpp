#include "msl/linalg.hpp"

#include <algorithm>

namespace msl {

Vector singular_values(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return Vector();
  if (m.rows() >= 4 * m.cols() || m.cols() >= 4 * m.rows()) {
    // Jacobi on a very thin matrix is wasteful; reduce to the square factor.
    if (m.rows() >= m.cols()) {
      Eigen::HouseholderQR<Matrix> qr(m);
      Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
      return Eigen::JacobiSVD<Matrix>(r).singularValues();
    }
    Eigen::HouseholderQR<Matrix> qr(m.transpose());
    Matrix r = qr.matrixQR().topRows(m.rows()).triangularView<Eigen::Upper>();
    return Eigen::JacobiSVD<Matrix>(r).singularValues();
  }
  if (std::min(m.rows(), m.cols()) > 32) return Eigen::BDCSVD<Matrix>(m).singularValues();
  return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

double spectral_norm(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m)(0);
}

double nuclear_norm(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m).sum();
}

double sigma_min(const Eigen::Ref<const Matrix>& m) {
  if (m.size() == 0) return 0.0;
  const Vector s = singular_values(m);
  return s(s.size() - 1);
}

double spectral_norm_of_product(const Eigen::Ref<const Matrix>& u,
                                const Eigen::Ref<const Matrix>& b) {
  if (u.size() == 0 || b.size() == 0) return 0.0;
  // U B^T = Qu Ru (Qb Rb)^T, so the norm is that of Ru Rb^T.
  auto triangular = [](const Eigen::Ref<const Matrix>& f) -> Matrix {
    if (f.rows() < f.cols()) return f;
    Eigen::HouseholderQR<Matrix> qr(f);
    return qr.matrixQR().topRows(f.cols()).triangularView<Eigen::Upper>();
  };
  const Matrix ru = triangular(u);
  const Matrix rb = triangular(b);
  return spectral_norm(ru * rb.transpose());
}

Matrix orthonormalize(const Eigen::Ref<const Matrix>& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  return q;
}

Matrix orthogonal_complement(const Eigen::Ref<const Matrix>& basis) {
  const Index d = basis.rows();
  const Index c = basis.cols();
  if (c == 0) return Matrix::Identity(d, d);
  Eigen::HouseholderQR<Matrix> qr(basis);
  Matrix full = qr.householderQ() * Matrix::Identity(d, d);
  return full.rightCols(d - c);
}

Matrix sym_embed(const Eigen::Ref<const Matrix>& x) {
  const Index n1 = x.rows();
  const Index n2 = x.cols();
  Matrix s = Matrix::Zero(n1 + n2, n1 + n2);
  s.topRightCorner(n1, n2) = x;
  s.bottomLeftCorner(n2, n1) = x.transpose();
  return s;
}

}  // namespace msl
