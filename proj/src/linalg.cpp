#include "sgmm/linalg.hpp"

#include <Eigen/Eigenvalues>

namespace sgmm {

Matrix pseudo_inverse_sym(const Matrix& a, double tol_rel) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const Vector& vals = eig.eigenvalues();
  const Matrix& vecs = eig.eigenvectors();
  const double lmax = vals.cwiseAbs().maxCoeff();
  const double tau = tol_rel * lmax;
  Vector inv = Vector::Zero(vals.size());
  for (Index j = 0; j < vals.size(); ++j) {
    if (vals(j) > tau && tau > 0.0) inv(j) = 1.0 / vals(j);
  }
  return vecs * inv.asDiagonal() * vecs.transpose();
}

void symmetrize(Matrix& a) {
  a = 0.5 * (a + a.transpose()).eval();
}

double rel_opnorm_diff(const Matrix& a, const Matrix& b) {
  const double denom = a.operatorNorm();
  const double diff = (a - b).operatorNorm();
  if (denom <= 0.0) return diff;
  return diff / denom;
}

}  // namespace sgmm
