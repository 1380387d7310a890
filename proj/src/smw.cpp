#include "sgmm/smw.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "sgmm/errors.hpp"
#include "sgmm/linalg.hpp"

namespace sgmm {

namespace detail {

// W <- ((k+1)/k) (W - coef * wv wv'), mirrored exactly symmetric. `wv` must be
// W v for the current (symmetric) W.
void weight_apply(Matrix& w, const Vector& wv, double coef, double k) {
  const double f = (k + 1.0) / k;
  w.selfadjointView<Eigen::Lower>().rankUpdate(wv, -coef);
  const Index d = w.rows();
  for (Index j = 0; j < d; ++j) {
    w(j, j) *= f;
    for (Index i = j + 1; i < d; ++i) {
      w(i, j) *= f;
      w(j, i) = w(i, j);
    }
  }
}

bool apply_inner_core(Matrix& cache, const Eigen::Ref<const Matrix>& hu,
                      Matrix& core, double k) {
  const Index c = core.rows();
  const double det = (c == 2) ? core(0, 0) * core(1, 1) - core(0, 1) * core(1, 0)
                              : core.determinant();
  if (det == 0.0 || !std::isfinite(det)) return false;
  // Cheap conservative condition bound: |core|_F^c / |det| >= cond(core).
  const double fn = std::sqrt(core.squaredNorm());
  double bound = fn * fn / std::abs(det);
  if (c == 3) bound *= fn;
  if (!(bound < kCoreConditionLimit)) return false;

  const double f = (k + 1.0) / k;
  if (c == 2) {
    Eigen::Matrix2d inv;
    inv << core(1, 1), -core(0, 1), -core(1, 0), core(0, 0);
    inv /= det;
    Matrix t = hu * inv;  // d_beta x 2
    cache.noalias() -= t * hu.transpose();
  } else {
    Eigen::Matrix3d small = core;
    Matrix t = hu * small.inverse();  // d_beta x 3
    cache.noalias() -= t * hu.transpose();
  }
  cache *= f;
  symmetrize(cache);
  return true;
}

}  // namespace detail

double smw_weight_update(Matrix& w, const Vector& v, double k) {
  if (!(k >= 1.0)) throw ConfigError("weight update requires k >= 1");
  const Vector wv = w * v;
  const double m = k + v.dot(wv);
  if (!(m > 0.0))
    throw NumericalBreakdown("nonpositive m in weight update; W lost "
                             "positive definiteness");
  detail::weight_apply(w, wv, 1.0 / m, k);
  return m;
}

void smw_weight_update_rank_t(Matrix& w, const Matrix& zs, double k) {
  if (!(k >= 1.0)) throw ConfigError("weight update requires k >= 1");
  const Index t = zs.cols();
  const double inv_sqrt_t = 1.0 / std::sqrt(static_cast<double>(t));
  const Matrix v = zs * inv_sqrt_t;
  const Matrix wv = w * v;  // d_g x T
  Matrix core = Matrix::Identity(t, t) + v.transpose() * wv / k;
  Eigen::LDLT<Matrix> ldlt(core);
  if (ldlt.info() != Eigen::Success)
    throw NumericalBreakdown("singular core in rank-T weight update");
  const Matrix sol = ldlt.solve(wv.transpose());  // T x d_g
  w = ((k + 1.0) / k) * (w - wv * sol / k);
  symmetrize(w);
}

bool smw_inner_inverse_update_2sls(Matrix& cache, const Matrix& phi,
                                   const Matrix& w, const Vector& x,
                                   const Vector& z, double m, double k) {
  const Vector wz = w * z;
  const Vector u1 = x - phi.transpose() * wz;
  Matrix hu(cache.rows(), 2);
  hu.col(0).noalias() = cache * u1;
  hu.col(1).noalias() = cache * x;
  Matrix core(2, 2);
  core(0, 0) = -m + u1.dot(hu.col(0));
  core(0, 1) = u1.dot(hu.col(1));
  core(1, 0) = core(0, 1);
  core(1, 1) = k + x.dot(hu.col(1));
  return detail::apply_inner_core(cache, hu, core, k);
}

bool smw_inner_inverse_update_eff(Matrix& cache, const Matrix& phi,
                                  const Matrix& w, const Vector& x,
                                  const Vector& z, const Vector& g_anchor,
                                  double m, double k) {
  if (z.squaredNorm() == 0.0 && g_anchor.squaredNorm() == 0.0) {
    // Phi shrinks by k/(k+1), W scales by (k+1)/k, so the inner matrix
    // shrinks by k/(k+1) and its inverse grows by the reciprocal.
    cache *= (k + 1.0) / k;
    return true;
  }
  const Vector wz = w * z;
  const Vector wg = w * g_anchor;
  const double s = z.dot(wz);
  const double t = z.dot(wg);
  const Vector u1 = phi.transpose() * wz;
  const Vector u2 = u1 + (s / k) * x;
  const Vector u3 = phi.transpose() * wg + (t / k) * x;
  Matrix hu(cache.rows(), 3);
  hu.col(0).noalias() = cache * u1;
  hu.col(1).noalias() = cache * u2;
  hu.col(2).noalias() = cache * u3;
  Matrix core(3, 3);
  core(0, 0) = -s + u1.dot(hu.col(0));
  core(0, 1) = u1.dot(hu.col(1));
  core(0, 2) = u1.dot(hu.col(2));
  core(1, 0) = core(0, 1);
  core(1, 1) = s + u2.dot(hu.col(1));
  core(1, 2) = u2.dot(hu.col(2));
  core(2, 0) = core(0, 2);
  core(2, 1) = core(1, 2);
  core(2, 2) = -m + u3.dot(hu.col(2));
  return detail::apply_inner_core(cache, hu, core, k);
}

}  // namespace sgmm
