#include "sgmm/baselines.hpp"

#include <Eigen/Cholesky>

#include "sgmm/errors.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/moments.hpp"

namespace sgmm {

namespace {

constexpr double kRcondFloor = 1e-13;

Eigen::LDLT<Matrix> factor_or_throw(const Matrix& a, const char* what) {
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < kRcondFloor)
    throw SingularDesign(what);
  return ldlt;
}

}  // namespace

Dataset to_dataset(const std::vector<Observation>& data) {
  if (data.empty()) throw ConfigError("empty dataset");
  const Index d_beta = data.front().x.size();
  const Index d_g = data.front().z.size();
  Dataset ds;
  const auto n = static_cast<Index>(data.size());
  ds.Xt.resize(d_beta, n);
  ds.Zt.resize(d_g, n);
  ds.y.resize(n);
  for (Index j = 0; j < n; ++j) {
    const Observation& obs = data[static_cast<std::size_t>(j)];
    validate_observation(obs, d_beta, d_g);
    ds.Xt.col(j) = obs.x;
    ds.Zt.col(j) = obs.z;
    ds.y(j) = obs.y;
  }
  return ds;
}

OfflineFit offline_2sls(const Dataset& ds) {
  const auto n = static_cast<double>(ds.n());
  if (ds.n() < ds.d_g()) throw SingularDesign("fewer records than instruments");
  const Matrix szz = ds.Zt * ds.Zt.transpose();
  const Matrix szx = ds.Zt * ds.Xt.transpose();
  const Vector szy = ds.Zt * ds.y;

  const auto szz_f = factor_or_throw(szz, "singular instrument Gram");
  const Matrix b_mat = szz_f.solve(szx);  // Szz^{-1} Szx
  const Matrix a_mat = szx.transpose() * b_mat;
  const auto a_f = factor_or_throw(a_mat, "singular projected design");

  OfflineFit fit;
  fit.beta = a_f.solve(szx.transpose() * szz_f.solve(szy));

  // Sandwich: avar = n A^{-1} B' (sum e^2 z z') B A^{-1} with B = Szz^{-1} Szx.
  const Vector resid = ds.y - ds.Xt.transpose() * fit.beta;
  const Matrix u = b_mat.transpose() * ds.Zt;  // d_beta x n
  const Matrix meat =
      u * resid.array().square().matrix().asDiagonal() * u.transpose();
  Matrix avar = n * a_f.solve(Matrix(a_f.solve(meat).transpose()));
  symmetrize(avar);
  fit.avar = std::move(avar);
  return fit;
}

OfflineFit offline_2sls(const std::vector<Observation>& data) {
  return offline_2sls(to_dataset(data));
}

OfflineFit offline_gmm_two_step(const Dataset& ds) {
  const auto n = static_cast<double>(ds.n());
  const OfflineFit first = offline_2sls(ds);

  const Matrix szx = ds.Zt * ds.Xt.transpose();
  const Vector szy = ds.Zt * ds.y;
  const Vector resid = ds.y - ds.Xt.transpose() * first.beta;
  const Matrix ze = ds.Zt * resid.asDiagonal();  // columns e_i z_i
  const Matrix omega_sum = ze * ze.transpose();

  const auto omega_f = factor_or_throw(omega_sum, "singular moment variance");
  const Matrix b_mat = omega_f.solve(szx);  // Omega^{-1} Szx
  const Matrix a_mat = szx.transpose() * b_mat;
  const auto a_f = factor_or_throw(a_mat, "singular weighted design");

  OfflineFit fit;
  fit.beta = a_f.solve(szx.transpose() * omega_f.solve(szy));
  Matrix avar = n * a_f.solve(Matrix::Identity(a_mat.rows(), a_mat.cols()));
  symmetrize(avar);
  fit.avar = std::move(avar);
  return fit;
}

OfflineFit offline_gmm_two_step(const std::vector<Observation>& data) {
  return offline_gmm_two_step(to_dataset(data));
}

Vector offline_ols(const std::vector<Observation>& data) {
  const Dataset ds = to_dataset(data);
  const Matrix sxx = ds.Xt * ds.Xt.transpose();
  const auto sxx_f = factor_or_throw(sxx, "singular regressor Gram");
  return sxx_f.solve(ds.Xt * ds.y);
}

}  // namespace sgmm
