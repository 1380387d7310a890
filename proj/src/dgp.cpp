#include "sgmm/dgp.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "sgmm/errors.hpp"

namespace sgmm {

void validate(const DgpConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("dgp: n must be positive");
  if (cfg.p < 1) throw ConfigError("dgp: p must be positive");
  if (cfg.q < cfg.p) throw ConfigError("dgp: q must be at least p");
  if (cfg.p_low < 1 || cfg.p_low > cfg.p)
    throw ConfigError("dgp: p_low must lie in [1, p]");
  if (cfg.q_low < cfg.p_low || cfg.q_low > cfg.q)
    throw ConfigError("dgp: q_low must lie in [p_low, q]");
  if (!(cfg.rho > -1.0 && cfg.rho < 1.0))
    throw ConfigError("dgp: rho must lie in (-1, 1)");
  if (cfg.beta_star.size() != 0 && cfg.beta_star.size() != cfg.p)
    throw ConfigError("dgp: beta_star must be empty or of length p");
  if (!(cfg.sigma_scale >= 0.0))
    throw ConfigError("dgp: sigma_scale must be nonnegative");
}

DgpStream::DgpStream(const DgpConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
  validate(cfg_);
  Matrix sigma(cfg_.q, cfg_.q);
  for (int i = 0; i < cfg_.q; ++i)
    for (int j = 0; j < cfg_.q; ++j)
      sigma(i, j) = std::pow(cfg_.rho, std::abs(i - j));
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ConfigError("dgp: correlation matrix is not positive definite");
  chol_ = llt.matrixL();
  beta_ = cfg_.beta_star.size() ? cfg_.beta_star : Vector::Ones(cfg_.p);
  e_.resize(cfg_.q);
}

bool DgpStream::next(Observation& out) {
  if (emitted_ >= cfg_.n) return false;
  const int p = cfg_.p, q = cfg_.q;
  out.z.resize(q);
  out.x.resize(p);
  for (int j = 0; j < q; ++j) e_(j) = normal_(rng_);
  out.z.noalias() = chol_.triangularView<Eigen::Lower>() * e_;
  const double nu = normal_(rng_);
  const double eta = normal_(rng_);

  for (int j = 2; j <= p; ++j) out.x(j - 1) = out.z(j - 2);
  double x1 = 0.0;
  for (int j = 2; j <= cfg_.p_low; ++j) x1 += out.x(j - 1);
  x1 *= 0.1;
  double z_sum = 0.0;
  for (int j = cfg_.p_low; j <= cfg_.q_low; ++j) z_sum += out.z(j - 1);
  x1 += 0.5 * z_sum + nu;
  out.x(0) = x1;

  const double sigma = cfg_.sigma_scale * std::exp(out.z(cfg_.q_low - 1));
  double eps = sigma * (cfg_.endogenous ? nu + eta : eta);
  if (cfg_.invalid_coeff != 0.0) eps += cfg_.invalid_coeff * out.z(q - 1);
  out.y = out.x.dot(beta_) + eps;
  ++emitted_;
  return true;
}

Dataset generate_dataset(const DgpConfig& cfg) {
  DgpStream stream(cfg);
  Dataset ds;
  ds.Xt.resize(cfg.p, cfg.n);
  ds.Zt.resize(cfg.q, cfg.n);
  ds.y.resize(cfg.n);
  Observation obs;
  for (std::int64_t j = 0; stream.next(obs); ++j) {
    ds.Xt.col(j) = obs.x;
    ds.Zt.col(j) = obs.z;
    ds.y(j) = obs.y;
  }
  return ds;
}

}  // namespace sgmm
