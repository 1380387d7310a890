#pragma once

#include <cstdint>
#include <random>

#include "sgmm/baselines.hpp"
#include "sgmm/stream.hpp"
#include "sgmm/types.hpp"

namespace sgmm {

// Synthetic design with endogeneity and heteroskedasticity:
//   z ~ N(0, Sigma), Sigma_{jk} = rho^{|j-k|}
//   x_j   = z_{j-1}                       for j = 2..p
//   x_1   = 0.1 sum_{j=2..p_low} x_j + 0.5 sum_{j=p_low..q_low} z_j + nu
//   eps   = sigma (nu + eta),  sigma = sigma_scale * exp(z_{q_low})
//   y     = x' beta_star + eps
// nu, eta iid standard normal. `endogenous = false` drops nu from eps (the
// exogeneity-test size design); `invalid_coeff` adds c * z_q to eps (the
// over-identification power design). Both default to the baseline design.
struct DgpConfig {
  std::int64_t n = 0;
  int p = 5;
  int q = 20;
  int p_low = 5;
  int q_low = 20;
  double rho = 0.5;
  Vector beta_star;  // empty = ones(p)
  double sigma_scale = 5.0;
  std::uint64_t seed = 1;
  bool endogenous = true;
  double invalid_coeff = 0.0;
};

void validate(const DgpConfig& cfg);

// Streaming generator: constant memory, exact Cholesky of the Toeplitz
// correlation, deterministic given the seed. Yields cfg.n observations.
class DgpStream final : public ObservationSource {
 public:
  explicit DgpStream(const DgpConfig& cfg);
  bool next(Observation& out) override;

 private:
  DgpConfig cfg_;
  Matrix chol_;  // lower Cholesky factor of Sigma
  Vector beta_;
  Vector e_;  // scratch normals
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::int64_t emitted_ = 0;
};

// Materializes cfg.n observations into a Dataset.
Dataset generate_dataset(const DgpConfig& cfg);

}  // namespace sgmm
