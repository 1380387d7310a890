#pragma once

#include <vector>

#include "sgmm/types.hpp"

namespace sgmm {

// Column-major dataset: observation j is column j of Xt (d_beta x n) and
// Zt (d_g x n). Keeps records contiguous for the streaming folds and lets the
// offline oracles run as plain matrix products.
struct Dataset {
  Matrix Xt;
  Matrix Zt;
  Vector y;

  std::int64_t n() const { return y.size(); }
  Index d_beta() const { return Xt.rows(); }
  Index d_g() const { return Zt.rows(); }
};

struct OfflineFit {
  Vector beta;
  Matrix avar;  // asymptotic variance of sqrt(n) (beta_hat - beta)
};

// beta = (X'Z (Z'Z)^{-1} Z'X)^{-1} X'Z (Z'Z)^{-1} Z'y with the
// heteroskedasticity-robust sandwich variance.
OfflineFit offline_2sls(const Dataset& ds);
OfflineFit offline_2sls(const std::vector<Observation>& data);

// First step 2SLS; Omega from first-step residual moments; second step
// minimizes the Omega^{-1}-weighted form; avar = (G' Omega^{-1} G)^{-1}.
OfflineFit offline_gmm_two_step(const Dataset& ds);
OfflineFit offline_gmm_two_step(const std::vector<Observation>& data);

// (X'X)^{-1} X'y; the DWH OLS anchor.
Vector offline_ols(const std::vector<Observation>& data);

Dataset to_dataset(const std::vector<Observation>& data);

}  // namespace sgmm
