#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sgmm/types.hpp"

namespace sgmm {

// gamma_i = gamma0 * i^(-a), i >= 1, with a in (1/2, 1) strictly.
struct LearningRateSchedule {
  double gamma0 = 0.0;
  double a = 0.501;

  double at(std::int64_t i) const {
    return gamma0 * std::pow(static_cast<double>(i), -a);
  }
};

// Validating constructor; throws ConfigError for gamma0 <= 0 or a outside
// (1/2, 1).
LearningRateSchedule make_schedule(double gamma0, double a = 0.501);

// Data-driven gamma0 = 1 / Psi0(alpha), where Psi0(alpha) is the empirical
// (1-alpha) quantile over the initialization sample of
//   (1/d_beta) * |(Phi0' W0 Phi0)^+ Phi0' W0 G_i|_2   (spectral norm).
// Nearest-rank quantile, upper-middle convention: index floor((1-alpha)*n0)+1
// capped at n0, which reproduces the two-point worked example exactly.
// eta0 ridges the W0 used inside Psi0, matching the estimator's own W0.
double rule_of_thumb_gamma0(const std::vector<Observation>& init_sample,
                            double alpha, double eta0 = 0.0);

}  // namespace sgmm
