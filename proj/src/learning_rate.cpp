#include "sgmm/learning_rate.hpp"

#include <algorithm>
#include <cmath>

#include "sgmm/errors.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/moments.hpp"
#include "sgmm/state.hpp"

namespace sgmm {

LearningRateSchedule make_schedule(double gamma0, double a) {
  if (!(gamma0 > 0.0))
    throw ConfigError("gamma0 must be positive, got " + std::to_string(gamma0));
  if (!(a > 0.5) || !(a < 1.0))
    throw ConfigError("learning-rate exponent a must lie in (1/2, 1), got " +
                      std::to_string(a));
  return LearningRateSchedule{gamma0, a};
}

double rule_of_thumb_gamma0(const std::vector<Observation>& init_sample,
                            double alpha, double eta0) {
  if (init_sample.empty()) throw ConfigError("empty initialization sample");
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw ConfigError("quantile level alpha must lie in (0, 1)");

  // Borrow init_state for Phi0 and W0 so the selector sees exactly the
  // matrices the estimator will start from.
  OnlineState s = init_state(init_sample, eta0, LearningRateSchedule{1.0, 0.6},
                             Beta0Method::Zero);
  const Matrix a_mat = s.Phi.transpose() * s.W * s.Phi;
  const Matrix a_pinv = pseudo_inverse_sym(a_mat);
  if ((a_mat * a_pinv - Matrix::Identity(a_mat.rows(), a_mat.cols()))
          .cwiseAbs()
          .maxCoeff() > 1e-6)
    throw SingularInitialization(
        "Phi0' W0 Phi0 is singular; cannot form the rule-of-thumb selector",
        Eigen::SelfAdjointEigenSolver<Matrix>(a_mat).eigenvalues().minCoeff());

  // (Phi'WPhi)^+ Phi'W G_i with G_i = z_i x_i' is the rank-one matrix
  // (K z_i) x_i', whose spectral norm is |K z_i| |x_i|.
  const Matrix k_mat = a_pinv * s.Phi.transpose() * s.W;  // d_beta x d_g
  const double inv_d = 1.0 / static_cast<double>(s.d_beta());
  std::vector<double> norms;
  norms.reserve(init_sample.size());
  for (const Observation& obs : init_sample)
    norms.push_back(inv_d * (k_mat * obs.z).norm() * obs.x.norm());

  std::sort(norms.begin(), norms.end());
  const auto n0 = static_cast<std::int64_t>(norms.size());
  std::int64_t rank =
      static_cast<std::int64_t>(std::floor((1.0 - alpha) * n0)) + 1;
  rank = std::min(rank, n0);
  const double psi = norms[static_cast<std::size_t>(rank - 1)];
  if (!(psi > 0.0))
    throw DegenerateInitialization(
        "rule-of-thumb quantile is zero; all update directions vanish");
  return 1.0 / psi;
}

}  // namespace sgmm
