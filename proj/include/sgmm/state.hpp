#pragma once

#include <cstdint>
#include <vector>

#include "sgmm/learning_rate.hpp"
#include "sgmm/types.hpp"

namespace sgmm {

enum class Phase { Warmup, Efficient };

enum class Beta0Method { Offline2SLS, Zero, Given };

struct StepDiagnostics {
  std::int64_t core_fallbacks = 0;   // ill-conditioned SMW cores -> direct recompute
  std::int64_t cache_refreshes = 0;  // other direct recomputes (cadence or rank-deficient cache)
};

// Full recursion state. Single-writer: steps mutate in place and are strictly
// sequential; copies are cheap and used by tests and the replication harness.
struct OnlineState {
  std::int64_t i = 0;   // post-initialization updates consumed
  std::int64_t n0 = 0;  // initialization mass
  Phase phase = Phase::Warmup;
  LearningRateSchedule schedule;

  Vector beta;      // beta_i
  Vector beta_bar;  // running mean of beta_1..beta_i
  Matrix Phi;       // d_g x d_beta running mean of G
  Matrix W;         // d_g x d_g weighting, symmetric PD

  Matrix inner_inv;  // cache of (Phi' W Phi)^{-1}
  bool inner_valid = false;

  Vector anchor_beta;  // frozen beta_bar at the warmup/efficient switch

  StepDiagnostics diag;

  Index d_beta() const { return beta.size(); }
  Index d_g() const { return W.rows(); }

  // Scratch buffers so steps never allocate. Sized by init_state.
  struct Scratch {
    Vector wz;       // d_g
    Vector phiT_wz;  // d_beta
    Vector dir;      // d_beta
    Matrix hu;       // d_beta x 3
    Matrix tmp_bb;   // d_beta x d_beta
    Vector u2;       // d_beta
    Vector gvec;     // d_g (general-moment path)
    Vector wg;       // d_g (general-moment path)
    Matrix core2;    // 2 x 2
    Matrix core3;    // 3 x 3
  } scratch;

  void size_scratch();
};

// Builds the state from the initialization sample:
//   Phi0 = mean z x',   W0 = (mean z z' + eta0 I)^{-1},
//   beta0 per method, beta_bar0 = beta0, i = 0, phase = Warmup.
// Throws SingularInitialization when eta0 = 0 and the Gram is singular
// (including n0 < d_g).
OnlineState init_state(const std::vector<Observation>& init_sample, double eta0,
                       const LearningRateSchedule& schedule,
                       Beta0Method beta0_method,
                       const Vector* beta0_given = nullptr);

// Cluster-mode initialization: each batch contributes its member-averaged
// G and z z'. beta0 restricted to Zero/Given.
OnlineState init_state_batches(const std::vector<MomentBatch>& init_batches,
                               double eta0, const LearningRateSchedule& schedule,
                               Beta0Method beta0_method,
                               const Vector* beta0_given = nullptr);

// Recomputes the (Phi' W Phi)^{-1} cache from scratch. inner_valid ends up
// true when the matrix is numerically full rank (a true inverse the rank-one
// updates may continue from) and false when the cache is only a pseudo-inverse.
void refresh_inner_inverse(OnlineState& s);

}  // namespace sgmm
