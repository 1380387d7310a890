#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sgmm/critical_values.hpp"
#include "sgmm/state.hpp"
#include "sgmm/types.hpp"

namespace sgmm {

// Running partial-sum moments that reconstruct the random-scaling matrix
//   V = (1/n^2) sum_s (S_s - s bbar)(S_s - s bbar)'
// exactly for any final mean bbar, in O(d^2) memory.
struct LrvAccumulator {
  std::int64_t n = 0;
  Vector S;       // running sum of the path
  Matrix sum_SS;  // sum_s S_s S_s'
  Vector sum_sS;  // sum_s s * S_s
  double sum_s2 = 0.0;

  LrvAccumulator() = default;
  explicit LrvAccumulator(Index d);

  void update(const Vector& beta_i);
  Matrix finalize(const Vector& beta_bar) const;
  Index dim() const { return S.size(); }
};

struct TestResult {
  double statistic = 0.0;
  int q = 0;  // restriction count / degrees of freedom
  double critical_value_95 = 0.0;
  bool reject_at_5pct = false;
  std::optional<double> p_value;  // chi-square tests only
};

// Per-coordinate two-sided intervals.
struct CiSet {
  Vector lower;
  Vector upper;
  double critical_value = 0.0;  // the half-width multiplier used
};

// n (bbar - h)' (Phi' W Phi) (bbar - h), chi-square(d_beta) limit. Requires
// the efficient phase; the warmup weighting does not estimate the efficient
// variance, so calls there throw InvalidPhase. n_eff < 0 means state.i.
TestResult wald_plug_in(const OnlineState& s, const Vector& hypothesis,
                        std::int64_t n_eff = -1);

// bbar_k +/- z * sqrt([(Phi' W Phi)^{-1}]_kk / n_eff).
CiSet ci_plug_in(const OnlineState& s, std::int64_t n_eff = -1,
                 double level = 0.95);

// (n/d) (bbar - h)' V^{-1} (bbar - h) against the fixed-b F_type critical
// value. The accumulator overload finalizes at bbar.
TestResult wald_random_scaling(const Vector& beta_bar, const Matrix& v_rs,
                               std::int64_t n, const Vector& hypothesis);
TestResult wald_random_scaling(const Vector& beta_bar,
                               const LrvAccumulator& acc,
                               const Vector& hypothesis);

// bbar_k +/- cv_t * sqrt(V_kk / n) with the per-coordinate fixed-b t critical
// value (q-invariant; the q=1 table row). level in {0.90, 0.95, 0.99}.
CiSet ci_random_scaling(const Vector& beta_bar, const Matrix& v_rs,
                        std::int64_t n, double level = 0.95);

// ---- Durbin-Wu-Hausman -----------------------------------------------------

// Stacked recursion (beta_i', alpha_i')': the IV half is exactly the s2sls
// step on the same stream; the OLS half is the preconditioned SGD step
//   alpha_i = alpha_{i-1} - gamma_i P_{i-1} x_i (x_i' alpha_{i-1} - y_i)
// with P the running inverse Gram of x (same rank-one update machinery as W).
struct DwhState {
  OnlineState iv;
  Vector alpha;
  Vector alpha_bar;
  Matrix P;  // d_beta x d_beta inverse Gram, preconditioned mode
  bool precondition = true;
  std::vector<Index> sub;  // tested coordinates (indices into beta)
  LrvAccumulator acc;      // tracks the stacked sub-vector, dim 2|sub|
  Vector stacked;          // scratch
  Vector px;               // scratch
};

// alpha0 comes from initialization-sample OLS; P0 = (mean x x' + eta0 I)^{-1}.
// Empty sub_indices selects all coordinates.
DwhState dwh_init(const std::vector<Observation>& init_sample, double eta0,
                  const LearningRateSchedule& schedule,
                  std::vector<Index> sub_indices, bool precondition = true,
                  Beta0Method beta0_method = Beta0Method::Offline2SLS);

void dwh_step(DwhState& s, const Observation& obs);

// (n/q) d' (Xi V Xi')^{-1} d with d = bbar_sub - abar_sub and Xi = (I, -I),
// against the F_type fixed-b critical value.
TestResult dwh_test(const DwhState& s);

// Statistic from already-reduced moments; the scalar worked example hits this.
TestResult dwh_from_moments(const Vector& diff, const Matrix& xi_v_xi,
                            std::int64_t n);

// ---- Sargan-Hansen ---------------------------------------------------------

// Running mean of anchored moments:
//   warmup:  accumulate sum G, sum H;
//   anchor:  ghat = (sum G * bbar_n1 + sum H) / n1;
//   after:   ghat_i = ((i-1) ghat_{i-1} + g_i(beta_{i-1})) / i, evaluated at
//            the pre-update iterate (the moment the update itself consumes).
// Averaging the iterate evaluations telescopes to the moment mean at the
// final Polyak average, which is what keeps J chi-square(d_g - d_beta);
// evaluating at the running mean instead would average the averages and
// inflate the degrees of freedom to d_g.
struct JtestAccumulator {
  Matrix sumG;
  Vector sumH;
  std::int64_t n_warm = 0;
  bool anchored = false;
  Vector ghat;
  std::int64_t n = 0;

  JtestAccumulator() = default;
  JtestAccumulator(Index d_beta, Index d_g);

  void warmup_update(const Observation& obs);
  void warmup_update(const MomentData& md);
  void anchor(const Vector& beta_bar_n1);
  void update(const Observation& obs, const Vector& beta_prev);
  void update(const MomentData& md, const Vector& beta_prev);
};

// J = n ghat' W ghat, chi-square(d_g - d_beta). Throws NotOveridentified when
// d_g = d_beta.
TestResult sargan_hansen(const Vector& ghat, const Matrix& w_n,
                         std::int64_t n_eff, Index d_g, Index d_beta);

// Chi-square helpers (Boost.Math under the hood).
double chi_square_quantile(int df, double p);
double chi_square_sf(int df, double x);  // upper tail P(X > x)
double normal_quantile(double p);

}  // namespace sgmm
