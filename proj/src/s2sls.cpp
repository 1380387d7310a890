#include "sgmm/s2sls.hpp"

#include <cmath>

#include "sgmm/errors.hpp"
#include "sgmm/inference.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/moments.hpp"
#include "sgmm/smw.hpp"

namespace sgmm {

namespace detail_step {

void guard_beta(const OnlineState& s) {
  const double norm = s.beta.norm();
  if (!std::isfinite(norm) || norm > kDivergenceNorm)
    throw DivergenceDetected(s.i + 1, norm);
}

// Shared tail: advance the counter, fold beta into the running mean, and
// re-anchor the cache when the rank-one update could not carry it.
void finish_step(OnlineState& s, bool cache_carried) {
  ++s.i;
  s.beta_bar += (s.beta - s.beta_bar) / static_cast<double>(s.i);
  if (!cache_carried) {
    refresh_inner_inverse(s);
  } else if (s.i % kCacheRefreshPeriod == 0) {
    refresh_inner_inverse(s);
    ++s.diag.cache_refreshes;
  }
}

}  // namespace detail_step

void step_s2sls(OnlineState& s, const Observation& obs) {
  if (s.phase != Phase::Warmup)
    throw InvalidPhase("step_s2sls requires the warmup phase");
  validate_observation(obs, s.d_beta(), s.d_g());
  auto& sc = s.scratch;
  const double k = static_cast<double>(s.n0 + s.i);
  const double gamma = s.schedule.at(s.i + 1);

  // Everything below the beta update reads only pre-update quantities,
  // computed once here: wz = W z and phiT_wz = Phi' W z feed the direction,
  // m, the weight update, and the cache core.
  sc.wz.noalias() = s.W * obs.z;
  sc.phiT_wz.noalias() = s.Phi.transpose() * sc.wz;
  const double r = obs.x.dot(s.beta) - obs.y;
  sc.dir.noalias() = s.inner_inv * sc.phiT_wz;
  s.beta -= (gamma * r) * sc.dir;
  detail_step::guard_beta(s);

  const double m = k + obs.z.dot(sc.wz);
  if (!(m > 0.0))
    throw NumericalBreakdown("nonpositive m in warmup weight update");

  bool cache_carried = false;
  if (s.inner_valid) {
    // 2x2 core with U = (x - Phi'Wz, x), D = diag(-m, k).
    sc.u2 = obs.x - sc.phiT_wz;
    sc.hu.col(0).noalias() = s.inner_inv * sc.u2;
    sc.hu.col(1).noalias() = s.inner_inv * obs.x;
    sc.core2(0, 0) = -m + sc.u2.dot(sc.hu.col(0));
    sc.core2(0, 1) = sc.u2.dot(sc.hu.col(1));
    sc.core2(1, 0) = sc.core2(0, 1);
    sc.core2(1, 1) = k + obs.x.dot(sc.hu.col(1));
    cache_carried =
        detail::apply_inner_core(s.inner_inv, sc.hu.leftCols(2), sc.core2, k);
    if (!cache_carried) ++s.diag.core_fallbacks;
  } else {
    ++s.diag.cache_refreshes;
  }

  const double shrink = k / (k + 1.0);
  s.Phi *= shrink;
  s.Phi.noalias() += (1.0 / (k + 1.0)) * obs.z * obs.x.transpose();
  detail::weight_apply(s.W, sc.wz, 1.0 / m, k);
  detail_step::finish_step(s, cache_carried);
}

void step_s2sls(OnlineState& s, const MomentBatch& batch) {
  if (s.phase != Phase::Warmup)
    throw InvalidPhase("step_s2sls requires the warmup phase");
  if (batch.md.G.rows() != s.d_g() || batch.md.G.cols() != s.d_beta() ||
      batch.md.H.size() != s.d_g())
    throw SchemaError("batch dimensions disagree with the state");
  auto& sc = s.scratch;
  const double k = static_cast<double>(s.n0 + s.i);
  const double gamma = s.schedule.at(s.i + 1);

  sc.gvec.noalias() = batch.md.G * s.beta;
  sc.gvec += batch.md.H;
  sc.wg.noalias() = s.W * sc.gvec;
  sc.phiT_wz.noalias() = s.Phi.transpose() * sc.wg;
  sc.dir.noalias() = s.inner_inv * sc.phiT_wz;
  s.beta -= gamma * sc.dir;
  detail_step::guard_beta(s);

  const double shrink = k / (k + 1.0);
  s.Phi *= shrink;
  s.Phi += (1.0 / (k + 1.0)) * batch.md.G;
  smw_weight_update_rank_t(s.W, batch.zs, k);
  // General-rank records skip the rank-one cache carry; recompute directly.
  ++s.diag.cache_refreshes;
  detail_step::finish_step(s, false);
}

void run_s2sls(OnlineState& s, ObservationSource& src, const StepHooks& hooks,
               std::int64_t max_steps) {
  Observation obs;
  std::int64_t done = 0;
  while ((max_steps < 0 || done < max_steps) && src.next(obs)) {
    if (hooks.jtest != nullptr) hooks.jtest->warmup_update(obs);
    step_s2sls(s, obs);
    if (hooks.lrv != nullptr) hooks.lrv->update(s.beta);
    ++done;
  }
}

void run_s2sls(OnlineState& s, BatchSource& src, const StepHooks& hooks,
               std::int64_t max_steps) {
  MomentBatch batch;
  std::int64_t done = 0;
  while ((max_steps < 0 || done < max_steps) && src.next(batch)) {
    if (hooks.jtest != nullptr) hooks.jtest->warmup_update(batch.md);
    step_s2sls(s, batch);
    if (hooks.lrv != nullptr) hooks.lrv->update(s.beta);
    ++done;
  }
}

std::int64_t resolve_n1(std::int64_t n, std::int64_t n1) {
  if (n < 2) throw ConfigError("need at least two records to split phases");
  if (n1 == kAutoN1) {
    n1 = static_cast<std::int64_t>(
        std::floor(10.0 * std::sqrt(static_cast<double>(n))));
    if (n1 < 1) n1 = 1;
    if (n1 >= n) n1 = n - 1;
    return n1;
  }
  if (n1 < 1 || n1 >= n)
    throw ConfigError("n1 must satisfy 1 <= n1 < n");
  return n1;
}

}  // namespace sgmm
