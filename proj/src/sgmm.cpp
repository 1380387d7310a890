#include "sgmm/sgmm.hpp"

#include <cmath>

#include "sgmm/errors.hpp"
#include "sgmm/inference.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/moments.hpp"
#include "sgmm/smw.hpp"

namespace sgmm {

namespace detail_step {
void guard_beta(const OnlineState& s);
void finish_step(OnlineState& s, bool cache_carried);
}  // namespace detail_step

void transition_to_efficient(OnlineState& s) {
  if (s.phase == Phase::Efficient)
    throw InvalidPhase("state is already in the efficient phase");
  if (s.i < 1)
    throw ConfigError(
        "at least one warmup step must run before the efficient phase");
  s.anchor_beta = s.beta_bar;
  s.phase = Phase::Efficient;
}

void step_sgmm(OnlineState& s, const Observation& obs) {
  if (s.phase != Phase::Efficient)
    throw InvalidPhase("step_sgmm requires the efficient phase");
  validate_observation(obs, s.d_beta(), s.d_g());
  auto& sc = s.scratch;
  const double k = static_cast<double>(s.n0 + s.i);
  const double gamma = s.schedule.at(s.i + 1);

  // For a single record the anchored moment is ra * z with ra = x'anchor - y,
  // so one W z matvec serves the direction, m, the weight update, and the
  // cache core.
  sc.wz.noalias() = s.W * obs.z;
  sc.phiT_wz.noalias() = s.Phi.transpose() * sc.wz;
  const double r = obs.x.dot(s.beta) - obs.y;
  const double ra = obs.x.dot(s.anchor_beta) - obs.y;
  sc.dir.noalias() = s.inner_inv * sc.phiT_wz;
  s.beta -= (gamma * r) * sc.dir;
  detail_step::guard_beta(s);

  const double s_val = obs.z.dot(sc.wz);
  const double m = k + ra * ra * s_val;
  if (!(m > 0.0))
    throw NumericalBreakdown("nonpositive m in efficient weight update");

  bool cache_carried = false;
  if (s.inner_valid) {
    if (s_val == 0.0) {
      // z = 0: the inner matrix only picks up the scale change.
      s.inner_inv *= (k + 1.0) / k;
      cache_carried = true;
    } else {
      // For a single record the anchored update collapses to rank two:
      //   Phi'WPhi gains (k/(sm)) u2 u2' - (1/s) p p'
      // with p = Phi'Wz and u2 = p + (s/k) x, so the cache carries through a
      // 2x2 core diag(sm/k, -s) + U' H U, U = (u2, p). Both diagonal entries
      // stay O(s) as k grows, unlike the generic three-column core whose
      // columns turn colinear here.
      sc.u2 = sc.phiT_wz + (s_val / k) * obs.x;
      sc.hu.col(0).noalias() = s.inner_inv * sc.u2;
      sc.hu.col(1).noalias() = s.inner_inv * sc.phiT_wz;
      sc.core2(0, 0) = s_val * m / k + sc.u2.dot(sc.hu.col(0));
      sc.core2(0, 1) = sc.u2.dot(sc.hu.col(1));
      sc.core2(1, 0) = sc.core2(0, 1);
      sc.core2(1, 1) = -s_val + sc.phiT_wz.dot(sc.hu.col(1));
      cache_carried = detail::apply_inner_core(s.inner_inv, sc.hu.leftCols(2),
                                               sc.core2, k);
    }
    if (!cache_carried) ++s.diag.core_fallbacks;
  } else {
    ++s.diag.cache_refreshes;
  }

  const double shrink = k / (k + 1.0);
  s.Phi *= shrink;
  s.Phi.noalias() += (1.0 / (k + 1.0)) * obs.z * obs.x.transpose();
  detail::weight_apply(s.W, sc.wz, ra * ra / m, k);
  detail_step::finish_step(s, cache_carried);
}

void step_sgmm(OnlineState& s, const MomentBatch& batch) {
  if (s.phase != Phase::Efficient)
    throw InvalidPhase("step_sgmm requires the efficient phase");
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

  // Anchored moment for the weight update.
  sc.gvec.noalias() = batch.md.G * s.anchor_beta;
  sc.gvec += batch.md.H;
  sc.wg.noalias() = s.W * sc.gvec;
  const double m = k + sc.gvec.dot(sc.wg);
  if (!(m > 0.0))
    throw NumericalBreakdown("nonpositive m in efficient weight update");

  const double shrink = k / (k + 1.0);
  s.Phi *= shrink;
  s.Phi += (1.0 / (k + 1.0)) * batch.md.G;
  detail::weight_apply(s.W, sc.wg, 1.0 / m, k);
  ++s.diag.cache_refreshes;
  detail_step::finish_step(s, false);
}

namespace {

template <typename Source, typename Record>
void run_sgmm_impl(OnlineState& s, Source& src, std::int64_t n,
                   std::int64_t n1, const StepHooks& hooks) {
  if (s.phase != Phase::Warmup || s.i != 0)
    throw ConfigError("run_sgmm expects a freshly initialized state");
  n1 = resolve_n1(n, n1);
  run_s2sls(s, src, hooks, n1);
  if (s.i < n1)
    throw ConfigError("stream ended before the requested record count");
  if (hooks.jtest != nullptr) hooks.jtest->anchor(s.beta_bar);
  transition_to_efficient(s);

  Record rec;
  std::int64_t done = n1;
  while (done < n && src.next(rec)) {
    // Feed the overidentification mean before the step so it sees the same
    // g_i(beta_{i-1}) evaluation the update consumes.
    if (hooks.jtest != nullptr) {
      if constexpr (std::is_same_v<Record, Observation>)
        hooks.jtest->update(rec, s.beta);
      else
        hooks.jtest->update(rec.md, s.beta);
    }
    step_sgmm(s, rec);
    if (hooks.lrv != nullptr) hooks.lrv->update(s.beta);
    ++done;
  }
  if (done < n)
    throw ConfigError("stream ended before the requested record count");
}

}  // namespace

void run_sgmm(OnlineState& s, ObservationSource& src, std::int64_t n,
              std::int64_t n1, const StepHooks& hooks) {
  run_sgmm_impl<ObservationSource, Observation>(s, src, n, n1, hooks);
}

void run_sgmm(OnlineState& s, BatchSource& src, std::int64_t n,
              std::int64_t n1, const StepHooks& hooks) {
  run_sgmm_impl<BatchSource, MomentBatch>(s, src, n, n1, hooks);
}

}  // namespace sgmm
