#pragma once

#include <cstdint>

#include "sgmm/state.hpp"
#include "sgmm/stream.hpp"
#include "sgmm/types.hpp"

namespace sgmm {

struct LrvAccumulator;   // inference.hpp
struct JtestAccumulator; // inference.hpp

// Optional per-step consumers fed by the run_* folds.
struct StepHooks {
  LrvAccumulator* lrv = nullptr;
  JtestAccumulator* jtest = nullptr;
};

// One warmup update. Order matters and is fixed: the direction uses the
// pre-update Phi and W, then Phi, the weight, the inner cache, the running
// mean, and the counter advance.
void step_s2sls(OnlineState& s, const Observation& obs);
void step_s2sls(OnlineState& s, const MomentBatch& batch);

// Folds step_s2sls over the stream (up to max_steps records when >= 0).
// Deterministic given stream order and state.
void run_s2sls(OnlineState& s, ObservationSource& src,
               const StepHooks& hooks = {}, std::int64_t max_steps = -1);
void run_s2sls(OnlineState& s, BatchSource& src, const StepHooks& hooks = {},
               std::int64_t max_steps = -1);

// kAutoN1 selects floor(10 sqrt(n)). resolve_n1 validates 1 <= n1 < n.
inline constexpr std::int64_t kAutoN1 = -1;
std::int64_t resolve_n1(std::int64_t n, std::int64_t n1);

// The low-rank inner-cache updates are re-anchored to a direct inverse this
// often. Carried error compounds fastest in the efficient phase, where the
// weighting rescales every step; 256 keeps the accumulated cache drift a
// couple of orders below the 1e-8 stream-equivalence budget at ~200 amortized
// flops per step.
inline constexpr std::int64_t kCacheRefreshPeriod = 256;

}  // namespace sgmm
