#pragma once

#include <cstdint>

#include "sgmm/s2sls.hpp"
#include "sgmm/state.hpp"
#include "sgmm/stream.hpp"

namespace sgmm {

// Switches the state into the efficient phase: freezes anchor_beta at the
// current running mean; beta, beta_bar, Phi, W, i carry over unchanged.
// Throws InvalidPhase if already efficient, ConfigError if no warmup step ran.
void transition_to_efficient(OnlineState& s);

// One efficient-phase update: same direction form as the warmup, but the
// weight update consumes the anchored moment g = G beta_anchor + H instead of
// the instrument vector.
void step_sgmm(OnlineState& s, const Observation& obs);
void step_sgmm(OnlineState& s, const MomentBatch& batch);

// Two-phase driver: warmup via step_s2sls for n1 records, transition, then
// step_sgmm for the rest. Feeds hooks.lrv every step and hooks.jtest with the
// warmup sums, the anchor, and every efficient-phase record.
void run_sgmm(OnlineState& s, ObservationSource& src, std::int64_t n,
              std::int64_t n1 = kAutoN1, const StepHooks& hooks = {});
void run_sgmm(OnlineState& s, BatchSource& src, std::int64_t n,
              std::int64_t n1 = kAutoN1, const StepHooks& hooks = {});

}  // namespace sgmm
