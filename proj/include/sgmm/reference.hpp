#pragma once

#include <cstdint>

#include "sgmm/learning_rate.hpp"
#include "sgmm/state.hpp"
#include "sgmm/types.hpp"

// Serial reference stepper: a straight-line transcription of the recursions
// using direct matrix (pseudo-)inverses everywhere — no SMW, no caches, no
// shared code with the fast path. Kept as the equivalence oracle for tests and
// as the baseline arm of the benchmark.
namespace sgmm::reference {

struct State {
  std::int64_t i = 0;
  std::int64_t n0 = 0;
  Vector beta;
  Vector beta_bar;
  Matrix Phi;
  Matrix W;
  Vector anchor_beta;  // efficient phase only
  LearningRateSchedule schedule;
};

State from_online(const OnlineState& s);

void step_warmup(State& s, const Observation& obs);
void step_efficient(State& s, const Observation& obs);

}  // namespace sgmm::reference
