#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgmm/inference.hpp"
#include "sgmm/state.hpp"
#include "sgmm/stream.hpp"
#include "sgmm/types.hpp"

namespace sgmm {

enum class EstimatorKind { S2SLS, SGMM };

// Everything a run needs beyond the data itself.
struct RunConfig {
  EstimatorKind estimator = EstimatorKind::SGMM;
  std::int64_t n0 = 1000;
  std::int64_t n1 = -1;  // -1 = floor(10 sqrt(n)); SGMM only
  double eta0 = 0.0;
  double gamma0 = 0.0;          // <= 0 selects the rule of thumb
  double alpha_quantile = 0.5;  // rule-of-thumb quantile level
  double a = 0.501;
  int epochs = 1;
  std::uint64_t shuffle_seed = 0;  // multi_epoch only
  Beta0Method beta0_method = Beta0Method::Offline2SLS;

  bool plug_in = true;         // SGMM only (warmup weighting is not efficient)
  bool random_scaling = true;
  bool jtest = false;          // SGMM only
  std::vector<Index> dwh_sub;  // empty = no DWH side run
  bool dwh_precondition = true;

  Vector beta_null;  // optional Wald hypothesis; empty = skip
  bool include_timings = true;
};

struct EstimateReport {
  // config echo
  EstimatorKind estimator = EstimatorKind::SGMM;
  std::int64_t n0 = 0, n1 = 0;
  double gamma0 = 0, a = 0, eta0 = 0;
  int epoch = 1, epochs = 1;
  std::uint64_t shuffle_seed = 0;

  std::int64_t steps = 0;  // post-initialization updates so far (all epochs)
  std::int64_t n_eff = 0;  // min(steps, dataset size)

  Vector beta_bar;
  Vector beta_last;

  bool has_plug_in = false;
  Matrix plug_in_var;  // (Phi' W Phi)^{-1}
  CiSet pi_ci;

  bool has_rs = false;
  Matrix rs_var;  // V
  CiSet rs_ci;

  std::optional<TestResult> wald_pi;
  std::optional<TestResult> wald_rs;
  std::optional<TestResult> jtest;
  std::optional<TestResult> dwh;

  StepDiagnostics diag;
  double init_seconds = 0, fold_seconds = 0;
};

// Single streaming pass: first cfg.n0 records initialize, the rest are the
// estimation fold. n_total < 0 means unknown length (then SGMM requires an
// explicit n1). DWH, when requested, runs its stacked recursion on the same
// records.
EstimateReport estimate_stream(ObservationSource& src, std::int64_t n_total,
                               const RunConfig& cfg);

// Shuffled multi-epoch run over an in-memory dataset: one seeded shuffle, the
// first n0 records initialize, each epoch reshuffles the remaining n and
// continues the same state (the gamma clock never restarts). Per-epoch
// reports; plug-in intervals use min(i, n).
std::vector<EstimateReport> multi_epoch(const std::vector<Observation>& data,
                                        const RunConfig& cfg);

// Canonical key,value serialization (the byte-determinism surface).
void write_report(std::ostream& os, const EstimateReport& rep,
                  bool include_timings);
// Human-readable summary.
void print_report(std::ostream& os, const EstimateReport& rep);

}  // namespace sgmm
