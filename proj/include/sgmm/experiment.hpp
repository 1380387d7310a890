#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgmm/dgp.hpp"
#include "sgmm/driver.hpp"
#include "sgmm/types.hpp"

namespace sgmm {

// One replication cell: which estimators to run on a fresh draw of the design.
// The DGP draws n0 + dgp.n observations; the first n0 initialize the online
// estimators, the remaining dgp.n are both the estimation stream and the
// offline oracles' sample.
struct RepSpec {
  DgpConfig dgp;
  std::int64_t n0 = 1000;
  std::int64_t n1 = -1;
  double eta0 = 0.0;
  double alpha_quantile = 0.5;
  double a = 0.501;
  double gamma0 = 0.0;  // <= 0 = rule of thumb

  bool s2sls = true;
  bool sgmm = true;
  bool offline = true;
  bool jtest = false;  // with sgmm
  bool dwh = false;    // stacked s2sls/ols side run, sub = {0}
};

// Per-replication record for the endogenous coefficient (coordinate 1).
struct RepOutcome {
  bool ok = false;
  std::string error;

  double s2sls_est = 0, sgmm_est = 0, tsls_est = 0, gmm_est = 0;
  bool s2sls_rs_cover = false, sgmm_rs_cover = false, sgmm_pi_cover = false;
  bool tsls_cover = false, gmm_cover = false;
  double s2sls_rs_len = 0, sgmm_rs_len = 0, sgmm_pi_len = 0;
  double tsls_len = 0, gmm_len = 0;
  double gmm_se = 0;            // offline GMM standard error, coordinate 1
  double sgmm_minus_gmm = 0;    // |bbar_sgmm - bhat_gmm|, coordinate 1
  bool j_reject = false;
  double j_stat = 0;
  bool dwh_reject = false;
  double dwh_stat = 0;
  double t_s2sls = 0, t_sgmm = 0, t_tsls = 0, t_gmm = 0;  // fold seconds
};

// Runs one replication; rep_index seeds the draw (together with dgp.seed).
RepOutcome run_replication(const RepSpec& spec, std::int64_t rep_index);

// Replications run in an OpenMP loop writing into per-index slots, then a
// sequential reduce; results are identical for any thread count.
std::vector<RepOutcome> run_replications(const RepSpec& spec, int replications);

// Aggregated summary, one row per method flavor (Table-style columns).
struct MethodSummary {
  std::string method;
  std::int64_t n = 0;
  int reps = 0;
  int failures = 0;
  double rmse = 0, bias = 0, sd = 0;
  double coverage = 0, ci_length = 0;
  double time_sec = 0;
};

std::vector<MethodSummary> summarize(const RepSpec& spec,
                                     const std::vector<RepOutcome>& outcomes);

void write_summary_csv(std::ostream& os,
                       const std::vector<MethodSummary>& rows,
                       bool include_timings);
void print_summary(std::ostream& os, const std::vector<MethodSummary>& rows);

}  // namespace sgmm
