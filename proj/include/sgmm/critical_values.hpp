#pragma once

#include <cstdint>
#include <vector>

#include "sgmm/types.hpp"

namespace sgmm {

// F_type: (1/q) B(1)' (int_0^1 D(r) D(r)' dr)^{-1} B(1) with D(r) = B(r) - r B(1)
//         for a q-dimensional standard Brownian motion B.
// t_type: the per-coordinate self-normalized statistic; a functional of a
//         univariate Brownian path, so its law does not depend on q.
//         Tabulated quantiles are of |t| (two-sided convention).
enum class StatisticForm { F_type, t_type };

struct CriticalValueRow {
  StatisticForm form;
  int q;
  double p90;
  double p95;
  double p975;
  double p99;
};

// Monte Carlo quantiles of the fixed-b limit law: `reps` independent paths,
// each discretized on `grid` points. Deterministic given the seed and
// independent of thread count. Pre: grid >= 1000, reps >= 10000.
CriticalValueRow simulate_critical_value_row(int q, StatisticForm form,
                                             int grid, int reps,
                                             std::uint64_t seed);

// The 95% value alone (two-sided 5% for t_type).
double simulate_critical_values(int q, StatisticForm form, int grid, int reps,
                                std::uint64_t seed);

// Embedded table for q = 1..10, both forms; generated in-tree by the
// `critvals` tool (seed and settings recorded in the table source).
const std::vector<CriticalValueRow>& fixed_b_table();

// Lookup; level must be one of 0.90, 0.95, 0.975, 0.99. Throws ConfigError
// for q outside the table.
double fixed_b_critical_value(int q, StatisticForm form, double level = 0.95);

namespace detail {

// Plain (unfused) evaluation of both statistics from a matrix of path
// increments (columns = grid steps, rows = coordinates); oracle for the fused
// accumulation inside the simulator. t uses coordinate 0.
double f_stat_from_increments(const Matrix& increments);
double t_stat_from_increments(const Matrix& increments);

}  // namespace detail

}  // namespace sgmm
