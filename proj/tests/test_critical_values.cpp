#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "sgmm/critical_values.hpp"
#include "sgmm/errors.hpp"

using namespace sgmm;

namespace {

// Rebuilds the exact per-rep increment matrix the simulator consumes, from
// its documented seeding layout (seed words, form tag, rep index).
Matrix rep_increments(int q, StatisticForm form, int grid, std::uint64_t seed,
                      int rep) {
  const int dim = (form == StatisticForm::t_type) ? 1 : q;
  const auto tag = static_cast<std::uint32_t>(
      2 * q + (form == StatisticForm::t_type ? 1 : 0));
  std::seed_seq sseq{static_cast<std::uint32_t>(seed),
                     static_cast<std::uint32_t>(seed >> 32), tag,
                     static_cast<std::uint32_t>(rep)};
  std::mt19937_64 rng(sseq);
  std::normal_distribution<double> normal;
  Matrix inc(dim, grid);
  for (int j = 0; j < grid; ++j)
    for (int c = 0; c < dim; ++c) inc(c, j) = normal(rng);
  return inc;
}

double nearest_rank(std::vector<double>& v, double p) {
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(v.size())));
  if (rank < 1) rank = 1;
  return v[rank - 1];
}

}  // namespace

TEST_CASE("critical_values: unfused statistics by hand") {
  // One-dimensional path with increments (3, 1): B(1) = 4, the only interior
  // centered sum is (3-1)/2 = 1, so M = 1/2 and t = 4 sqrt(2), F = t^2.
  Matrix inc(1, 2);
  inc << 3.0, 1.0;
  CHECK(detail::t_stat_from_increments(inc) ==
        doctest::Approx(4.0 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(detail::f_stat_from_increments(inc) ==
        doctest::Approx(32.0).epsilon(1e-14));
}

TEST_CASE("critical_values: one-dimensional F is the squared t") {
  std::mt19937_64 rng(70);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix inc(1, 40);
    for (Index j = 0; j < 40; ++j) inc(0, j) = normal(rng);
    const double t = detail::t_stat_from_increments(inc);
    const double f = detail::f_stat_from_increments(inc);
    CHECK(f == doctest::Approx(t * t).epsilon(1e-11));
  }
}

TEST_CASE("critical_values: statistics are scale and sign aware") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal;
  Matrix inc(2, 30);
  for (Index j = 0; j < 30; ++j)
    for (Index c = 0; c < 2; ++c) inc(c, j) = normal(rng);
  const double f = detail::f_stat_from_increments(inc);
  CHECK(detail::f_stat_from_increments(Matrix(2.5 * inc)) ==
        doctest::Approx(f).epsilon(1e-11));
  const double t = detail::t_stat_from_increments(inc);
  CHECK(detail::t_stat_from_increments(Matrix(-inc)) ==
        doctest::Approx(-t).epsilon(1e-12));
}

TEST_CASE("critical_values: fused simulator matches the unfused oracle") {
  const int grid = 1000, reps = 10000;
  const std::uint64_t seed = 313;
  for (const auto& [q, form] : {std::pair<int, StatisticForm>{2, StatisticForm::F_type},
                                std::pair<int, StatisticForm>{1, StatisticForm::t_type}}) {
    const CriticalValueRow fused =
        simulate_critical_value_row(q, form, grid, reps, seed);
    std::vector<double> stats(reps);
    for (int rep = 0; rep < reps; ++rep) {
      const Matrix inc = rep_increments(q, form, grid, seed, rep);
      stats[static_cast<std::size_t>(rep)] =
          (form == StatisticForm::t_type)
              ? std::abs(detail::t_stat_from_increments(inc))
              : detail::f_stat_from_increments(inc);
    }
    std::vector<double> s = stats;
    CHECK(fused.p90 == doctest::Approx(nearest_rank(s, 0.90)).epsilon(1e-9));
    CHECK(fused.p95 == doctest::Approx(nearest_rank(s, 0.95)).epsilon(1e-9));
    CHECK(fused.p975 == doctest::Approx(nearest_rank(s, 0.975)).epsilon(1e-9));
    CHECK(fused.p99 == doctest::Approx(nearest_rank(s, 0.99)).epsilon(1e-9));
  }
}

TEST_CASE("critical_values: simulation is deterministic in the seed") {
  const CriticalValueRow a =
      simulate_critical_value_row(1, StatisticForm::t_type, 1000, 10000, 5);
  const CriticalValueRow b =
      simulate_critical_value_row(1, StatisticForm::t_type, 1000, 10000, 5);
  CHECK(a.p90 == b.p90);
  CHECK(a.p95 == b.p95);
  CHECK(a.p975 == b.p975);
  CHECK(a.p99 == b.p99);
  CHECK(simulate_critical_values(1, StatisticForm::t_type, 1000, 10000, 5) ==
        a.p95);
  const CriticalValueRow c =
      simulate_critical_value_row(1, StatisticForm::t_type, 1000, 10000, 6);
  CHECK(c.p95 != a.p95);
  // coarse-grid check against the tabulated value
  CHECK(a.p95 == doctest::Approx(6.73).epsilon(0.05));
}

TEST_CASE("critical_values: embedded table shape and lookups") {
  const auto& table = fixed_b_table();
  CHECK(table.size() == 20);

  // the q = 1 values pin the generated table
  CHECK(fixed_b_critical_value(1, StatisticForm::t_type, 0.95) ==
        doctest::Approx(6.726643860868742));
  CHECK(fixed_b_critical_value(1, StatisticForm::F_type, 0.95) ==
        doctest::Approx(45.25226116126161));
  CHECK(fixed_b_critical_value(3, StatisticForm::F_type, 0.99) ==
        doctest::Approx(101.37458162379636));

  // the t law does not depend on q: every t row repeats the q = 1 row
  for (int q = 2; q <= 10; ++q)
    for (double level : {0.90, 0.95, 0.975, 0.99})
      CHECK(fixed_b_critical_value(q, StatisticForm::t_type, level) ==
            fixed_b_critical_value(1, StatisticForm::t_type, level));

  // F values grow with the restriction count at every level
  for (int q = 2; q <= 10; ++q)
    CHECK(fixed_b_critical_value(q, StatisticForm::F_type) >
          fixed_b_critical_value(q - 1, StatisticForm::F_type));

  // percentiles are ordered within each row
  for (const CriticalValueRow& row : table) {
    CHECK(row.p90 < row.p95);
    CHECK(row.p95 < row.p975);
    CHECK(row.p975 < row.p99);
  }

  // the F q = 1 row squares the t row (same limit law)
  const double t95 = fixed_b_critical_value(1, StatisticForm::t_type, 0.95);
  CHECK(fixed_b_critical_value(1, StatisticForm::F_type, 0.95) ==
        doctest::Approx(t95 * t95).epsilon(0.02));
}

TEST_CASE("critical_values: argument validation") {
  CHECK_THROWS_AS(
      simulate_critical_value_row(0, StatisticForm::F_type, 1000, 10000, 1),
      ConfigError);
  CHECK_THROWS_AS(
      simulate_critical_value_row(1, StatisticForm::F_type, 999, 10000, 1),
      ConfigError);
  CHECK_THROWS_AS(
      simulate_critical_value_row(1, StatisticForm::F_type, 1000, 9999, 1),
      ConfigError);
  CHECK_THROWS_AS(fixed_b_critical_value(11, StatisticForm::F_type),
                  ConfigError);
  CHECK_THROWS_AS(fixed_b_critical_value(0, StatisticForm::F_type),
                  ConfigError);
  CHECK_THROWS_AS(fixed_b_critical_value(1, StatisticForm::F_type, 0.93),
                  ConfigError);
}
