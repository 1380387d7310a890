#include "sgmm/critical_values.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <random>

#include "sgmm/errors.hpp"

namespace sgmm {

namespace detail {

double f_stat_from_increments(const Matrix& increments) {
  const Index q = increments.rows();
  const Index grid = increments.cols();
  const Vector b1 = increments.rowwise().sum();
  Matrix m = Matrix::Zero(q, q);
  Vector partial = Vector::Zero(q);
  for (Index j = 0; j < grid; ++j) {
    partial += increments.col(j);
    const double r = static_cast<double>(j + 1) / static_cast<double>(grid);
    const Vector d = partial - r * b1;
    m.noalias() += d * d.transpose();
  }
  m /= static_cast<double>(grid);
  return b1.dot(m.ldlt().solve(b1)) / static_cast<double>(q);
}

double t_stat_from_increments(const Matrix& increments) {
  const Index grid = increments.cols();
  const double b1 = increments.row(0).sum();
  double m = 0.0;
  double partial = 0.0;
  for (Index j = 0; j < grid; ++j) {
    partial += increments(0, j);
    const double r = static_cast<double>(j + 1) / static_cast<double>(grid);
    const double d = partial - r * b1;
    m += d * d;
  }
  m /= static_cast<double>(grid);
  return b1 / std::sqrt(m);
}

}  // namespace detail

namespace {

// One simulated statistic. Fused accumulation over the unscaled partial sums
// s_j of N(0,1) increments:
//   M_u = sum_j (s_j - (j/G) s_G)(s_j - (j/G) s_G)'
//       = sum_ss - sum_js s_G'/G - s_G sum_js'/G + sum_j2 s_G s_G'/G^2,
//   F   = (G/q) s_G' M_u^{-1} s_G,    t = s_G sqrt(G) / sqrt(M_u).
double one_rep(int q, StatisticForm form, int grid, std::uint64_t seed,
               int rep) {
  const int dim = (form == StatisticForm::t_type) ? 1 : q;
  const auto tag = static_cast<std::uint32_t>(
      2 * q + (form == StatisticForm::t_type ? 1 : 0));
  std::seed_seq sseq{static_cast<std::uint32_t>(seed),
                     static_cast<std::uint32_t>(seed >> 32), tag,
                     static_cast<std::uint32_t>(rep)};
  std::mt19937_64 rng(sseq);
  std::normal_distribution<double> normal;

  const double g = static_cast<double>(grid);
  if (dim == 1) {
    double s = 0.0, sum_ss = 0.0, sum_js = 0.0, sum_j2 = 0.0;
    for (int j = 1; j <= grid; ++j) {
      s += normal(rng);
      sum_ss += s * s;
      sum_js += j * s;
      sum_j2 += static_cast<double>(j) * static_cast<double>(j);
    }
    const double mu = sum_ss - 2.0 * sum_js * s / g + sum_j2 * s * s / (g * g);
    if (form == StatisticForm::t_type)
      return std::abs(s) * std::sqrt(g / mu);
    return g * s * s / mu;  // q = 1 F_type
  }

  Vector s = Vector::Zero(dim);
  Matrix sum_ss = Matrix::Zero(dim, dim);
  Vector sum_js = Vector::Zero(dim);
  double sum_j2 = 0.0;
  for (int j = 1; j <= grid; ++j) {
    for (int c = 0; c < dim; ++c) s(c) += normal(rng);
    sum_ss.selfadjointView<Eigen::Lower>().rankUpdate(s, 1.0);
    sum_js += static_cast<double>(j) * s;
    sum_j2 += static_cast<double>(j) * static_cast<double>(j);
  }
  Matrix mu = Matrix(sum_ss.selfadjointView<Eigen::Lower>());
  mu.noalias() -= sum_js * (s / g).transpose();
  mu.noalias() -= (s / g) * sum_js.transpose();
  mu.noalias() += (sum_j2 / (g * g)) * s * s.transpose();
  return (g / static_cast<double>(q)) * s.dot(mu.ldlt().solve(s));
}

double nearest_rank(const std::vector<double>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::int64_t>(std::ceil(p * n));
  if (rank < 1) rank = 1;
  if (rank > static_cast<std::int64_t>(sorted.size()))
    rank = static_cast<std::int64_t>(sorted.size());
  return sorted[static_cast<std::size_t>(rank - 1)];
}

}  // namespace

CriticalValueRow simulate_critical_value_row(int q, StatisticForm form,
                                             int grid, int reps,
                                             std::uint64_t seed) {
  if (q < 1) throw ConfigError("critical-value simulation needs q >= 1");
  if (grid < 1000 || reps < 10000)
    throw ConfigError(
        "critical-value simulation needs grid >= 1000 and reps >= 10000");
  std::vector<double> stats(static_cast<std::size_t>(reps));
#pragma omp parallel for schedule(static)
  for (int rep = 0; rep < reps; ++rep)
    stats[static_cast<std::size_t>(rep)] = one_rep(q, form, grid, seed, rep);
  std::sort(stats.begin(), stats.end());
  CriticalValueRow row;
  row.form = form;
  row.q = q;
  row.p90 = nearest_rank(stats, 0.90);
  row.p95 = nearest_rank(stats, 0.95);
  row.p975 = nearest_rank(stats, 0.975);
  row.p99 = nearest_rank(stats, 0.99);
  return row;
}

double simulate_critical_values(int q, StatisticForm form, int grid, int reps,
                                std::uint64_t seed) {
  return simulate_critical_value_row(q, form, grid, reps, seed).p95;
}

const std::vector<CriticalValueRow>& fixed_b_table() {
  static const std::vector<CriticalValueRow> table = {
#include "critical_values_table.inc"
  };
  return table;
}

double fixed_b_critical_value(int q, StatisticForm form, double level) {
  int col;
  if (level == 0.90)
    col = 0;
  else if (level == 0.95)
    col = 1;
  else if (level == 0.975)
    col = 2;
  else if (level == 0.99)
    col = 3;
  else
    throw ConfigError(
        "tabulated levels are 0.90, 0.95, 0.975, 0.99");
  for (const CriticalValueRow& row : fixed_b_table()) {
    if (row.form == form && row.q == q) {
      switch (col) {
        case 0: return row.p90;
        case 1: return row.p95;
        case 2: return row.p975;
        default: return row.p99;
      }
    }
  }
  throw ConfigError("no tabulated critical value for q = " +
                    std::to_string(q));
}

}  // namespace sgmm
