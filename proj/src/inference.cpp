#include "sgmm/inference.hpp"

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "sgmm/baselines.hpp"
#include "sgmm/errors.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/s2sls.hpp"
#include "sgmm/smw.hpp"

namespace sgmm {

// ---- random-scaling accumulator --------------------------------------------

LrvAccumulator::LrvAccumulator(Index d)
    : S(Vector::Zero(d)),
      sum_SS(Matrix::Zero(d, d)),
      sum_sS(Vector::Zero(d)) {}

void LrvAccumulator::update(const Vector& beta_i) {
  if (S.size() == 0) {
    S = Vector::Zero(beta_i.size());
    sum_SS = Matrix::Zero(beta_i.size(), beta_i.size());
    sum_sS = Vector::Zero(beta_i.size());
  }
  if (beta_i.size() != S.size())
    throw SchemaError("accumulator dimension changed mid-stream");
  ++n;
  S += beta_i;
  sum_SS.noalias() += S * S.transpose();
  const auto w = static_cast<double>(n);
  sum_sS += w * S;
  sum_s2 += w * w;
}

Matrix LrvAccumulator::finalize(const Vector& beta_bar) const {
  if (n == 0) throw ConfigError("random-scaling accumulator saw no steps");
  if (beta_bar.size() != S.size())
    throw SchemaError("mean dimension disagrees with the accumulator");
  Matrix v = sum_SS;
  v.noalias() -= sum_sS * beta_bar.transpose();
  v.noalias() -= beta_bar * sum_sS.transpose();
  v.noalias() += sum_s2 * beta_bar * beta_bar.transpose();
  v /= static_cast<double>(n) * static_cast<double>(n);
  symmetrize(v);
  return v;
}

// ---- chi-square / normal helpers -------------------------------------------

double chi_square_quantile(int df, double p) {
  if (df < 1 || !(p > 0.0 && p < 1.0))
    throw ConfigError("chi-square quantile needs df >= 1 and p in (0,1)");
  return boost::math::quantile(boost::math::chi_squared(df), p);
}

double chi_square_sf(int df, double x) {
  if (df < 1) throw ConfigError("chi-square tail needs df >= 1");
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(
      boost::math::complement(boost::math::chi_squared(df), x));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("normal quantile needs p in (0,1)");
  return boost::math::quantile(boost::math::normal(), p);
}

// ---- Wald tests and intervals ----------------------------------------------

TestResult wald_plug_in(const OnlineState& s, const Vector& hypothesis,
                        std::int64_t n_eff) {
  if (s.phase != Phase::Efficient)
    throw InvalidPhase(
        "plug-in inference is only valid in the efficient phase");
  if (hypothesis.size() != s.d_beta())
    throw ConfigError("hypothesis length disagrees with d_beta");
  if (n_eff < 0) n_eff = s.i;
  if (n_eff < 1) throw ConfigError("plug-in Wald needs at least one step");
  const Matrix inner = s.Phi.transpose() * s.W * s.Phi;
  const Vector d = s.beta_bar - hypothesis;
  const int q = static_cast<int>(s.d_beta());
  TestResult r;
  r.statistic = static_cast<double>(n_eff) * d.dot(inner * d);
  r.q = q;
  r.critical_value_95 = chi_square_quantile(q, 0.95);
  r.reject_at_5pct = r.statistic > r.critical_value_95;
  r.p_value = chi_square_sf(q, r.statistic);
  return r;
}

CiSet ci_plug_in(const OnlineState& s, std::int64_t n_eff, double level) {
  if (s.phase != Phase::Efficient)
    throw InvalidPhase(
        "plug-in inference is only valid in the efficient phase");
  if (!(level > 0.0 && level < 1.0))
    throw ConfigError("confidence level must lie in (0,1)");
  if (n_eff < 0) n_eff = s.i;
  if (n_eff < 1) throw ConfigError("plug-in intervals need at least one step");
  Matrix inner = s.Phi.transpose() * s.W * s.Phi;
  symmetrize(inner);
  const Matrix cov = pseudo_inverse_sym(inner);
  const double z = normal_quantile(0.5 * (1.0 + level));
  CiSet ci;
  ci.critical_value = z;
  ci.lower.resize(s.d_beta());
  ci.upper.resize(s.d_beta());
  for (Index j = 0; j < s.d_beta(); ++j) {
    const double half =
        z * std::sqrt(cov(j, j) / static_cast<double>(n_eff));
    ci.lower(j) = s.beta_bar(j) - half;
    ci.upper(j) = s.beta_bar(j) + half;
  }
  return ci;
}

namespace {

// d' V^{-1} d via LDLT with a singularity gate.
double quad_form_solve(const Matrix& v, const Vector& d) {
  Eigen::LDLT<Matrix> ldlt(v);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13)
    throw SingularLrv("random-scaling variance matrix is singular");
  return d.dot(ldlt.solve(d));
}

}  // namespace

TestResult wald_random_scaling(const Vector& beta_bar, const Matrix& v_rs,
                               std::int64_t n, const Vector& hypothesis) {
  if (beta_bar.size() != hypothesis.size() ||
      v_rs.rows() != beta_bar.size() || v_rs.cols() != beta_bar.size())
    throw ConfigError("random-scaling Wald inputs disagree in dimension");
  if (n < 1) throw ConfigError("random-scaling Wald needs n >= 1");
  const int q = static_cast<int>(beta_bar.size());
  const Vector d = beta_bar - hypothesis;
  TestResult r;
  r.statistic = static_cast<double>(n) / static_cast<double>(q) *
                quad_form_solve(v_rs, d);
  r.q = q;
  r.critical_value_95 = fixed_b_critical_value(q, StatisticForm::F_type, 0.95);
  r.reject_at_5pct = r.statistic > r.critical_value_95;
  return r;
}

TestResult wald_random_scaling(const Vector& beta_bar,
                               const LrvAccumulator& acc,
                               const Vector& hypothesis) {
  return wald_random_scaling(beta_bar, acc.finalize(beta_bar), acc.n,
                             hypothesis);
}

CiSet ci_random_scaling(const Vector& beta_bar, const Matrix& v_rs,
                        std::int64_t n, double level) {
  if (v_rs.rows() != beta_bar.size() || v_rs.cols() != beta_bar.size())
    throw ConfigError("random-scaling interval inputs disagree in dimension");
  if (n < 1) throw ConfigError("random-scaling intervals need n >= 1");
  const double cv = fixed_b_critical_value(1, StatisticForm::t_type, level);
  CiSet ci;
  ci.critical_value = cv;
  ci.lower.resize(beta_bar.size());
  ci.upper.resize(beta_bar.size());
  for (Index j = 0; j < beta_bar.size(); ++j) {
    if (!(v_rs(j, j) > 0.0))
      throw SingularLrv("nonpositive random-scaling variance diagonal");
    const double half = cv * std::sqrt(v_rs(j, j) / static_cast<double>(n));
    ci.lower(j) = beta_bar(j) - half;
    ci.upper(j) = beta_bar(j) + half;
  }
  return ci;
}

// ---- Durbin-Wu-Hausman -----------------------------------------------------

DwhState dwh_init(const std::vector<Observation>& init_sample, double eta0,
                  const LearningRateSchedule& schedule,
                  std::vector<Index> sub_indices, bool precondition,
                  Beta0Method beta0_method) {
  DwhState d;
  d.iv = init_state(init_sample, eta0, schedule, beta0_method);
  const Index db = d.iv.d_beta();

  d.alpha = (beta0_method == Beta0Method::Zero) ? Vector::Zero(db)
                                                : offline_ols(init_sample);
  d.alpha_bar = d.alpha;
  d.precondition = precondition;

  if (precondition) {
    Matrix gram = Matrix::Zero(db, db);
    for (const Observation& obs : init_sample)
      gram.noalias() += obs.x * obs.x.transpose();
    gram /= static_cast<double>(init_sample.size());
    if (eta0 > 0.0) gram += eta0 * Matrix::Identity(db, db);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!(min_eig > 0.0) ||
        !(min_eig > 1e-13 * eig.eigenvalues().maxCoeff()))
      throw SingularInitialization("singular regressor Gram with eta0 = 0",
                                   min_eig);
    d.P = eig.eigenvectors() *
          eig.eigenvalues().cwiseInverse().asDiagonal() *
          eig.eigenvectors().transpose();
    symmetrize(d.P);
  } else {
    d.P = Matrix::Identity(db, db);
  }

  if (sub_indices.empty()) {
    sub_indices.resize(static_cast<std::size_t>(db));
    for (Index j = 0; j < db; ++j) sub_indices[static_cast<std::size_t>(j)] = j;
  }
  for (Index j : sub_indices)
    if (j < 0 || j >= db)
      throw ConfigError("tested coordinate index out of range");
  d.sub = std::move(sub_indices);

  const auto ds = static_cast<Index>(d.sub.size());
  d.acc = LrvAccumulator(2 * ds);
  d.stacked.resize(2 * ds);
  d.px.resize(db);
  return d;
}

void dwh_step(DwhState& s, const Observation& obs) {
  const double gamma = s.iv.schedule.at(s.iv.i + 1);
  const double k = static_cast<double>(s.iv.n0 + s.iv.i);
  step_s2sls(s.iv, obs);

  // OLS half on the shared clock; direction uses the pre-update P.
  const double r = obs.x.dot(s.alpha) - obs.y;
  if (s.precondition) {
    s.px.noalias() = s.P * obs.x;
    s.alpha -= (gamma * r) * s.px;
    smw_weight_update(s.P, obs.x, k);
  } else {
    s.alpha -= (gamma * r) * obs.x;
  }
  const double norm = s.alpha.norm();
  if (!std::isfinite(norm) || norm > kDivergenceNorm)
    throw DivergenceDetected(s.iv.i, norm);
  s.alpha_bar += (s.alpha - s.alpha_bar) / static_cast<double>(s.iv.i);

  const auto ds = static_cast<Index>(s.sub.size());
  for (Index j = 0; j < ds; ++j) {
    const Index c = s.sub[static_cast<std::size_t>(j)];
    s.stacked(j) = s.iv.beta(c);
    s.stacked(ds + j) = s.alpha(c);
  }
  s.acc.update(s.stacked);
}

TestResult dwh_test(const DwhState& s) {
  if (s.acc.n == 0) throw ConfigError("exogeneity test saw no steps");
  const auto ds = static_cast<Index>(s.sub.size());
  Vector mean_stacked(2 * ds);
  Vector diff(ds);
  for (Index j = 0; j < ds; ++j) {
    const Index c = s.sub[static_cast<std::size_t>(j)];
    mean_stacked(j) = s.iv.beta_bar(c);
    mean_stacked(ds + j) = s.alpha_bar(c);
    diff(j) = s.iv.beta_bar(c) - s.alpha_bar(c);
  }
  const Matrix v = s.acc.finalize(mean_stacked);
  Matrix xi_v_xi = v.topLeftCorner(ds, ds) - v.topRightCorner(ds, ds) -
                   v.bottomLeftCorner(ds, ds) + v.bottomRightCorner(ds, ds);
  symmetrize(xi_v_xi);
  return dwh_from_moments(diff, xi_v_xi, s.acc.n);
}

TestResult dwh_from_moments(const Vector& diff, const Matrix& xi_v_xi,
                            std::int64_t n) {
  if (xi_v_xi.rows() != diff.size() || xi_v_xi.cols() != diff.size())
    throw ConfigError("exogeneity test inputs disagree in dimension");
  if (n < 1) throw ConfigError("exogeneity test needs n >= 1");
  const int q = static_cast<int>(diff.size());
  TestResult r;
  r.statistic = static_cast<double>(n) / static_cast<double>(q) *
                quad_form_solve(xi_v_xi, diff);
  r.q = q;
  r.critical_value_95 = fixed_b_critical_value(q, StatisticForm::F_type, 0.95);
  r.reject_at_5pct = r.statistic > r.critical_value_95;
  return r;
}

// ---- Sargan-Hansen ---------------------------------------------------------

JtestAccumulator::JtestAccumulator(Index d_beta, Index d_g)
    : sumG(Matrix::Zero(d_g, d_beta)), sumH(Vector::Zero(d_g)) {}

void JtestAccumulator::warmup_update(const Observation& obs) {
  if (anchored)
    throw InvalidPhase("warmup_update after the accumulator was anchored");
  if (sumG.size() == 0) {
    sumG = Matrix::Zero(obs.z.size(), obs.x.size());
    sumH = Vector::Zero(obs.z.size());
  }
  sumG.noalias() += obs.z * obs.x.transpose();
  sumH -= obs.y * obs.z;
  ++n_warm;
}

void JtestAccumulator::warmup_update(const MomentData& md) {
  if (anchored)
    throw InvalidPhase("warmup_update after the accumulator was anchored");
  if (sumG.size() == 0) {
    sumG = Matrix::Zero(md.G.rows(), md.G.cols());
    sumH = Vector::Zero(md.H.size());
  }
  sumG += md.G;
  sumH += md.H;
  ++n_warm;
}

void JtestAccumulator::anchor(const Vector& beta_bar_n1) {
  if (anchored) throw InvalidPhase("accumulator is already anchored");
  if (n_warm == 0)
    throw ConfigError("cannot anchor before any warmup record");
  ghat = (sumG * beta_bar_n1 + sumH) / static_cast<double>(n_warm);
  n = n_warm;
  anchored = true;
}

void JtestAccumulator::update(const Observation& obs,
                              const Vector& beta_prev) {
  if (!anchored) throw InvalidPhase("update before anchoring");
  ++n;
  const double resid = obs.x.dot(beta_prev) - obs.y;
  ghat += (resid * obs.z - ghat) / static_cast<double>(n);
}

void JtestAccumulator::update(const MomentData& md, const Vector& beta_prev) {
  if (!anchored) throw InvalidPhase("update before anchoring");
  ++n;
  ghat += (md.G * beta_prev + md.H - ghat) / static_cast<double>(n);
}

TestResult sargan_hansen(const Vector& ghat, const Matrix& w_n,
                         std::int64_t n_eff, Index d_g, Index d_beta) {
  if (d_g <= d_beta)
    throw NotOveridentified(
        "the overidentification test needs d_g > d_beta");
  if (ghat.size() != d_g || w_n.rows() != d_g || w_n.cols() != d_g)
    throw ConfigError("overidentification test inputs disagree in dimension");
  if (n_eff < 1) throw ConfigError("overidentification test needs n >= 1");
  const int df = static_cast<int>(d_g - d_beta);
  TestResult r;
  r.statistic = static_cast<double>(n_eff) * ghat.dot(w_n * ghat);
  r.q = df;
  r.critical_value_95 = chi_square_quantile(df, 0.95);
  r.reject_at_5pct = r.statistic > r.critical_value_95;
  r.p_value = chi_square_sf(df, r.statistic);
  return r;
}

}  // namespace sgmm
