#include "sgmm/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>

#include "sgmm/baselines.hpp"
#include "sgmm/errors.hpp"
#include "sgmm/inference.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sgmm {

namespace {

// splitmix64 of (seed, rep): distinct well-mixed generator seeds per cell.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t rep) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (rep + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double now_minus(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct CoordCi {
  bool cover = false;
  double length = 0.0;
};

CoordCi check_ci(const CiSet& ci, double truth) {
  CoordCi r;
  r.cover = ci.lower(0) <= truth && truth <= ci.upper(0);
  r.length = ci.upper(0) - ci.lower(0);
  return r;
}

}  // namespace

RepOutcome run_replication(const RepSpec& spec, std::int64_t rep_index) {
  RepOutcome out;
  try {
    DgpConfig draw = spec.dgp;
    validate(draw);
    draw.n = spec.n0 + spec.dgp.n;
    draw.seed = mix_seed(spec.dgp.seed, static_cast<std::uint64_t>(rep_index));
    const Dataset full = generate_dataset(draw);
    const std::int64_t n = spec.dgp.n;
    const double truth =
        spec.dgp.beta_star.size() > 0 ? spec.dgp.beta_star(0) : 1.0;

    RunConfig base;
    base.n0 = spec.n0;
    base.n1 = spec.n1;
    base.eta0 = spec.eta0;
    base.gamma0 = spec.gamma0;
    base.alpha_quantile = spec.alpha_quantile;
    base.a = spec.a;

    const bool want_s2sls = spec.s2sls || spec.dwh;
    if (want_s2sls) {
      RunConfig cfg = base;
      cfg.estimator = EstimatorKind::S2SLS;
      cfg.plug_in = false;
      if (spec.dwh) cfg.dwh_sub = {0};
      ColumnSource src(full.Xt, full.Zt, full.y, 0, full.n());
      const EstimateReport rep = estimate_stream(src, full.n(), cfg);
      out.s2sls_est = rep.beta_bar(0);
      const CoordCi ci = check_ci(rep.rs_ci, truth);
      out.s2sls_rs_cover = ci.cover;
      out.s2sls_rs_len = ci.length;
      out.t_s2sls = rep.fold_seconds;
      if (rep.dwh) {
        out.dwh_reject = rep.dwh->reject_at_5pct;
        out.dwh_stat = rep.dwh->statistic;
      }
    }
    if (spec.sgmm) {
      RunConfig cfg = base;
      cfg.estimator = EstimatorKind::SGMM;
      cfg.jtest = spec.jtest;
      ColumnSource src(full.Xt, full.Zt, full.y, 0, full.n());
      const EstimateReport rep = estimate_stream(src, full.n(), cfg);
      out.sgmm_est = rep.beta_bar(0);
      const CoordCi rs = check_ci(rep.rs_ci, truth);
      out.sgmm_rs_cover = rs.cover;
      out.sgmm_rs_len = rs.length;
      const CoordCi pi = check_ci(rep.pi_ci, truth);
      out.sgmm_pi_cover = pi.cover;
      out.sgmm_pi_len = pi.length;
      out.t_sgmm = rep.fold_seconds;
      if (rep.jtest) {
        out.j_reject = rep.jtest->reject_at_5pct;
        out.j_stat = rep.jtest->statistic;
      }
    }
    if (spec.offline) {
      Dataset est;
      est.Xt = full.Xt.rightCols(n);
      est.Zt = full.Zt.rightCols(n);
      est.y = full.y.tail(n);
      const double z = normal_quantile(0.975);

      auto t0 = std::chrono::steady_clock::now();
      const OfflineFit tsls = offline_2sls(est);
      out.t_tsls = now_minus(t0);
      out.tsls_est = tsls.beta(0);
      const double se_t =
          std::sqrt(tsls.avar(0, 0) / static_cast<double>(n));
      out.tsls_cover = std::abs(tsls.beta(0) - truth) <= z * se_t;
      out.tsls_len = 2.0 * z * se_t;

      t0 = std::chrono::steady_clock::now();
      const OfflineFit gmm = offline_gmm_two_step(est);
      out.t_gmm = now_minus(t0);
      out.gmm_est = gmm.beta(0);
      const double se_g = std::sqrt(gmm.avar(0, 0) / static_cast<double>(n));
      out.gmm_cover = std::abs(gmm.beta(0) - truth) <= z * se_g;
      out.gmm_len = 2.0 * z * se_g;
      out.gmm_se = se_g;
      if (spec.sgmm) out.sgmm_minus_gmm = std::abs(out.sgmm_est - gmm.beta(0));
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

std::vector<RepOutcome> run_replications(const RepSpec& spec,
                                         int replications) {
  if (replications < 1) throw ConfigError("replications must be positive");
  std::vector<RepOutcome> out(static_cast<std::size_t>(replications));
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < replications; ++r)
    out[static_cast<std::size_t>(r)] = run_replication(spec, r);
  return out;
}

namespace {

struct Pull {
  double est = 0;
  bool cover = false;
  double len = 0;
  double time = 0;
};

template <typename F>
MethodSummary reduce_method(const std::string& name, const RepSpec& spec,
                            const std::vector<RepOutcome>& outcomes,
                            double truth, F pull) {
  MethodSummary row;
  row.method = name;
  row.n = spec.dgp.n;
  row.reps = static_cast<int>(outcomes.size());
  double sum = 0, sum_sq_err = 0, sum_cover = 0, sum_len = 0, sum_time = 0;
  int ok = 0;
  for (const RepOutcome& o : outcomes) {
    if (!o.ok) {
      ++row.failures;
      continue;
    }
    const Pull p = pull(o);
    sum += p.est;
    sum_sq_err += (p.est - truth) * (p.est - truth);
    sum_cover += p.cover ? 1.0 : 0.0;
    sum_len += p.len;
    sum_time += p.time;
    ++ok;
  }
  if (ok > 0) {
    const double mean = sum / ok;
    row.rmse = std::sqrt(sum_sq_err / ok);
    row.bias = mean - truth;
    const double var = sum_sq_err / ok - (mean - truth) * (mean - truth);
    row.sd = std::sqrt(std::max(var, 0.0));
    row.coverage = sum_cover / ok;
    row.ci_length = sum_len / ok;
    row.time_sec = sum_time / ok;
  }
  return row;
}

}  // namespace

std::vector<MethodSummary> summarize(const RepSpec& spec,
                                     const std::vector<RepOutcome>& outcomes) {
  const double truth =
      spec.dgp.beta_star.size() > 0 ? spec.dgp.beta_star(0) : 1.0;
  std::vector<MethodSummary> rows;
  if (spec.s2sls)
    rows.push_back(reduce_method("s2sls_rs", spec, outcomes, truth,
                                 [](const RepOutcome& o) {
                                   return Pull{o.s2sls_est, o.s2sls_rs_cover,
                                               o.s2sls_rs_len, o.t_s2sls};
                                 }));
  if (spec.sgmm) {
    rows.push_back(reduce_method("sgmm_rs", spec, outcomes, truth,
                                 [](const RepOutcome& o) {
                                   return Pull{o.sgmm_est, o.sgmm_rs_cover,
                                               o.sgmm_rs_len, o.t_sgmm};
                                 }));
    rows.push_back(reduce_method("sgmm_plug_in", spec, outcomes, truth,
                                 [](const RepOutcome& o) {
                                   return Pull{o.sgmm_est, o.sgmm_pi_cover,
                                               o.sgmm_pi_len, o.t_sgmm};
                                 }));
  }
  if (spec.offline) {
    rows.push_back(reduce_method("tsls", spec, outcomes, truth,
                                 [](const RepOutcome& o) {
                                   return Pull{o.tsls_est, o.tsls_cover,
                                               o.tsls_len, o.t_tsls};
                                 }));
    rows.push_back(reduce_method("gmm", spec, outcomes, truth,
                                 [](const RepOutcome& o) {
                                   return Pull{o.gmm_est, o.gmm_cover,
                                               o.gmm_len, o.t_gmm};
                                 }));
  }
  return rows;
}

namespace {

void append_number(std::string& out, double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

}  // namespace

void write_summary_csv(std::ostream& os,
                       const std::vector<MethodSummary>& rows,
                       bool include_timings) {
  std::string out =
      "method,n,reps,failures,rmse,bias,sd,coverage,ci_length,time_sec\n";
  for (const MethodSummary& r : rows) {
    out += r.method;
    out += ',' + std::to_string(r.n);
    out += ',' + std::to_string(r.reps);
    out += ',' + std::to_string(r.failures);
    out += ',';
    append_number(out, r.rmse);
    out += ',';
    append_number(out, r.bias);
    out += ',';
    append_number(out, r.sd);
    out += ',';
    append_number(out, r.coverage);
    out += ',';
    append_number(out, r.ci_length);
    out += ',';
    append_number(out, include_timings ? r.time_sec : 0.0);
    out += '\n';
  }
  os << out;
}

void print_summary(std::ostream& os, const std::vector<MethodSummary>& rows) {
  os << "method        n         reps  fail  rmse      bias      coverage  "
        "length    time(s)\n";
  char line[160];
  for (const MethodSummary& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%-12s  %-8lld  %-4d  %-4d  %-8.4f  %-+8.4f  %-8.3f  "
                  "%-8.4f  %.3f\n",
                  r.method.c_str(), static_cast<long long>(r.n), r.reps,
                  r.failures, r.rmse, r.bias, r.coverage, r.ci_length,
                  r.time_sec);
    os << line;
  }
}

}  // namespace sgmm
