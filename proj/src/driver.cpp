#include "sgmm/driver.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <numeric>
#include <ostream>
#include <random>

#include "sgmm/errors.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/s2sls.hpp"
#include "sgmm/sgmm.hpp"

namespace sgmm {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void validate_config(const RunConfig& cfg) {
  if (cfg.n0 < 1) throw ConfigError("n0 must be positive");
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(cfg.alpha_quantile > 0.0 && cfg.alpha_quantile < 1.0))
    throw ConfigError("alpha_quantile must lie in (0,1)");
  if (cfg.jtest && cfg.estimator != EstimatorKind::SGMM)
    throw ConfigError(
        "the overidentification test needs the efficient estimator");
}

// Forwards records unchanged while feeding the exogeneity side recursion.
class DwhTee final : public ObservationSource {
 public:
  DwhTee(ObservationSource& inner, DwhState& dwh) : inner_(inner), dwh_(dwh) {}
  bool next(Observation& out) override {
    if (!inner_.next(out)) return false;
    dwh_step(dwh_, out);
    return true;
  }

 private:
  ObservationSource& inner_;
  DwhState& dwh_;
};

struct FoldPieces {
  OnlineState* state = nullptr;  // the reported estimator state
  LrvAccumulator lrv;
  JtestAccumulator jacc;
  std::optional<DwhState> dwh;
};

EstimateReport build_report(const RunConfig& cfg, const FoldPieces& pieces,
                            std::int64_t n1_resolved, std::int64_t n_eff,
                            double init_seconds, double fold_seconds) {
  const OnlineState& st = *pieces.state;
  EstimateReport rep;
  rep.estimator = cfg.estimator;
  rep.n0 = cfg.n0;
  rep.n1 = n1_resolved;
  rep.gamma0 = st.schedule.gamma0;
  rep.a = st.schedule.a;
  rep.eta0 = cfg.eta0;
  rep.epochs = cfg.epochs;
  rep.shuffle_seed = cfg.shuffle_seed;
  rep.steps = st.i;
  rep.n_eff = n_eff;
  rep.beta_bar = st.beta_bar;
  rep.beta_last = st.beta;
  rep.diag = st.diag;
  rep.init_seconds = init_seconds;
  rep.fold_seconds = fold_seconds;

  if (cfg.plug_in && st.phase == Phase::Efficient) {
    Matrix inner = st.Phi.transpose() * st.W * st.Phi;
    symmetrize(inner);
    rep.plug_in_var = pseudo_inverse_sym(inner);
    rep.pi_ci = ci_plug_in(st, n_eff);
    rep.has_plug_in = true;
  }
  if (cfg.random_scaling && pieces.lrv.n > 0) {
    rep.rs_var = pieces.lrv.finalize(st.beta_bar);
    rep.rs_ci = ci_random_scaling(st.beta_bar, rep.rs_var, pieces.lrv.n);
    rep.has_rs = true;
  }
  if (cfg.beta_null.size() != 0) {
    if (rep.has_plug_in) rep.wald_pi = wald_plug_in(st, cfg.beta_null, n_eff);
    if (rep.has_rs)
      rep.wald_rs = wald_random_scaling(st.beta_bar, rep.rs_var, pieces.lrv.n,
                                        cfg.beta_null);
  }
  if (cfg.jtest && pieces.jacc.anchored)
    rep.jtest = sargan_hansen(pieces.jacc.ghat, st.W, n_eff, st.d_g(),
                              st.d_beta());
  if (pieces.dwh) rep.dwh = dwh_test(*pieces.dwh);
  return rep;
}

}  // namespace

EstimateReport estimate_stream(ObservationSource& src, std::int64_t n_total,
                               const RunConfig& cfg) {
  validate_config(cfg);
  if (cfg.epochs != 1)
    throw ConfigError("multi-epoch runs need an in-memory dataset");
  const auto t_init = std::chrono::steady_clock::now();

  std::vector<Observation> init_sample;
  init_sample.reserve(static_cast<std::size_t>(cfg.n0));
  Observation obs;
  for (std::int64_t j = 0; j < cfg.n0; ++j) {
    if (!src.next(obs))
      throw ConfigError("stream ended inside the initialization sample");
    init_sample.push_back(obs);
  }
  const double gamma0 =
      cfg.gamma0 > 0.0
          ? cfg.gamma0
          : rule_of_thumb_gamma0(init_sample, cfg.alpha_quantile, cfg.eta0);
  const LearningRateSchedule schedule = make_schedule(gamma0, cfg.a);

  const std::int64_t n_est = n_total < 0 ? -1 : n_total - cfg.n0;
  if (n_total >= 0 && n_est < 1)
    throw ConfigError("no records left after initialization");

  FoldPieces pieces;
  OnlineState own_state;
  if (!cfg.dwh_sub.empty())
    pieces.dwh = dwh_init(init_sample, cfg.eta0, schedule, cfg.dwh_sub,
                          cfg.dwh_precondition, cfg.beta0_method);
  const bool share_iv =
      pieces.dwh && cfg.estimator == EstimatorKind::S2SLS;
  if (!share_iv)
    own_state = init_state(init_sample, cfg.eta0, schedule, cfg.beta0_method);
  pieces.state = share_iv ? &pieces.dwh->iv : &own_state;
  const double init_seconds = seconds_since(t_init);

  StepHooks hooks;
  if (cfg.random_scaling) hooks.lrv = &pieces.lrv;
  if (cfg.jtest) hooks.jtest = &pieces.jacc;

  std::int64_t n1_resolved = 0;
  const auto t_fold = std::chrono::steady_clock::now();
  if (cfg.estimator == EstimatorKind::S2SLS) {
    if (share_iv) {
      std::int64_t done = 0;
      while ((n_est < 0 || done < n_est) && src.next(obs)) {
        dwh_step(*pieces.dwh, obs);
        if (hooks.lrv != nullptr) hooks.lrv->update(pieces.dwh->iv.beta);
        ++done;
      }
    } else if (pieces.dwh) {
      DwhTee tee(src, *pieces.dwh);
      run_s2sls(*pieces.state, tee, hooks, n_est);
    } else {
      run_s2sls(*pieces.state, src, hooks, n_est);
    }
    if (n_est >= 0 && pieces.state->i < n_est)
      throw ConfigError("stream ended before the requested record count");
  } else {
    if (n_est < 0 && cfg.n1 < 0)
      throw ConfigError(
          "unknown stream length: the efficient estimator needs an explicit "
          "n1");
    const std::int64_t n_for_split = n_est < 0 ? cfg.n1 + 1 : n_est;
    n1_resolved = resolve_n1(n_for_split, cfg.n1);
    ObservationSource* feed = &src;
    std::optional<DwhTee> tee;
    if (pieces.dwh) {
      tee.emplace(src, *pieces.dwh);
      feed = &*tee;
    }
    if (n_est >= 0) {
      run_sgmm(*pieces.state, *feed, n_est, n1_resolved, hooks);
    } else {
      run_s2sls(*pieces.state, *feed, hooks, n1_resolved);
      if (pieces.state->i < n1_resolved)
        throw ConfigError("stream ended inside the warmup fold");
      if (hooks.jtest != nullptr) hooks.jtest->anchor(pieces.state->beta_bar);
      transition_to_efficient(*pieces.state);
      while (feed->next(obs)) {
        if (hooks.jtest != nullptr)
          hooks.jtest->update(obs, pieces.state->beta);
        step_sgmm(*pieces.state, obs);
        if (hooks.lrv != nullptr) hooks.lrv->update(pieces.state->beta);
      }
    }
  }
  const double fold_seconds = seconds_since(t_fold);

  const std::int64_t n_eff =
      n_est >= 0 ? std::min(pieces.state->i, n_est) : pieces.state->i;
  EstimateReport rep = build_report(cfg, pieces, n1_resolved, n_eff,
                                    init_seconds, fold_seconds);
  if (!cfg.include_timings) {
    rep.init_seconds = 0.0;
    rep.fold_seconds = 0.0;
  }
  return rep;
}

std::vector<EstimateReport> multi_epoch(const std::vector<Observation>& data,
                                        const RunConfig& cfg) {
  validate_config(cfg);
  const auto n_data = static_cast<std::int64_t>(data.size());
  if (n_data <= cfg.n0)
    throw ConfigError("dataset not larger than the initialization sample");
  const std::int64_t n_est = n_data - cfg.n0;

  const auto t_init = std::chrono::steady_clock::now();
  std::mt19937_64 rng(cfg.shuffle_seed);
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n_data));
  std::iota(perm.begin(), perm.end(), std::int64_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<Observation> init_sample(static_cast<std::size_t>(cfg.n0));
  for (std::int64_t j = 0; j < cfg.n0; ++j)
    init_sample[static_cast<std::size_t>(j)] =
        data[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
  std::vector<std::int64_t> order(
      perm.begin() + static_cast<std::ptrdiff_t>(cfg.n0), perm.end());

  const double gamma0 =
      cfg.gamma0 > 0.0
          ? cfg.gamma0
          : rule_of_thumb_gamma0(init_sample, cfg.alpha_quantile, cfg.eta0);
  const LearningRateSchedule schedule = make_schedule(gamma0, cfg.a);

  FoldPieces pieces;
  OnlineState own_state;
  if (!cfg.dwh_sub.empty())
    pieces.dwh = dwh_init(init_sample, cfg.eta0, schedule, cfg.dwh_sub,
                          cfg.dwh_precondition, cfg.beta0_method);
  const bool share_iv =
      pieces.dwh && cfg.estimator == EstimatorKind::S2SLS;
  if (!share_iv)
    own_state = init_state(init_sample, cfg.eta0, schedule, cfg.beta0_method);
  pieces.state = share_iv ? &pieces.dwh->iv : &own_state;
  double init_seconds = seconds_since(t_init);

  StepHooks hooks;
  if (cfg.random_scaling) hooks.lrv = &pieces.lrv;
  if (cfg.jtest) hooks.jtest = &pieces.jacc;

  const std::int64_t n1_resolved =
      cfg.estimator == EstimatorKind::SGMM ? resolve_n1(n_est, cfg.n1) : 0;

  std::vector<EstimateReport> reports;
  Observation obs;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (epoch > 1) std::shuffle(order.begin(), order.end(), rng);
    VectorSource src(data, order);
    const auto t_fold = std::chrono::steady_clock::now();
    if (cfg.estimator == EstimatorKind::S2SLS) {
      if (share_iv) {
        while (src.next(obs)) {
          dwh_step(*pieces.dwh, obs);
          if (hooks.lrv != nullptr) hooks.lrv->update(pieces.dwh->iv.beta);
        }
      } else if (pieces.dwh) {
        DwhTee tee(src, *pieces.dwh);
        run_s2sls(*pieces.state, tee, hooks);
      } else {
        run_s2sls(*pieces.state, src, hooks);
      }
    } else {
      ObservationSource* feed = &src;
      std::optional<DwhTee> tee;
      if (pieces.dwh) {
        tee.emplace(src, *pieces.dwh);
        feed = &*tee;
      }
      if (epoch == 1) {
        run_sgmm(*pieces.state, *feed, n_est, n1_resolved, hooks);
      } else {
        while (feed->next(obs)) {
          if (hooks.jtest != nullptr)
            hooks.jtest->update(obs, pieces.state->beta);
          step_sgmm(*pieces.state, obs);
          if (hooks.lrv != nullptr) hooks.lrv->update(pieces.state->beta);
        }
      }
    }
    const double fold_seconds = seconds_since(t_fold);

    // The information cap: later epochs revisit the same n_est records.
    const std::int64_t n_eff = std::min(pieces.state->i, n_est);
    EstimateReport rep = build_report(cfg, pieces, n1_resolved, n_eff,
                                      init_seconds, fold_seconds);
    rep.epoch = epoch;
    if (!cfg.include_timings) {
      rep.init_seconds = 0.0;
      rep.fold_seconds = 0.0;
    }
    reports.push_back(std::move(rep));
    init_seconds = 0.0;
  }
  return reports;
}

// ---- serialization ---------------------------------------------------------

namespace {

void append_number(std::string& out, double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

void append_vector(std::string& out, const Vector& v) {
  for (Index j = 0; j < v.size(); ++j) {
    out += ',';
    append_number(out, v(j));
  }
}

void append_matrix(std::string& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      out += ',';
      append_number(out, m(i, j));
    }
}

void append_test(std::string& out, const char* name, const TestResult& t) {
  out += name;
  out += ',';
  append_number(out, t.statistic);
  out += ',';
  out += std::to_string(t.q);
  out += ',';
  append_number(out, t.critical_value_95);
  out += ',';
  out += t.reject_at_5pct ? '1' : '0';
  if (t.p_value) {
    out += ',';
    append_number(out, *t.p_value);
  }
  out += '\n';
}

}  // namespace

void write_report(std::ostream& os, const EstimateReport& rep,
                  bool include_timings) {
  std::string out;
  out += "estimator,";
  out += rep.estimator == EstimatorKind::S2SLS ? "S2SLS" : "SGMM";
  out += '\n';
  out += "n0," + std::to_string(rep.n0) + '\n';
  out += "n1," + std::to_string(rep.n1) + '\n';
  out += "gamma0,";
  append_number(out, rep.gamma0);
  out += "\na,";
  append_number(out, rep.a);
  out += "\neta0,";
  append_number(out, rep.eta0);
  out += '\n';
  out += "epoch," + std::to_string(rep.epoch) + '\n';
  out += "epochs," + std::to_string(rep.epochs) + '\n';
  out += "shuffle_seed," + std::to_string(rep.shuffle_seed) + '\n';
  out += "steps," + std::to_string(rep.steps) + '\n';
  out += "n_eff," + std::to_string(rep.n_eff) + '\n';
  out += "beta_bar";
  append_vector(out, rep.beta_bar);
  out += "\nbeta_last";
  append_vector(out, rep.beta_last);
  out += '\n';
  if (rep.has_plug_in) {
    out += "plug_in_var";
    append_matrix(out, rep.plug_in_var);
    out += "\npi_ci_lower";
    append_vector(out, rep.pi_ci.lower);
    out += "\npi_ci_upper";
    append_vector(out, rep.pi_ci.upper);
    out += "\npi_ci_critical,";
    append_number(out, rep.pi_ci.critical_value);
    out += '\n';
  }
  if (rep.has_rs) {
    out += "rs_var";
    append_matrix(out, rep.rs_var);
    out += "\nrs_ci_lower";
    append_vector(out, rep.rs_ci.lower);
    out += "\nrs_ci_upper";
    append_vector(out, rep.rs_ci.upper);
    out += "\nrs_ci_critical,";
    append_number(out, rep.rs_ci.critical_value);
    out += '\n';
  }
  if (rep.wald_pi) append_test(out, "wald_plug_in", *rep.wald_pi);
  if (rep.wald_rs) append_test(out, "wald_random_scaling", *rep.wald_rs);
  if (rep.jtest) append_test(out, "jtest", *rep.jtest);
  if (rep.dwh) append_test(out, "dwh", *rep.dwh);
  out += "core_fallbacks," + std::to_string(rep.diag.core_fallbacks) + '\n';
  out += "cache_refreshes," + std::to_string(rep.diag.cache_refreshes) + '\n';
  out += "init_seconds,";
  append_number(out, include_timings ? rep.init_seconds : 0.0);
  out += "\nfold_seconds,";
  append_number(out, include_timings ? rep.fold_seconds : 0.0);
  out += '\n';
  os << out;
}

void print_report(std::ostream& os, const EstimateReport& rep) {
  os << (rep.estimator == EstimatorKind::S2SLS ? "S2SLS" : "SGMM")
     << " estimate after " << rep.steps << " steps (n0 = " << rep.n0;
  if (rep.n1 > 0) os << ", n1 = " << rep.n1;
  os << ", gamma0 = " << rep.gamma0 << ", a = " << rep.a << ")\n";
  if (rep.epochs > 1) os << "epoch " << rep.epoch << "/" << rep.epochs << "\n";
  os << "coordinate  estimate";
  if (rep.has_plug_in) os << "  [plug-in 95% CI]";
  if (rep.has_rs) os << "  [random-scaling 95% CI]";
  os << "\n";
  for (Index j = 0; j < rep.beta_bar.size(); ++j) {
    os << "  beta_" << (j + 1) << "  " << rep.beta_bar(j);
    if (rep.has_plug_in)
      os << "  [" << rep.pi_ci.lower(j) << ", " << rep.pi_ci.upper(j) << "]";
    if (rep.has_rs)
      os << "  [" << rep.rs_ci.lower(j) << ", " << rep.rs_ci.upper(j) << "]";
    os << "\n";
  }
  auto show_test = [&](const char* name, const TestResult& t) {
    os << name << ": statistic " << t.statistic << " (q = " << t.q
       << ", 5% critical value " << t.critical_value_95 << ") -> "
       << (t.reject_at_5pct ? "reject" : "fail to reject");
    if (t.p_value) os << ", p = " << *t.p_value;
    os << "\n";
  };
  if (rep.wald_pi) show_test("plug-in Wald", *rep.wald_pi);
  if (rep.wald_rs) show_test("random-scaling Wald", *rep.wald_rs);
  if (rep.jtest) show_test("overidentification J", *rep.jtest);
  if (rep.dwh) show_test("exogeneity (DWH)", *rep.dwh);
  if (rep.fold_seconds > 0.0)
    os << "timing: init " << rep.init_seconds << " s, fold "
       << rep.fold_seconds << " s\n";
}

}  // namespace sgmm
