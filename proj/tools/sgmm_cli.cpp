// Command line front end: estimate / simulate / experiment / critvals.
// Each library error class maps to its own exit code so scripts can branch.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgmm/baselines.hpp"
#include "sgmm/critical_values.hpp"
#include "sgmm/csv.hpp"
#include "sgmm/dgp.hpp"
#include "sgmm/driver.hpp"
#include "sgmm/errors.hpp"
#include "sgmm/experiment.hpp"
#include "sgmm/inference.hpp"
#include "sgmm/learning_rate.hpp"
#include "sgmm/linalg.hpp"
#include "sgmm/moments.hpp"
#include "sgmm/s2sls.hpp"
#include "sgmm/sgmm.hpp"

namespace {

using namespace sgmm;

constexpr int kExitConfig = 2;
constexpr int kExitSchema = 3;
constexpr int kExitIngest = 4;
constexpr int kExitSingularInit = 5;
constexpr int kExitSingularDesign = 6;
constexpr int kExitDegenerateInit = 7;
constexpr int kExitBreakdown = 8;
constexpr int kExitDivergence = 9;
constexpr int kExitPhase = 10;
constexpr int kExitSingularLrv = 11;
constexpr int kExitNotOverid = 12;

void append_number(std::string& out, double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

// ---- estimate --------------------------------------------------------------

struct EstimateArgs {
  std::string input;
  std::string y_col = "y";
  std::vector<std::string> x_cols;
  std::vector<std::string> z_cols;
  std::string cluster_col;
  std::string report_path;

  std::string estimator = "sgmm";
  RunConfig cfg;
  std::vector<int> dwh;  // 1-based coordinates
  bool dwh_all = false;
  std::vector<double> beta_null;
  std::string beta0 = "offline2sls";
  bool no_timings = false;
};

void emit_report(const EstimateArgs& a, const EstimateReport& rep) {
  if (!a.report_path.empty()) {
    std::ofstream out(a.report_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open report path: " + a.report_path);
    write_report(out, rep, !a.no_timings);
  }
  print_report(std::cout, rep);
}

// Cluster mode: each cluster is one recursion unit, n0 counts clusters, and
// beta0 falls back to zero (no per-record design to run offline 2SLS on).
void run_cluster_estimate(const EstimateArgs& a) {
  CsvSchema schema{a.y_col, a.x_cols, a.z_cols, a.cluster_col};
  CsvStream stream(a.input, schema);
  const RunConfig& cfg = a.cfg;

  std::vector<MomentBatch> init_batches;
  std::vector<Observation> init_members;
  Cluster c;
  for (std::int64_t j = 0; j < cfg.n0; ++j) {
    if (!stream.next_cluster(c))
      throw ConfigError("stream ended inside the initialization sample");
    init_batches.push_back(moment_batch(c));
    init_members.insert(init_members.end(), c.members.begin(),
                        c.members.end());
  }
  const double gamma0 =
      cfg.gamma0 > 0.0
          ? cfg.gamma0
          : rule_of_thumb_gamma0(init_members, cfg.alpha_quantile, cfg.eta0);
  OnlineState st = init_state_batches(init_batches, cfg.eta0,
                                      make_schedule(gamma0, cfg.a),
                                      Beta0Method::Zero);

  struct Src final : BatchSource {
    CsvStream& s;
    explicit Src(CsvStream& s) : s(s) {}
    bool next(MomentBatch& out) override {
      Cluster c;
      if (!s.next_cluster(c)) return false;
      out = moment_batch(c);
      return true;
    }
  } src(stream);

  LrvAccumulator lrv;
  JtestAccumulator jacc;
  StepHooks hooks;
  if (cfg.random_scaling) hooks.lrv = &lrv;
  if (cfg.jtest) hooks.jtest = &jacc;

  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.estimator == EstimatorKind::S2SLS) {
    run_s2sls(st, src, hooks);
  } else {
    if (cfg.n1 < 1)
      throw ConfigError("cluster streams need an explicit n1 (batch count)");
    run_s2sls(st, src, hooks, cfg.n1);
    if (st.i < cfg.n1)
      throw ConfigError("stream ended inside the warmup fold");
    if (hooks.jtest != nullptr) hooks.jtest->anchor(st.beta_bar);
    transition_to_efficient(st);
    MomentBatch b;
    while (src.next(b)) {
      step_sgmm(st, b);
      if (hooks.lrv != nullptr) hooks.lrv->update(st.beta);
      if (hooks.jtest != nullptr) hooks.jtest->update(b.md, st.beta_bar);
    }
  }
  const double fold_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  EstimateReport rep;
  rep.estimator = cfg.estimator;
  rep.n0 = cfg.n0;
  rep.n1 = cfg.estimator == EstimatorKind::SGMM ? cfg.n1 : 0;
  rep.gamma0 = st.schedule.gamma0;
  rep.a = st.schedule.a;
  rep.eta0 = cfg.eta0;
  rep.steps = st.i;
  rep.n_eff = st.i;
  rep.beta_bar = st.beta_bar;
  rep.beta_last = st.beta;
  rep.diag = st.diag;
  rep.fold_seconds = fold_seconds;
  if (cfg.plug_in && st.phase == Phase::Efficient) {
    Matrix inner = st.Phi.transpose() * st.W * st.Phi;
    rep.plug_in_var = pseudo_inverse_sym(Matrix(0.5 * (inner + inner.transpose())));
    rep.pi_ci = ci_plug_in(st, st.i);
    rep.has_plug_in = true;
  }
  if (cfg.random_scaling && lrv.n > 0) {
    rep.rs_var = lrv.finalize(st.beta_bar);
    rep.rs_ci = ci_random_scaling(st.beta_bar, rep.rs_var, lrv.n);
    rep.has_rs = true;
  }
  if (cfg.jtest && jacc.anchored)
    rep.jtest = sargan_hansen(jacc.ghat, st.W, st.i, st.d_g(), st.d_beta());
  emit_report(a, rep);
}

int run_estimate(EstimateArgs& a) {
  RunConfig& cfg = a.cfg;
  cfg.estimator =
      a.estimator == "s2sls" ? EstimatorKind::S2SLS : EstimatorKind::SGMM;
  if (a.estimator != "s2sls" && a.estimator != "sgmm")
    throw ConfigError("estimator must be s2sls or sgmm");
  if (a.beta0 == "zero")
    cfg.beta0_method = Beta0Method::Zero;
  else if (a.beta0 == "offline2sls")
    cfg.beta0_method = Beta0Method::Offline2SLS;
  else
    throw ConfigError("beta0 must be zero or offline2sls");
  cfg.include_timings = !a.no_timings;
  if (a.x_cols.empty() || a.z_cols.empty())
    throw ConfigError("--x and --z column lists are required");
  if (a.dwh_all) {
    cfg.dwh_sub.clear();
    for (std::size_t j = 0; j < a.x_cols.size(); ++j)
      cfg.dwh_sub.push_back(static_cast<Index>(j));
  } else {
    for (int idx : a.dwh) {
      if (idx < 1 || idx > static_cast<int>(a.x_cols.size()))
        throw ConfigError("--dwh coordinate out of range");
      cfg.dwh_sub.push_back(static_cast<Index>(idx - 1));
    }
  }
  if (!a.beta_null.empty()) {
    cfg.beta_null.resize(static_cast<Index>(a.beta_null.size()));
    for (std::size_t j = 0; j < a.beta_null.size(); ++j)
      cfg.beta_null(static_cast<Index>(j)) = a.beta_null[j];
  }

  if (!a.cluster_col.empty()) {
    if (!cfg.dwh_sub.empty())
      throw ConfigError("the exogeneity test needs per-record data, not "
                        "clusters");
    if (cfg.epochs != 1)
      throw ConfigError("multi-epoch cluster runs are not supported");
    run_cluster_estimate(a);
    return 0;
  }

  CsvSchema schema{a.y_col, a.x_cols, a.z_cols, std::nullopt};
  if (cfg.epochs > 1) {
    const std::vector<Observation> data = read_csv(a.input, schema);
    const std::vector<EstimateReport> reports = multi_epoch(data, cfg);
    if (!a.report_path.empty()) {
      std::ofstream out(a.report_path, std::ios::binary);
      if (!out) throw ConfigError("cannot open report path: " + a.report_path);
      for (const EstimateReport& rep : reports)
        write_report(out, rep, !a.no_timings);
    }
    for (const EstimateReport& rep : reports) print_report(std::cout, rep);
    return 0;
  }
  if (cfg.estimator == EstimatorKind::SGMM && cfg.n1 < 0) {
    // Auto n1 needs the stream length; a CSV file is finite, so count it.
    const std::vector<Observation> data = read_csv(a.input, schema);
    VectorSource src(data);
    emit_report(a, estimate_stream(
                       src, static_cast<std::int64_t>(data.size()), cfg));
    return 0;
  }
  CsvStream stream(a.input, schema);
  emit_report(a, estimate_stream(stream, -1, cfg));
  return 0;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  DgpConfig dgp;
  std::vector<double> beta_star;
  bool exogenous = false;
  std::string out;
};

int run_simulate(SimulateArgs& a) {
  a.dgp.endogenous = !a.exogenous;
  if (!a.beta_star.empty()) {
    a.dgp.beta_star.resize(static_cast<Index>(a.beta_star.size()));
    for (std::size_t j = 0; j < a.beta_star.size(); ++j)
      a.dgp.beta_star(static_cast<Index>(j)) = a.beta_star[j];
  }
  validate(a.dgp);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw ConfigError("cannot open output path: " + a.out);

  std::string line = "y";
  for (int j = 1; j <= a.dgp.p; ++j) line += ",x" + std::to_string(j);
  for (int j = 1; j <= a.dgp.q; ++j) line += ",z" + std::to_string(j);
  line += '\n';
  out << line;

  DgpStream stream(a.dgp);
  Observation obs;
  while (stream.next(obs)) {
    line.clear();
    append_number(line, obs.y);
    for (Index j = 0; j < obs.x.size(); ++j) {
      line += ',';
      append_number(line, obs.x(j));
    }
    for (Index j = 0; j < obs.z.size(); ++j) {
      line += ',';
      append_number(line, obs.z(j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw ConfigError("write failed: " + a.out);
  return 0;
}

// ---- experiment ------------------------------------------------------------

struct ExperimentArgs {
  RepSpec spec;
  int reps = 100;
  bool exogenous = false;
  bool no_s2sls = false, no_sgmm = false, no_offline = false;
  bool no_timings = false;
  std::string out;
  std::string per_rep;
};

int run_experiment_cmd(ExperimentArgs& a) {
  a.spec.dgp.endogenous = !a.exogenous;
  a.spec.s2sls = !a.no_s2sls;
  a.spec.sgmm = !a.no_sgmm;
  a.spec.offline = !a.no_offline;
  validate(a.spec.dgp);
  const std::vector<RepOutcome> outcomes = run_replications(a.spec, a.reps);
  const std::vector<MethodSummary> rows = summarize(a.spec, outcomes);
  if (!a.out.empty()) {
    std::ofstream os(a.out, std::ios::binary);
    if (!os) throw ConfigError("cannot open output path: " + a.out);
    write_summary_csv(os, rows, !a.no_timings);
  }
  if (!a.per_rep.empty()) {
    std::ofstream os(a.per_rep, std::ios::binary);
    if (!os) throw ConfigError("cannot open output path: " + a.per_rep);
    std::string line =
        "rep,ok,error,s2sls_est,sgmm_est,tsls_est,gmm_est,j_stat,j_reject,"
        "dwh_stat,dwh_reject\n";
    os << line;
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
      const RepOutcome& o = outcomes[r];
      line = std::to_string(r);
      line += o.ok ? ",1," : ",0,";
      line += o.error;
      for (double v : {o.s2sls_est, o.sgmm_est, o.tsls_est, o.gmm_est,
                       o.j_stat}) {
        line += ',';
        append_number(line, v);
      }
      line += o.j_reject ? ",1," : ",0,";
      append_number(line, o.dwh_stat);
      line += o.dwh_reject ? ",1\n" : ",0\n";
      os << line;
    }
  }
  print_summary(std::cout, rows);
  int failures = 0;
  for (const RepOutcome& o : outcomes) failures += o.ok ? 0 : 1;
  if (failures > 0)
    std::cerr << failures << " of " << outcomes.size()
              << " replications failed and were excluded\n";
  return 0;
}

// ---- critvals --------------------------------------------------------------

struct CritvalsArgs {
  std::string form = "both";
  int q_max = 10;
  int grid = 10000;
  int reps = 50000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_critvals(CritvalsArgs& a) {
  if (a.form != "f" && a.form != "t" && a.form != "both")
    throw ConfigError("form must be f, t, or both");
  if (a.q_max < 1) throw ConfigError("q-max must be positive");
  std::vector<StatisticForm> forms;
  if (a.form != "t") forms.push_back(StatisticForm::F_type);
  if (a.form != "f") forms.push_back(StatisticForm::t_type);

  std::string text = "form,q,p90,p95,p975,p99\n";
  for (StatisticForm form : forms) {
    // t_type is q-invariant; one row covers every q.
    const int rows = form == StatisticForm::t_type ? 1 : a.q_max;
    for (int q = 1; q <= rows; ++q) {
      const CriticalValueRow row =
          simulate_critical_value_row(q, form, a.grid, a.reps, a.seed);
      text += form == StatisticForm::F_type ? 'F' : 't';
      text += ',' + std::to_string(q);
      for (double v : {row.p90, row.p95, row.p975, row.p99}) {
        text += ',';
        append_number(text, v);
      }
      text += '\n';
      std::cerr << "done: " << (form == StatisticForm::F_type ? 'F' : 't')
                << " q=" << q << "\n";
    }
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(a.out, std::ios::binary);
    if (!os) throw ConfigError("cannot open output path: " + a.out);
    os << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming instrumental-variable estimation"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* cmd_est = app.add_subcommand("estimate", "Estimate from a CSV");
  cmd_est->set_config("--config", "", "Plain key=value file; flags override");
  cmd_est->add_option("--input", est.input, "Input CSV path")->required();
  cmd_est->add_option("--y", est.y_col, "Outcome column");
  cmd_est->add_option("--x", est.x_cols, "Regressor columns")
      ->delimiter(',')
      ->required();
  cmd_est->add_option("--z", est.z_cols, "Instrument columns")
      ->delimiter(',')
      ->required();
  cmd_est->add_option("--cluster", est.cluster_col,
                      "Cluster id column (cluster-sorted input)");
  cmd_est->add_option("--estimator", est.estimator, "s2sls or sgmm");
  cmd_est->add_option("--n0", est.cfg.n0, "Initialization sample size");
  cmd_est->add_option("--n1", est.cfg.n1,
                      "Warmup length; -1 = floor(10 sqrt(n))");
  cmd_est->add_option("--eta0", est.cfg.eta0, "Initialization ridge");
  cmd_est->add_option("--gamma0", est.cfg.gamma0,
                      "Learning rate scale; <= 0 = rule of thumb");
  cmd_est->add_option("--alpha-quantile", est.cfg.alpha_quantile,
                      "Rule-of-thumb quantile level");
  cmd_est->add_option("--a", est.cfg.a, "Learning rate exponent");
  cmd_est->add_option("--epochs", est.cfg.epochs, "Shuffled epochs");
  cmd_est->add_option("--shuffle-seed", est.cfg.shuffle_seed, "Shuffle seed");
  cmd_est->add_option("--beta0", est.beta0, "zero or offline2sls");
  cmd_est->add_flag("--plug-in,!--no-plug-in", est.cfg.plug_in,
                    "Plug-in intervals (default on)");
  cmd_est->add_flag("--random-scaling,!--no-random-scaling",
                    est.cfg.random_scaling,
                    "Random-scaling intervals (default on)");
  cmd_est->add_flag("--jtest", est.cfg.jtest, "Overidentification test");
  cmd_est->add_option("--dwh", est.dwh,
                      "Exogeneity test coordinates (1-based)")
      ->delimiter(',');
  cmd_est->add_flag("--dwh-all", est.dwh_all,
                    "Exogeneity test on all coordinates");
  cmd_est->add_flag("--dwh-precondition,!--no-dwh-precondition",
                    est.cfg.dwh_precondition,
                    "Precondition the exogeneity side run (default on)");
  cmd_est->add_option("--beta-null", est.beta_null,
                      "Wald hypothesis vector")
      ->delimiter(',');
  cmd_est->add_option("--report", est.report_path, "Report CSV path");
  cmd_est->add_flag("--no-timings", est.no_timings,
                    "Zero the timing fields (stable bytes)");

  SimulateArgs sim;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "Write a synthetic CSV");
  cmd_sim->add_option("--n", sim.dgp.n, "Observations")->required();
  cmd_sim->add_option("--p", sim.dgp.p, "Regressor count");
  cmd_sim->add_option("--q", sim.dgp.q, "Instrument count");
  cmd_sim->add_option("--p-low", sim.dgp.p_low, "Regressor spillover cutoff");
  cmd_sim->add_option("--q-low", sim.dgp.q_low, "Instrument strength cutoff");
  cmd_sim->add_option("--rho", sim.dgp.rho, "Instrument correlation");
  cmd_sim->add_option("--sigma-scale", sim.dgp.sigma_scale, "Noise scale");
  cmd_sim->add_option("--seed", sim.dgp.seed, "Generator seed");
  cmd_sim->add_flag("--exogenous", sim.exogenous,
                    "Drop the endogeneity channel");
  cmd_sim->add_option("--invalid-coeff", sim.dgp.invalid_coeff,
                      "Instrument-invalidity coefficient");
  cmd_sim->add_option("--beta-star", sim.beta_star, "True coefficients")
      ->delimiter(',');
  cmd_sim->add_option("--out", sim.out, "Output CSV path")->required();

  ExperimentArgs exp;
  CLI::App* cmd_exp = app.add_subcommand("experiment", "Monte Carlo summary");
  cmd_exp->set_config("--config", "", "Plain key=value file; flags override");
  cmd_exp->add_option("--n", exp.spec.dgp.n, "Estimation stream length")
      ->required();
  cmd_exp->add_option("--reps", exp.reps, "Replications")->required();
  cmd_exp->add_option("--p", exp.spec.dgp.p, "Regressor count");
  cmd_exp->add_option("--q", exp.spec.dgp.q, "Instrument count");
  cmd_exp->add_option("--p-low", exp.spec.dgp.p_low,
                      "Regressor spillover cutoff");
  cmd_exp->add_option("--q-low", exp.spec.dgp.q_low,
                      "Instrument strength cutoff");
  cmd_exp->add_option("--rho", exp.spec.dgp.rho, "Instrument correlation");
  cmd_exp->add_option("--sigma-scale", exp.spec.dgp.sigma_scale,
                      "Noise scale");
  cmd_exp->add_option("--seed", exp.spec.dgp.seed, "Base seed");
  cmd_exp->add_flag("--exogenous", exp.exogenous,
                    "Drop the endogeneity channel");
  cmd_exp->add_option("--invalid-coeff", exp.spec.dgp.invalid_coeff,
                      "Instrument-invalidity coefficient");
  cmd_exp->add_option("--n0", exp.spec.n0, "Initialization sample size");
  cmd_exp->add_option("--n1", exp.spec.n1, "Warmup length; -1 = auto");
  cmd_exp->add_option("--eta0", exp.spec.eta0, "Initialization ridge");
  cmd_exp->add_option("--gamma0", exp.spec.gamma0,
                      "Learning rate scale; <= 0 = rule of thumb");
  cmd_exp->add_option("--alpha-quantile", exp.spec.alpha_quantile,
                      "Rule-of-thumb quantile level");
  cmd_exp->add_option("--a", exp.spec.a, "Learning rate exponent");
  cmd_exp->add_flag("--no-s2sls", exp.no_s2sls, "Skip the warmup estimator");
  cmd_exp->add_flag("--no-sgmm", exp.no_sgmm, "Skip the efficient estimator");
  cmd_exp->add_flag("--no-offline", exp.no_offline, "Skip offline baselines");
  cmd_exp->add_flag("--jtest", exp.spec.jtest, "Overidentification test");
  cmd_exp->add_flag("--dwh", exp.spec.dwh,
                    "Exogeneity test on coordinate 1");
  cmd_exp->add_option("--out", exp.out, "Summary CSV path");
  cmd_exp->add_option("--per-rep", exp.per_rep, "Per-replication CSV path");
  cmd_exp->add_flag("--no-timings", exp.no_timings,
                    "Zero the timing column (stable bytes)");

  CritvalsArgs cv;
  CLI::App* cmd_cv = app.add_subcommand(
      "critvals", "Simulate fixed-b critical values");
  cmd_cv->add_option("--form", cv.form, "f, t, or both");
  cmd_cv->add_option("--q-max", cv.q_max, "Largest restriction count");
  cmd_cv->add_option("--grid", cv.grid, "Path discretization");
  cmd_cv->add_option("--reps", cv.reps, "Simulated paths");
  cmd_cv->add_option("--seed", cv.seed, "Simulation seed");
  cmd_cv->add_option("--out", cv.out, "Output CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_est->parsed()) return run_estimate(est);
    if (cmd_sim->parsed()) return run_simulate(sim);
    if (cmd_exp->parsed()) return run_experiment_cmd(exp);
    if (cmd_cv->parsed()) return run_critvals(cv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const IngestError& e) {
    std::cerr << "ingest error: " << e.what() << "\n";
    return kExitIngest;
  } catch (const SingularInitialization& e) {
    std::cerr << "singular initialization: " << e.what() << "\n";
    return kExitSingularInit;
  } catch (const SingularDesign& e) {
    std::cerr << "singular design: " << e.what() << "\n";
    return kExitSingularDesign;
  } catch (const DegenerateInitialization& e) {
    std::cerr << "degenerate initialization: " << e.what() << "\n";
    return kExitDegenerateInit;
  } catch (const NumericalBreakdown& e) {
    std::cerr << "numerical breakdown: " << e.what() << "\n";
    return kExitBreakdown;
  } catch (const DivergenceDetected& e) {
    std::cerr << "divergence detected: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const InvalidPhase& e) {
    std::cerr << "invalid phase: " << e.what() << "\n";
    return kExitPhase;
  } catch (const SingularLrv& e) {
    std::cerr << "singular long-run variance: " << e.what() << "\n";
    return kExitSingularLrv;
  } catch (const NotOveridentified& e) {
    std::cerr << "not overidentified: " << e.what() << "\n";
    return kExitNotOverid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
