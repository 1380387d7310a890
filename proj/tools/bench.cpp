// Benchmark: SMW fast-path steppers against the serial direct-inverse
// reference, online against offline refits across n, and the parallel
// critical-value kernel against a forced serial run.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "sgmm/baselines.hpp"
#include "sgmm/critical_values.hpp"
#include "sgmm/dgp.hpp"
#include "sgmm/driver.hpp"
#include "sgmm/learning_rate.hpp"
#include "sgmm/reference.hpp"
#include "sgmm/s2sls.hpp"
#include "sgmm/sgmm.hpp"
#include "sgmm/state.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace sgmm;
using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Observation> draw(std::int64_t n, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  DgpStream stream(cfg);
  std::vector<Observation> data(static_cast<std::size_t>(n));
  for (auto& obs : data) stream.next(obs);
  return data;
}

void bench_steppers(std::int64_t fast_steps, std::int64_t ref_steps) {
  const std::int64_t n0 = 1000;
  const std::vector<Observation> init = draw(n0, 7);
  const std::vector<Observation> body =
      draw(std::max(fast_steps, ref_steps), 8);
  const double gamma0 = rule_of_thumb_gamma0(init, 0.5, 0.0);
  const LearningRateSchedule sched = make_schedule(gamma0);

  auto time_fast = [&](bool efficient) {
    OnlineState st = init_state(init, 0.0, sched, Beta0Method::Offline2SLS);
    if (efficient) {
      step_s2sls(st, body[0]);
      transition_to_efficient(st);
    }
    const auto t0 = Clock::now();
    for (std::int64_t j = efficient ? 1 : 0; j < fast_steps; ++j)
      efficient ? step_sgmm(st, body[static_cast<std::size_t>(j)])
                : step_s2sls(st, body[static_cast<std::size_t>(j)]);
    return elapsed(t0);
  };
  auto time_ref = [&](bool efficient) {
    OnlineState st = init_state(init, 0.0, sched, Beta0Method::Offline2SLS);
    if (efficient) {
      step_s2sls(st, body[0]);
      transition_to_efficient(st);
    }
    reference::State rs = reference::from_online(st);
    const auto t0 = Clock::now();
    for (std::int64_t j = efficient ? 1 : 0; j < ref_steps; ++j)
      efficient ? reference::step_efficient(rs, body[static_cast<std::size_t>(j)])
                : reference::step_warmup(rs, body[static_cast<std::size_t>(j)]);
    return elapsed(t0);
  };

  std::printf("stepper throughput, (p,q) = (5,20)\n");
  std::printf("  %-10s  %12s  %12s  %8s\n", "phase", "fast steps/s",
              "ref steps/s", "speedup");
  for (const bool efficient : {false, true}) {
    const double tf = time_fast(efficient);
    const double tr = time_ref(efficient);
    const double fast_rate = static_cast<double>(fast_steps) / tf;
    const double ref_rate = static_cast<double>(ref_steps) / tr;
    std::printf("  %-10s  %12.0f  %12.0f  %7.1fx\n",
                efficient ? "efficient" : "warmup", fast_rate, ref_rate,
                fast_rate / ref_rate);
  }
}

void bench_online_offline(const std::vector<std::int64_t>& sizes) {
  std::printf("\nonline single pass vs offline refit (seconds)\n");
  std::printf("  %-10s  %10s  %10s  %10s  %10s\n", "n", "s2sls", "sgmm",
              "2sls", "gmm");
  for (const std::int64_t n : sizes) {
    const std::int64_t n0 = 1000;
    DgpConfig dcfg;
    dcfg.n = n0 + n;
    dcfg.seed = 11;
    const Dataset full = generate_dataset(dcfg);

    RunConfig cfg;
    cfg.random_scaling = false;
    cfg.plug_in = false;

    cfg.estimator = EstimatorKind::S2SLS;
    ColumnSource src_a(full.Xt, full.Zt, full.y, 0, full.n());
    const double t_s2sls =
        estimate_stream(src_a, full.n(), cfg).fold_seconds;

    cfg.estimator = EstimatorKind::SGMM;
    ColumnSource src_b(full.Xt, full.Zt, full.y, 0, full.n());
    const double t_sgmm = estimate_stream(src_b, full.n(), cfg).fold_seconds;

    Dataset est;
    est.Xt = full.Xt.rightCols(n);
    est.Zt = full.Zt.rightCols(n);
    est.y = full.y.tail(n);
    auto t0 = Clock::now();
    offline_2sls(est);
    const double t_tsls = elapsed(t0);
    t0 = Clock::now();
    offline_gmm_two_step(est);
    const double t_gmm = elapsed(t0);

    std::printf("  %-10lld  %10.3f  %10.3f  %10.3f  %10.3f\n",
                static_cast<long long>(n), t_s2sls, t_sgmm, t_tsls, t_gmm);
  }
}

void bench_critvals(int grid, int reps) {
#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
#else
  const int max_threads = 1;
#endif
  std::printf("\ncritical-value kernel, q = 5, grid = %d, reps = %d\n", grid,
              reps);
  auto run = [&](int threads) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    const auto t0 = Clock::now();
    simulate_critical_value_row(5, StatisticForm::F_type, grid, reps, 99);
    return elapsed(t0);
  };
  const double t1 = run(1);
  std::printf("  1 thread   %8.3f s\n", t1);
  if (max_threads > 1) {
    const double tp = run(max_threads);
    std::printf("  %d threads  %8.3f s  (%.1fx)\n", max_threads, tp, t1 / tp);
#ifdef _OPENMP
    omp_set_num_threads(max_threads);
#endif
  } else {
    std::printf("  (single hardware thread: no parallel arm)\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;

  bench_steppers(quick ? 20000 : 200000, quick ? 2000 : 10000);
  std::vector<std::int64_t> sizes = {10000, 100000};
  if (!quick) sizes.push_back(1000000);
  bench_online_offline(sizes);
  bench_critvals(quick ? 1000 : 5000, 10000);
  return 0;
}
