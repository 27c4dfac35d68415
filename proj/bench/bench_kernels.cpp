// Kernel benchmark: the one-pass trimmed-sum accumulator against the full-sort
// reference, and the replica loop at 1 worker against the OpenMP default.
// Usage: trimlab_bench [n_values] [replicas]

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "trimlab/experiments.hpp"
#include "trimlab/reference.hpp"
#include "trimlab/rng.hpp"
#include "trimlab/trimming.hpp"

using namespace trimlab;

namespace {

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 4000000;
  const std::uint64_t replicas = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 200;

#ifdef _OPENMP
  const int max_workers = omp_get_max_threads();
#else
  const int max_workers = 1;
#endif

  // -- single-path kernels: one pass with a bounded heap vs sort-and-slice --

  std::printf("path kernels, n = %llu, Pareto(1/2) draws\n", (unsigned long long)n);
  std::vector<double> values(n);
  Rng rng(1234567);
  for (auto& v : values) v = std::pow(1.0 - rng.uniform01(), -2.0);

  std::vector<Checkpoint> cps;
  for (std::uint64_t nk : {n / 4, n / 2, n}) {
    Checkpoint c;
    c.n = nk;
    c.b = static_cast<std::uint64_t>(std::ceil(std::pow(double(nk), 0.7)));
    c.f = std::pow(double(nk), 1.5);
    cps.push_back(c);
  }
  const auto plan = CheckpointPlan::validated(std::move(cps));

  double t0 = now();
  const auto stream_rows = run_plan(values, plan);
  const double t_stream = now() - t0;

  t0 = now();
  const auto ref_rows = reference::run_plan(values, plan);
  const double t_ref = now() - t0;

  double worst = 0.0;
  for (std::size_t j = 0; j < stream_rows.size(); ++j) {
    worst = std::max(worst, rel(stream_rows[j].trimmed, ref_rows[j].trimmed));
    worst = std::max(worst, rel(stream_rows[j].truncated, ref_rows[j].truncated));
  }

  std::printf("  %-28s %8.1f ms\n", "one-pass accumulator", t_stream * 1e3);
  std::printf("  %-28s %8.1f ms\n", "full-sort reference", t_ref * 1e3);
  std::printf("  %-28s %8.2fx   (worst rel deviation %.1e)\n\n", "sort/stream",
              t_ref / t_stream, worst);

  // -- replica loop: OpenMP schedule vs the same loop pinned to one thread --

  std::printf("replica loop, %llu replicas of n = 1e5, iid alpha = 1/2\n",
              (unsigned long long)replicas);
  ConvergenceConfig cfg;
  cfg.process = IidRegVarying{RegVaryingTail(0.5, SlowlyVarying::constant(1.0))};
  cfg.schedule = TrimmingSchedule::power_rule(0.7);
  cfg.checkpoints = {10000, 100000};
  cfg.replicas = replicas;
  cfg.master_seed = 99;

  cfg.workers = 1;
  t0 = now();
  const auto serial = run_mean_convergence(cfg);
  const double t1w = now() - t0;

  cfg.workers = max_workers;
  t0 = now();
  const auto parallel = run_mean_convergence(cfg);
  const double tnw = now() - t0;

  bool identical = serial.checkpoints.size() == parallel.checkpoints.size();
  for (std::size_t j = 0; identical && j < serial.checkpoints.size(); ++j)
    identical = serial.checkpoints[j].mean_ratio == parallel.checkpoints[j].mean_ratio &&
                serial.checkpoints[j].mae == parallel.checkpoints[j].mae;

  std::printf("  %-28s %8.1f ms\n", "workers = 1", t1w * 1e3);
  std::printf("  %-28s %8.1f ms   (%d thread(s) available)\n", "workers = max", tnw * 1e3,
              max_workers);
  std::printf("  %-28s %8.2fx   (reports bit-identical: %s)\n", "speedup", t1w / tnw,
              identical ? "yes" : "NO");
  if (max_workers == 1)
    std::printf("  note: single hardware thread here, so no speedup is expected;\n"
                "        the point of the comparison is the bit-identical reduction\n");
  return identical ? 0 : 1;
}
