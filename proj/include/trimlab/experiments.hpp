#pragma once
// Replica experiments: mean convergence of trimmed sums against their norming
// scale, truncated-sum calibration, and the heavy-tail diagnostics that show a
// fixed trim depth cannot tame the doubling-map observable.
//
// Every experiment derives replica streams from one master seed and reduces
// results in replica-index order, so reports are identical for any worker
// count.

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trimlab/norming.hpp"
#include "trimlab/processes.hpp"

namespace trimlab {

// Set by the CLI's signal handler; experiments poll it between replicas and
// return partial reports when it trips.
std::atomic<bool>& interrupt_flag();

struct ConvergenceConfig {
  ProcessSpec process;
  TrimmingSchedule schedule;
  std::vector<std::uint64_t> checkpoints;
  std::uint64_t replicas = 100;
  std::uint64_t master_seed = 1;
  std::vector<double> eps_grid = {0.1, 0.25, 0.5};
  int workers = 0;  // 0: TRIMLAB_WORKERS env or the OpenMP default
};

struct CheckpointStats {
  std::uint64_t n = 0;
  std::uint64_t b = 0;
  double d = 0.0;          // norming scale the trimmed sum is divided by
  double mae = 0.0;        // mean |S/d - 1|
  double mae_se = 0.0;
  double mean_ratio = 0.0; // mean S/d
  double ratio_se = 0.0;
  std::vector<double> dev_prob;     // P(|S/d - 1| > eps), one per eps
  std::vector<double> dev_prob_se;
};

struct ConvergenceReport {
  std::vector<CheckpointStats> checkpoints;
  std::vector<double> eps_grid;
  std::uint64_t replicas = 0;   // requested
  std::uint64_t completed = 0;  // longest finished replica prefix used for stats
  bool partial = false;
};

ConvergenceReport run_mean_convergence(const ConvergenceConfig& cfg);

struct TruncationConfig {
  ProcessSpec process;
  TrimmingSchedule schedule;
  std::vector<std::uint64_t> checkpoints;
  std::optional<double> f_override;  // default: the threshold g(n,b)
  std::uint64_t replicas = 100;
  std::uint64_t master_seed = 1;
  int workers = 0;
};

struct TruncationRow {
  std::uint64_t n = 0;
  std::uint64_t b = 0;
  double f = 0.0;
  double t_mean = 0.0;  // mean truncated sum over replicas
  double t_se = 0.0;
  double expected_exact = 0.0;  // n * E[X 1{X <= f}]
  double expected_asym = 0.0;   // n * first-order tail approximation
  double ratio_mean = 0.0;      // mean S/d at the same checkpoints
  double ratio_se = 0.0;
  bool se_defined = true;  // false when replicas == 1
};

struct TruncationReport {
  std::vector<TruncationRow> rows;
  std::uint64_t replicas = 0;
  std::uint64_t completed = 0;
  bool partial = false;
};

TruncationReport run_truncation_check(const TruncationConfig& cfg);

// Reciprocal of the mean log-excess over the k largest values. Throws
// insufficient_data_error when the (k+1)-th value is 0 or the excesses vanish.
double hill_estimator(std::span<const double> values, std::size_t k);

struct CounterexampleConfig {
  ProcessSpec process;
  std::uint64_t n = 10000;
  std::uint64_t b = 100;
  std::uint64_t replicas = 1000;
  std::uint64_t master_seed = 1;
  std::size_t hill_k = 0;        // 0: ceil(replicas^0.6)
  std::size_t bootstrap = 400;   // percentile-CI resamples
  std::vector<double> omega_grid;          // exceedance-bound probes (needs gamma)
  std::vector<std::uint64_t> running_grid; // empty: powers of 10 up to replicas
  int workers = 0;
};

struct RunningMeanRow {
  std::uint64_t m = 0;   // replicas averaged, in index order
  double mean = 0.0;
};

struct OmegaRow {
  double omega = 0.0;
  double threshold = 0.0;  // (omega * 2^-b)^(-gamma)
  double frequency = 0.0;  // fraction of trimmed sums at or above the threshold
};

struct TailReport {
  double hill = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t k = 0;
  std::vector<RunningMeanRow> running;
  std::vector<OmegaRow> omega_rows;
  bool divergence_flag = false;  // hill < 1 with the whole CI below 1
  std::uint64_t replicas = 0;
  std::uint64_t completed = 0;
  bool partial = false;
};

// Distribution of trimmed sums at fixed (n, b): Hill index with bootstrap CI,
// running means, and exceedance frequencies against the lower-bound thresholds.
TailReport run_counterexample(const CounterexampleConfig& cfg);

}  // namespace trimlab
