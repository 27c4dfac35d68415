#include "trimlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "trimlab/errors.hpp"
#include "trimlab/parallel.hpp"
#include "trimlab/trimming.hpp"

namespace trimlab {

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MeanSE {
  double mean = kNaN;
  double se = kNaN;
};

MeanSE mean_se(std::span<const double> xs) {
  if (xs.empty()) return {};
  CompensatedSum s;
  for (double x : xs) s.add(x);
  const double mean = s.value() / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, kNaN};
  CompensatedSum q;
  for (double x : xs) q.add((x - mean) * (x - mean));
  const double var = q.value() / static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

void check_checkpoints(const std::vector<std::uint64_t>& cps) {
  if (cps.empty()) throw config_error("need at least one checkpoint");
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] < 2) throw config_error("checkpoints must be >= 2");
    if (i > 0 && cps[i] <= cps[i - 1])
      throw config_error("checkpoints must be strictly increasing");
  }
}

// b for each checkpoint, insisting the schedule actually trims and leaves room.
std::vector<std::uint64_t> schedule_depths(const TrimmingSchedule& schedule,
                                           const std::vector<std::uint64_t>& cps) {
  std::vector<std::uint64_t> bs;
  bs.reserve(cps.size());
  for (std::uint64_t n : cps) {
    const std::uint64_t b = schedule.b_of(n);
    if (b < 1) throw config_error("schedule gives b = 0; the trim depth must grow without bound");
    if (b >= n) throw config_error("schedule gives b >= n; nothing would remain");
    bs.push_back(b);
  }
  return bs;
}

// Runs one replica loop over paths of length n_last, storing `width` doubles
// per replica computed by `body(values, out_row)`. Returns the completed
// prefix length. Results are keyed by replica index, so worker count cannot
// change any output.
template <typename Body>
std::uint64_t replica_loop(const ProcessSpec& spec, std::uint64_t replicas, std::uint64_t n_last,
                           std::uint64_t master_seed, int workers, std::size_t width,
                           std::vector<double>& results, Body body) {
  results.assign(static_cast<std::size_t>(replicas) * width, kNaN);
  std::vector<char> done(replicas, 0);
  std::exception_ptr first_error = nullptr;
  const int nthreads = effective_workers(workers);

#pragma omp parallel num_threads(nthreads)
  {
    std::vector<double> values(n_last);
#pragma omp for schedule(dynamic)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(replicas); ++r) {
      if (interrupt_flag().load(std::memory_order_relaxed)) continue;
      try {
        auto gen = make_generator(spec, replica_rng(master_seed, static_cast<std::uint64_t>(r)));
        for (std::uint64_t i = 0; i < n_last; ++i) values[i] = gen->next();
        body(values, &results[static_cast<std::size_t>(r) * width]);
        done[static_cast<std::size_t>(r)] = 1;
      } catch (...) {
#pragma omp critical(trimlab_replica_err)
        if (!first_error) first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  std::uint64_t prefix = 0;
  while (prefix < replicas && done[prefix]) ++prefix;
  return prefix;
}

std::vector<double> column(const std::vector<double>& results, std::uint64_t prefix,
                           std::size_t width, std::size_t col) {
  std::vector<double> out;
  out.reserve(prefix);
  for (std::uint64_t r = 0; r < prefix; ++r) out.push_back(results[r * width + col]);
  return out;
}

}  // namespace

ConvergenceReport run_mean_convergence(const ConvergenceConfig& cfg) {
  check_checkpoints(cfg.checkpoints);
  if (cfg.replicas < 1) throw config_error("need at least one replica");
  if (cfg.eps_grid.empty()) throw config_error("need at least one deviation level");
  for (double e : cfg.eps_grid)
    if (!std::isfinite(e) || !(e > 0.0)) throw config_error("deviation levels must be > 0");

  const RegVaryingTail tail = norming_tail(cfg.process);
  const auto bs = schedule_depths(cfg.schedule, cfg.checkpoints);
  const std::size_t J = cfg.checkpoints.size();

  std::vector<Checkpoint> rows;
  std::vector<double> d(J);
  for (std::size_t j = 0; j < J; ++j) {
    d[j] = d_norming(tail, cfg.checkpoints[j], bs[j]);
    rows.push_back({cfg.checkpoints[j], bs[j], std::numeric_limits<double>::infinity()});
  }
  const CheckpointPlan plan = CheckpointPlan::validated(rows);

  std::vector<double> ratios;
  const std::uint64_t prefix = replica_loop(
      cfg.process, cfg.replicas, cfg.checkpoints.back(), cfg.master_seed, cfg.workers, J, ratios,
      [&plan, &d, J](const std::vector<double>& values, double* out) {
        const auto res = run_plan(values, plan);
        for (std::size_t j = 0; j < J; ++j) out[j] = res[j].trimmed / d[j];
      });

  ConvergenceReport rep;
  rep.eps_grid = cfg.eps_grid;
  rep.replicas = cfg.replicas;
  rep.completed = prefix;
  rep.partial = prefix < cfg.replicas;
  for (std::size_t j = 0; j < J; ++j) {
    CheckpointStats st;
    st.n = cfg.checkpoints[j];
    st.b = bs[j];
    st.d = d[j];
    const auto col = column(ratios, prefix, J, j);
    std::vector<double> absdev(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) absdev[i] = std::fabs(col[i] - 1.0);
    const MeanSE ratio = mean_se(col);
    const MeanSE mae = mean_se(absdev);
    st.mean_ratio = ratio.mean;
    st.ratio_se = ratio.se;
    st.mae = mae.mean;
    st.mae_se = mae.se;
    for (double eps : cfg.eps_grid) {
      if (col.empty()) {
        st.dev_prob.push_back(kNaN);
        st.dev_prob_se.push_back(kNaN);
        continue;
      }
      std::size_t hits = 0;
      for (double a : absdev)
        if (a > eps) ++hits;
      const double p = static_cast<double>(hits) / static_cast<double>(col.size());
      st.dev_prob.push_back(p);
      st.dev_prob_se.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(col.size())));
    }
    rep.checkpoints.push_back(std::move(st));
  }
  return rep;
}

TruncationReport run_truncation_check(const TruncationConfig& cfg) {
  check_checkpoints(cfg.checkpoints);
  if (cfg.replicas < 1) throw config_error("need at least one replica");
  if (cfg.f_override && !(*cfg.f_override > 0.0))
    throw config_error("truncation level must be > 0");

  const RegVaryingTail tail = norming_tail(cfg.process);
  const auto bs = schedule_depths(cfg.schedule, cfg.checkpoints);
  const std::size_t J = cfg.checkpoints.size();

  std::vector<Checkpoint> rows;
  std::vector<double> d(J), fs(J);
  for (std::size_t j = 0; j < J; ++j) {
    fs[j] = cfg.f_override ? *cfg.f_override
                           : g_threshold(tail, cfg.checkpoints[j], bs[j]);
    d[j] = d_norming(tail, cfg.checkpoints[j], bs[j]);
    rows.push_back({cfg.checkpoints[j], bs[j], fs[j]});
  }
  const CheckpointPlan plan = CheckpointPlan::validated(rows);

  // two columns per checkpoint: truncated sum, trimmed ratio
  std::vector<double> results;
  const std::uint64_t prefix = replica_loop(
      cfg.process, cfg.replicas, cfg.checkpoints.back(), cfg.master_seed, cfg.workers, 2 * J,
      results, [&plan, &d, J](const std::vector<double>& values, double* out) {
        const auto res = run_plan(values, plan);
        for (std::size_t j = 0; j < J; ++j) {
          out[2 * j] = res[j].truncated;
          out[2 * j + 1] = res[j].trimmed / d[j];
        }
      });

  TruncationReport rep;
  rep.replicas = cfg.replicas;
  rep.completed = prefix;
  rep.partial = prefix < cfg.replicas;
  for (std::size_t j = 0; j < J; ++j) {
    TruncationRow row;
    row.n = cfg.checkpoints[j];
    row.b = bs[j];
    row.f = fs[j];
    const MeanSE t = mean_se(column(results, prefix, 2 * J, 2 * j));
    const MeanSE ratio = mean_se(column(results, prefix, 2 * J, 2 * j + 1));
    row.t_mean = t.mean;
    row.t_se = t.se;
    row.ratio_mean = ratio.mean;
    row.ratio_se = ratio.se;
    row.se_defined = prefix >= 2;
    row.expected_exact =
        static_cast<double>(row.n) * process_truncated_first_moment(cfg.process, row.f);
    row.expected_asym =
        static_cast<double>(row.n) * tail.truncated_first_moment_asymptotic(row.f);
    rep.rows.push_back(row);
  }
  return rep;
}

double hill_estimator(std::span<const double> values, std::size_t k) {
  if (k < 2) throw config_error("hill estimator needs k >= 2");
  if (values.size() < k + 1) throw config_error("hill estimator needs at least k+1 values");
  std::vector<double> s(values.begin(), values.end());
  std::partial_sort(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k + 1), s.end(),
                    std::greater<>());
  const double pivot = s[k];
  if (!(pivot > 0.0))
    throw insufficient_data_error("hill estimator needs a positive (k+1)-th order statistic");
  CompensatedSum acc;
  for (std::size_t i = 0; i < k; ++i) acc.add(std::log(s[i] / pivot));
  const double mean_log = acc.value() / static_cast<double>(k);
  if (!(mean_log > 0.0))
    throw insufficient_data_error("top order statistics are all equal; no tail slope to estimate");
  return 1.0 / mean_log;
}

TailReport run_counterexample(const CounterexampleConfig& cfg) {
  if (cfg.n < 2) throw config_error("need n >= 2");
  if (cfg.b < 1 || cfg.b >= cfg.n) throw config_error("need 1 <= b < n");
  if (cfg.replicas < 3) throw config_error("need at least 3 replicas for the hill estimator");
  const auto* dp = std::get_if<DoublingPareto>(&cfg.process);
  if (!cfg.omega_grid.empty() && dp == nullptr)
    throw config_error("exceedance thresholds are defined through gamma; use the bit-window process");
  for (double w : cfg.omega_grid)
    if (!(w > 0.0 && w < 1.0)) throw config_error("omega probes must lie in (0,1)");

  std::vector<std::uint64_t> rgrid = cfg.running_grid;
  if (rgrid.empty())
    for (std::uint64_t m = 10; m <= cfg.replicas; m *= 10) rgrid.push_back(m);
  for (std::size_t i = 0; i < rgrid.size(); ++i) {
    if (rgrid[i] < 1 || rgrid[i] > cfg.replicas)
      throw config_error("running-mean sizes must lie in [1, replicas]");
    if (i > 0 && rgrid[i] <= rgrid[i - 1])
      throw config_error("running-mean sizes must be strictly increasing");
  }

  const CheckpointPlan plan = CheckpointPlan::validated(
      {{cfg.n, cfg.b, std::numeric_limits<double>::infinity()}});

  std::vector<double> trimmed;
  const std::uint64_t prefix =
      replica_loop(cfg.process, cfg.replicas, cfg.n, cfg.master_seed, cfg.workers, 1, trimmed,
                   [&plan](const std::vector<double>& values, double* out) {
                     out[0] = run_plan(values, plan)[0].trimmed;
                   });
  trimmed.resize(prefix);

  TailReport rep;
  rep.replicas = cfg.replicas;
  rep.completed = prefix;
  rep.partial = prefix < cfg.replicas;

  if (prefix < 3) {
    rep.hill = rep.ci_lo = rep.ci_hi = kNaN;
    return rep;
  }

  std::size_t k = cfg.hill_k;
  if (k == 0) k = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(prefix), 0.6)));
  k = std::min(k, static_cast<std::size_t>(prefix) - 1);
  k = std::max<std::size_t>(k, 2);
  rep.k = k;
  rep.hill = hill_estimator(trimmed, k);

  // percentile bootstrap, resampling replica results with a dedicated stream
  if (cfg.bootstrap >= 2) {
    constexpr std::uint64_t kBootstrapSalt = 0x626f6f7473747261ull;
    Rng boot(mix64(cfg.master_seed ^ kBootstrapSalt));
    std::vector<double> resample(trimmed.size());
    std::vector<double> hills;
    hills.reserve(cfg.bootstrap);
    for (std::size_t bi = 0; bi < cfg.bootstrap; ++bi) {
      for (std::size_t i = 0; i < resample.size(); ++i)
        resample[i] = trimmed[boot.next_u64() % trimmed.size()];
      try {
        hills.push_back(hill_estimator(resample, k));
      } catch (const insufficient_data_error&) {
        // a degenerate resample carries no slope information; skip it
      }
    }
    if (hills.size() >= 2) {
      std::sort(hills.begin(), hills.end());
      const auto pick = [&hills](double q) {
        const double pos = q * static_cast<double>(hills.size() - 1);
        return hills[static_cast<std::size_t>(std::llround(pos))];
      };
      rep.ci_lo = pick(0.025);
      rep.ci_hi = pick(0.975);
    } else {
      rep.ci_lo = rep.ci_hi = kNaN;
    }
  } else {
    rep.ci_lo = rep.ci_hi = kNaN;
  }

  for (std::uint64_t m : rgrid) {
    if (m > prefix) break;
    CompensatedSum s;
    for (std::uint64_t i = 0; i < m; ++i) s.add(trimmed[i]);
    rep.running.push_back({m, s.value() / static_cast<double>(m)});
  }

  if (dp != nullptr) {
    for (double w : cfg.omega_grid) {
      OmegaRow row;
      row.omega = w;
      row.threshold = std::exp2(dp->gamma * (static_cast<double>(cfg.b) - std::log2(w)));
      std::size_t hits = 0;
      for (double t : trimmed)
        if (t >= row.threshold) ++hits;
      row.frequency = static_cast<double>(hits) / static_cast<double>(prefix);
      rep.omega_rows.push_back(row);
    }
  }

  rep.divergence_flag = std::isfinite(rep.hill) && rep.hill < 1.0 &&
                        std::isfinite(rep.ci_hi) && rep.ci_hi < 1.0;
  return rep;
}

}  // namespace trimlab
