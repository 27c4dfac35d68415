#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "doctest.h"
#include "trimlab/errors.hpp"
#include "trimlab/experiments.hpp"
#include "trimlab/norming.hpp"
#include "trimlab/processes.hpp"

using namespace trimlab;

namespace {

ProcessSpec iid_half() {
  return IidRegVarying{RegVaryingTail(0.5, SlowlyVarying::constant(1.0))};
}

}  // namespace

TEST_CASE("hill estimator on a hand-sized sample") {
  // log excesses over the third order statistic are 2 and 1
  const std::vector<double> v{1.0, std::exp(2.0), std::exp(1.0)};
  CHECK(hill_estimator(v, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(hill_estimator(v, 1), config_error);
  CHECK_THROWS_AS(hill_estimator(std::vector<double>{1.0, 2.0}, 2), config_error);
  CHECK_THROWS_AS(hill_estimator(std::vector<double>{4.0, 2.0, 0.0}, 2),
                  insufficient_data_error);
  CHECK_THROWS_AS(hill_estimator(std::vector<double>{3.0, 3.0, 3.0}, 2),
                  insufficient_data_error);
}

TEST_CASE("hill estimator recovers the index on a deterministic tail grid") {
  // quantile grid of the square-pareto law: X = (1-u)^-2 has index 1/2
  const std::size_t N = 5000;
  std::vector<double> v(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(N);
    v[i] = std::pow(1.0 - u, -2.0);
  }
  CHECK(hill_estimator(v, 200) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("mean convergence refuses schedules that trim nothing") {
  ConvergenceConfig cfg;
  cfg.process = iid_half();
  cfg.schedule = TrimmingSchedule::explicit_table({{10, 0}, {20, 1}});
  cfg.checkpoints = {10, 20};
  cfg.replicas = 3;
  cfg.master_seed = 1;
  CHECK_THROWS_AS(run_mean_convergence(cfg), config_error);

  cfg.schedule = TrimmingSchedule::power_rule(0.7);
  cfg.checkpoints = {};
  CHECK_THROWS_AS(run_mean_convergence(cfg), config_error);
  cfg.checkpoints = {1, 10};  // a length-1 path cannot be trimmed
  CHECK_THROWS_AS(run_mean_convergence(cfg), config_error);
  cfg.checkpoints = {20, 10};
  CHECK_THROWS_AS(run_mean_convergence(cfg), config_error);
  cfg.checkpoints = {10, 20};
  cfg.eps_grid = {};
  CHECK_THROWS_AS(run_mean_convergence(cfg), config_error);
  cfg.eps_grid = {-0.1};
  CHECK_THROWS_AS(run_mean_convergence(cfg), config_error);
}

TEST_CASE("deviation probabilities are nested across levels") {
  ConvergenceConfig cfg;
  cfg.process = iid_half();
  cfg.schedule = TrimmingSchedule::power_rule(0.7);
  cfg.checkpoints = {200, 1000};
  cfg.replicas = 60;
  cfg.master_seed = 424242;
  cfg.eps_grid = {0.1, 0.25, 0.5};
  const auto rep = run_mean_convergence(cfg);
  REQUIRE(rep.checkpoints.size() == 2);
  CHECK(rep.completed == 60);
  CHECK(!rep.partial);
  const RegVaryingTail tail(0.5, SlowlyVarying::constant(1.0));
  for (const auto& st : rep.checkpoints) {
    CHECK(st.b == static_cast<std::uint64_t>(std::ceil(std::pow(st.n, 0.7))));
    CHECK(st.d == d_norming(tail, st.n, st.b));
    CHECK(std::isfinite(st.mean_ratio));
    CHECK(st.mae >= 0.0);
    REQUIRE(st.dev_prob.size() == 3);
    CHECK(st.dev_prob[0] >= st.dev_prob[1]);
    CHECK(st.dev_prob[1] >= st.dev_prob[2]);
    for (double p : st.dev_prob) CHECK((p >= 0.0 && p <= 1.0));
  }
}

TEST_CASE("reports do not depend on the worker count") {
  ConvergenceConfig cfg;
  cfg.process = LurothStep{0.5};
  cfg.schedule = TrimmingSchedule::power_rule(0.7);
  cfg.checkpoints = {100, 400};
  cfg.replicas = 40;
  cfg.master_seed = 5;
  cfg.workers = 1;
  const auto a = run_mean_convergence(cfg);
  cfg.workers = 4;
  const auto b = run_mean_convergence(cfg);
  REQUIRE(a.checkpoints.size() == b.checkpoints.size());
  for (std::size_t j = 0; j < a.checkpoints.size(); ++j) {
    CHECK(a.checkpoints[j].mae == b.checkpoints[j].mae);
    CHECK(a.checkpoints[j].mae_se == b.checkpoints[j].mae_se);
    CHECK(a.checkpoints[j].mean_ratio == b.checkpoints[j].mean_ratio);
    CHECK(a.checkpoints[j].ratio_se == b.checkpoints[j].ratio_se);
    CHECK(a.checkpoints[j].dev_prob == b.checkpoints[j].dev_prob);
    CHECK(a.checkpoints[j].dev_prob_se == b.checkpoints[j].dev_prob_se);
  }
}

TEST_CASE("truncated sums match the closed-form prediction") {
  TruncationConfig cfg;
  cfg.process = iid_half();
  cfg.schedule = TrimmingSchedule::power_rule(0.7);
  cfg.checkpoints = {1000};
  cfg.f_override = 100.0;
  cfg.replicas = 400;
  cfg.master_seed = 99;
  const auto rep = run_truncation_check(cfg);
  REQUIRE(rep.rows.size() == 1);
  const auto& row = rep.rows[0];
  // E[X 1{X <= f}] = sqrt(f) - 1 for the square-pareto law
  CHECK(row.f == 100.0);
  CHECK(row.expected_exact == doctest::Approx(9000.0).epsilon(1e-12));
  CHECK(row.expected_asym == doctest::Approx(10000.0).epsilon(1e-12));
  CHECK(row.se_defined);
  CHECK(row.t_se > 0.0);
  CHECK(std::fabs(row.t_mean - row.expected_exact) <= 4.0 * row.t_se);
  CHECK(std::isfinite(row.ratio_mean));

  cfg.f_override = 0.5;  // below the support: nothing survives truncation
  CHECK_THROWS_AS(run_truncation_check(cfg), config_error);
  cfg.f_override = -1.0;
  CHECK_THROWS_AS(run_truncation_check(cfg), config_error);
}

TEST_CASE("a single replica reports undefined dispersion honestly") {
  TruncationConfig cfg;
  cfg.process = iid_half();
  cfg.schedule = TrimmingSchedule::power_rule(0.7);
  cfg.checkpoints = {500};
  cfg.replicas = 1;
  cfg.master_seed = 3;
  const auto rep = run_truncation_check(cfg);
  REQUIRE(rep.rows.size() == 1);
  CHECK(!rep.rows[0].se_defined);
  CHECK(std::isnan(rep.rows[0].t_se));
  CHECK(std::isfinite(rep.rows[0].t_mean));
}

TEST_CASE("an interrupt before the first replica yields an empty partial report") {
  interrupt_flag().store(false);
  ConvergenceConfig cfg;
  cfg.process = LurothStep{0.5};
  cfg.schedule = TrimmingSchedule::power_rule(0.7);
  cfg.checkpoints = {8};
  cfg.replicas = 3;
  cfg.master_seed = 1;
  interrupt_flag().store(true);
  const auto rep = run_mean_convergence(cfg);
  interrupt_flag().store(false);
  CHECK(rep.partial);
  CHECK(rep.completed == 0);
}

TEST_CASE("tail report carries the exceedance thresholds and a bootstrap interval") {
  CounterexampleConfig cfg;
  cfg.process = DoublingPareto{2.0};
  cfg.n = 64;
  cfg.b = 3;
  cfg.replicas = 40;
  cfg.master_seed = 17;
  cfg.bootstrap = 50;
  cfg.omega_grid = {0.1};
  const auto rep = run_counterexample(cfg);
  CHECK(rep.completed == 40);
  CHECK(rep.k == 10);  // ceil(40^0.6)
  CHECK(rep.ci_lo <= rep.hill);
  CHECK(rep.hill <= rep.ci_hi);
  REQUIRE(rep.omega_rows.size() == 1);
  // (omega 2^-b)^-gamma = (0.1 / 8)^-2
  CHECK(rep.omega_rows[0].threshold == doctest::Approx(6400.0).epsilon(1e-9));
  CHECK((rep.omega_rows[0].frequency >= 0.0 && rep.omega_rows[0].frequency <= 1.0));
  REQUIRE(!rep.running.empty());
  CHECK(rep.running[0].m == 10);
  for (const auto& r : rep.running) CHECK(std::isfinite(r.mean));
}

TEST_CASE("a shallow trim leaves a divergent tail; a deep one does not") {
  CounterexampleConfig cfg;
  cfg.process = DoublingPareto{2.0};
  cfg.n = 1000;
  cfg.b = 4;
  cfg.replicas = 2000;
  cfg.master_seed = 12;
  cfg.bootstrap = 200;
  const auto shallow = run_counterexample(cfg);
  CHECK(shallow.hill < 1.0);
  CHECK(shallow.divergence_flag);

  cfg.b = 200;
  const auto deep = run_counterexample(cfg);
  CHECK(!deep.divergence_flag);
}

TEST_CASE("tail report argument validation") {
  CounterexampleConfig cfg;
  cfg.process = DoublingPareto{2.0};
  cfg.n = 100;
  cfg.b = 10;
  cfg.replicas = 40;
  cfg.master_seed = 1;

  auto bad = cfg;
  bad.n = 1;
  bad.b = 0;
  CHECK_THROWS_AS(run_counterexample(bad), config_error);
  bad = cfg;
  bad.b = 100;
  CHECK_THROWS_AS(run_counterexample(bad), config_error);
  bad = cfg;
  bad.replicas = 2;
  CHECK_THROWS_AS(run_counterexample(bad), config_error);
  bad = cfg;
  bad.process = LurothStep{0.5};
  bad.omega_grid = {0.1};
  CHECK_THROWS_AS(run_counterexample(bad), config_error);
  bad = cfg;
  bad.omega_grid = {1.5};
  CHECK_THROWS_AS(run_counterexample(bad), config_error);
  bad = cfg;
  bad.running_grid = {10, 10};
  CHECK_THROWS_AS(run_counterexample(bad), config_error);
  bad = cfg;
  bad.running_grid = {10, 500};
  CHECK_THROWS_AS(run_counterexample(bad), config_error);
}
