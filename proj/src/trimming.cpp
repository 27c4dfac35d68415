#include "trimlab/trimming.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trimlab/errors.hpp"

namespace trimlab {

TrimmedAccumulator::TrimmedAccumulator(std::size_t k_max) : k_max_(k_max) {
  heap_.reserve(k_max);
}

void TrimmedAccumulator::push(double v) {
  if (std::isnan(v) || v < 0.0) throw config_error("trimmed accumulator takes finite values >= 0");
  if (std::isinf(v)) throw precision_overflow_error("value overflows double; cannot trim reliably");
  total_.add(v);
  ++count_;
  if (k_max_ == 0) {
    bulk_.add(v);
    return;
  }
  if (heap_.size() < k_max_) {
    heap_.push_back(v);
    std::push_heap(heap_.begin(), heap_.end(), std::greater<>());
  } else if (v > heap_.front()) {
    bulk_.add(heap_.front());
    std::pop_heap(heap_.begin(), heap_.end(), std::greater<>());
    heap_.back() = v;
    std::push_heap(heap_.begin(), heap_.end(), std::greater<>());
  } else {
    bulk_.add(v);
  }
}

double TrimmedAccumulator::trimmed_sum(std::size_t b) const {
  if (b > count_) throw config_error("cannot trim more values than were pushed");
  if (b > k_max_) throw config_error("trim depth exceeds the retained bound k_max");
  if (b == 0) return total_.value();
  // Built upward from the displaced bulk: subtracting the top from the grand
  // total would cancel catastrophically whenever the extremes dominate it.
  std::vector<double> top(heap_);
  std::sort(top.begin(), top.end());
  CompensatedSum s = bulk_;
  for (std::size_t i = 0; i + b < top.size(); ++i) s.add(top[i]);
  return s.value();
}

std::vector<double> TrimmedAccumulator::retained() const {
  std::vector<double> out(heap_);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

CheckpointPlan CheckpointPlan::validated(std::vector<Checkpoint> rows) {
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto& r = rows[j];
    if (r.n == 0) throw config_error("checkpoint n must be >= 1");
    if (r.b >= r.n) throw config_error("checkpoint requires b < n");
    if (std::isnan(r.f) || r.f < 0.0) throw config_error("truncation level must be >= 0 (or +inf)");
    if (j > 0 && rows[j - 1].n >= r.n) throw config_error("checkpoint n must be strictly increasing");
  }
  return CheckpointPlan{std::move(rows)};
}

bool CheckpointPlan::monotone_b() const {
  for (std::size_t j = 1; j < rows.size(); ++j)
    if (rows[j].b < rows[j - 1].b) return false;
  return true;
}

std::size_t CheckpointPlan::max_b() const {
  std::size_t m = 0;
  for (const auto& r : rows) m = std::max(m, static_cast<std::size_t>(r.b));
  return m;
}

std::vector<CheckpointRow> run_plan_stream(const std::function<double()>& next,
                                           const CheckpointPlan& plan) {
  if (!plan.monotone_b())
    throw config_error("streaming pass requires non-decreasing trim depths; split the plan");
  std::vector<CheckpointRow> out;
  if (plan.rows.empty()) return out;
  TrimmedAccumulator acc(plan.max_b());
  std::vector<CompensatedSum> truncated(plan.rows.size());
  std::size_t emit = 0;
  const std::uint64_t n_last = plan.rows.back().n;
  for (std::uint64_t i = 1; i <= n_last; ++i) {
    const double v = next();
    acc.push(v);
    for (std::size_t j = emit; j < plan.rows.size(); ++j)
      if (v <= plan.rows[j].f) truncated[j].add(v);
    while (emit < plan.rows.size() && plan.rows[emit].n == i) {
      const auto& r = plan.rows[emit];
      out.push_back({r.n, r.b, r.f, acc.sum(), acc.trimmed_sum(r.b), truncated[emit].value()});
      ++emit;
    }
  }
  return out;
}

std::vector<CheckpointRow> run_plan(std::span<const double> values, const CheckpointPlan& plan) {
  if (!plan.rows.empty() && plan.rows.back().n > values.size())
    throw config_error("plan reaches past the end of the value buffer");
  // Split into maximal segments with non-decreasing b; one buffered pass each.
  std::vector<CheckpointRow> out(plan.rows.size());
  std::size_t lo = 0;
  while (lo < plan.rows.size()) {
    std::size_t hi = lo + 1;
    while (hi < plan.rows.size() && plan.rows[hi].b >= plan.rows[hi - 1].b) ++hi;
    CheckpointPlan seg{std::vector<Checkpoint>(plan.rows.begin() + lo, plan.rows.begin() + hi)};
    std::size_t pos = 0;
    auto rows = run_plan_stream([&values, &pos] { return values[pos++]; }, seg);
    std::move(rows.begin(), rows.end(), out.begin() + lo);
    lo = hi;
  }
  return out;
}

}  // namespace trimlab
