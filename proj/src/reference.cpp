// Naive full-sort implementations. Slow but obviously correct; the streaming
// kernels are tested against these.
#include "trimlab/reference.hpp"

#include <algorithm>

#include "trimlab/errors.hpp"
#include "trimlab/trimming.hpp"

namespace trimlab::reference {

std::vector<double> top_b(std::span<const double> values, std::size_t b) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  s.resize(std::min(b, s.size()));
  return s;
}

double trimmed_sum(std::span<const double> values, std::size_t b) {
  if (b > values.size()) throw config_error("cannot trim more values than given");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());  // ascending; drop the tail, sum small-first
  CompensatedSum acc;
  for (std::size_t i = 0; i + b < s.size(); ++i) acc.add(s[i]);
  return acc.value();
}

double truncated_sum(std::span<const double> values, double f) {
  std::vector<double> keep;
  for (double v : values)
    if (v <= f) keep.push_back(v);
  std::sort(keep.begin(), keep.end());
  CompensatedSum acc;
  for (double v : keep) acc.add(v);
  return acc.value();
}

std::vector<CheckpointRow> run_plan(std::span<const double> values, const CheckpointPlan& plan) {
  std::vector<CheckpointRow> out;
  for (const auto& r : plan.rows) {
    auto prefix = values.subspan(0, r.n);
    CompensatedSum total;
    for (double v : prefix) total.add(v);
    out.push_back(
        {r.n, r.b, r.f, total.value(), trimmed_sum(prefix, r.b), truncated_sum(prefix, r.f)});
  }
  return out;
}

}  // namespace trimlab::reference
