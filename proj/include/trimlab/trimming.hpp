#pragma once
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace trimlab {

/** Neumaier-compensated running sum; error stays O(eps * sum|x|) regardless of length. */
class CompensatedSum {
 public:
  void add(double v) {
    const double t = s_ + v;
    if (std::abs(s_) >= std::abs(v))
      c_ += (s_ - t) + v;
    else
      c_ += (v - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

/**
 * Single-pass accumulator for trimmed sums: the k_max largest values seen
 * (min-heap, O(log k_max) per displacing push) plus a compensated sum of
 * everything displaced below them.
 *
 * trimmed_sum(b) adds the retained values under the b largest onto that bulk,
 * so the result carries no large-minus-large cancellation even when the
 * extremes dwarf the rest. Any maximal multiset gives the same sum under
 * ties, so tie-breaking is arbitrary by design.
 */
class TrimmedAccumulator {
 public:
  explicit TrimmedAccumulator(std::size_t k_max);

  // Observables are >= 0 by construction; NaN/negative rejected, +inf is a
  // precision overflow.
  void push(double v);

  std::uint64_t count() const { return count_; }
  double sum() const { return total_.value(); }
  double trimmed_sum(std::size_t b) const;  // b <= min(k_max, count)
  std::vector<double> retained() const;     // current top multiset, descending
  std::size_t k_max() const { return k_max_; }

 private:
  std::size_t k_max_;
  std::uint64_t count_ = 0;
  CompensatedSum total_;
  CompensatedSum bulk_;       // everything displaced out of the heap
  std::vector<double> heap_;  // min-heap of the k_max largest
};

struct Checkpoint {
  std::uint64_t n = 0;
  std::uint64_t b = 0;
  double f = 0;  // truncation level; +inf means "no truncation"
};

struct CheckpointRow {
  std::uint64_t n = 0, b = 0;
  double f = 0;
  double sum = 0;        // S_n
  double trimmed = 0;    // S_n with the b largest summands removed
  double truncated = 0;  // sum of the first n values that are <= f
};

/** Checkpoint list with n strictly increasing and b_j < n_j. */
struct CheckpointPlan {
  std::vector<Checkpoint> rows;
  static CheckpointPlan validated(std::vector<Checkpoint> rows);
  bool monotone_b() const;
  std::size_t max_b() const;
};

// One streaming pass; plan must have non-decreasing b (the K bound for the
// whole pass is the last checkpoint's b). Throws config_error otherwise.
std::vector<CheckpointRow> run_plan_stream(const std::function<double()>& next,
                                           const CheckpointPlan& plan);

// In-memory path: non-monotone b is handled by splitting the plan into
// monotone segments and re-reading the buffer once per segment.
std::vector<CheckpointRow> run_plan(std::span<const double> values, const CheckpointPlan& plan);

}  // namespace trimlab
