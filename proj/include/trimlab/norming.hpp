#pragma once
// Norming constants for lightly trimmed sums: the scale d(n,b) against which a
// trimmed sum stabilises, the threshold g(n,b) separating the trimmed bulk
// from the extremes, and diagnostic ratios between the two.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trimlab/regvar.hpp"

namespace trimlab {

// Rule mapping a checkpoint length n to a trim depth b. Either a power rule
// b = ceil(n^theta) or an explicit lookup table.
class TrimmingSchedule {
 public:
  static TrimmingSchedule power_rule(double theta);
  static TrimmingSchedule explicit_table(std::map<std::uint64_t, std::uint64_t> table);

  std::uint64_t b_of(std::uint64_t n) const;

  bool is_power() const { return kind_ == Kind::Power; }
  double theta() const { return theta_; }
  const std::map<std::uint64_t, std::uint64_t>& table() const { return table_; }

  // Canonical JSON text, e.g. {"kind":"power","theta":0.7}. Stable across runs.
  std::string describe_json() const;

 private:
  enum class Kind { Power, Table };
  Kind kind_ = Kind::Power;
  double theta_ = 0.0;
  std::map<std::uint64_t, std::uint64_t> table_;
};

// Interior offset zeta(b) = b^(2/3), exact on perfect cubes.
double zeta(std::uint64_t b);

// Threshold below which all but about b of n draws fall: the upper quantile at
// mass (b - zeta(b)) / n. Requires b >= 2 and (b - zeta(b)) / n in (0,1).
double g_threshold(const RegVaryingTail& tail, std::uint64_t n, std::uint64_t b);

// Norming scale d(n,b) = alpha/(1-alpha) * n^(1/alpha) * b^(1-1/alpha) * conj,
// where conj evaluates the de Bruijn conjugate of L^(-1/alpha) at (n/b)^(1/alpha).
// Computed in log space; propagates nonconvergence from the conjugate solve.
double d_norming(const RegVaryingTail& tail, std::uint64_t n, std::uint64_t b);

struct TruncatedSumPrediction {
  double exact;       // n * E[X 1{X <= f}] by closed form or quadrature
  double asymptotic;  // n * alpha/(1-alpha) * L(f) f^(1-alpha)
};

TruncatedSumPrediction expected_truncated_sum(const RegVaryingTail& tail, std::uint64_t n,
                                              double f);

struct NormingRow {
  std::uint64_t n = 0;
  std::uint64_t b = 0;
  double zeta = 0.0;
  double g = 0.0;
  double d = 0.0;
  // (d/g) / (alpha/(1-alpha) * b); drifts to 1 as b grows, equals
  // ((b - zeta)/b)^(1/alpha) when L is constant.
  double ratio_diag = 0.0;
};

// One row per checkpoint n; enforces 2 <= b < n for every row.
std::vector<NormingRow> norming_table(const RegVaryingTail& tail, const TrimmingSchedule& schedule,
                                      const std::vector<std::uint64_t>& checkpoints);

}  // namespace trimlab
