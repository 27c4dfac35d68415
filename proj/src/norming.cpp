#include "trimlab/norming.hpp"

#include <cmath>
#include <sstream>

#include "trimlab/errors.hpp"
#include "json.hpp"

namespace trimlab {

TrimmingSchedule TrimmingSchedule::power_rule(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw config_error("power rule exponent must lie in (0,1)");
  TrimmingSchedule s;
  s.kind_ = Kind::Power;
  s.theta_ = theta;
  return s;
}

TrimmingSchedule TrimmingSchedule::explicit_table(std::map<std::uint64_t, std::uint64_t> table) {
  if (table.empty()) throw config_error("explicit schedule table must not be empty");
  TrimmingSchedule s;
  s.kind_ = Kind::Table;
  s.table_ = std::move(table);
  return s;
}

std::uint64_t TrimmingSchedule::b_of(std::uint64_t n) const {
  if (kind_ == Kind::Table) {
    auto it = table_.find(n);
    if (it == table_.end()) throw config_error("no trim depth listed for this checkpoint length");
    return it->second;
  }
  const double p = std::pow(static_cast<double>(n), theta_);
  const double r = std::round(p);
  // pow() can land a hair above an integer; ceil would then overshoot by one.
  if (std::fabs(p - r) < 1e-9 * std::max(1.0, r)) return static_cast<std::uint64_t>(r);
  return static_cast<std::uint64_t>(std::ceil(p));
}

std::string TrimmingSchedule::describe_json() const {
  nlohmann::json j;
  if (kind_ == Kind::Power) {
    j["kind"] = "power";
    j["theta"] = theta_;
  } else {
    j["kind"] = "table";
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [n, b] : table_) t[std::to_string(n)] = b;
    j["table"] = t;
  }
  return j.dump();
}

double zeta(std::uint64_t b) {
  const double c = std::cbrt(static_cast<double>(b));
  // library cbrt is not correctly rounded; snap perfect cubes so the promised
  // exactness actually holds
  const double r = std::round(c);
  if (r * r * r == static_cast<double>(b)) return r * r;
  return c * c;
}

double g_threshold(const RegVaryingTail& tail, std::uint64_t n, std::uint64_t b) {
  if (b < 2) throw config_error("threshold needs b >= 2 so that b - zeta(b) > 0");
  const double mass = (static_cast<double>(b) - zeta(b)) / static_cast<double>(n);
  if (!(mass > 0.0 && mass < 1.0))
    throw config_error("(b - zeta(b))/n must lie in (0,1); n too small for this b");
  return tail.quantile(1.0 - mass);
}

double d_norming(const RegVaryingTail& tail, std::uint64_t n, std::uint64_t b) {
  if (b < 1 || b >= n) throw config_error("norming scale needs 1 <= b < n");
  const double a = tail.alpha();
  const double inv_a = 1.0 / a;
  const double ln = std::log(static_cast<double>(n));
  const double lb = std::log(static_cast<double>(b));
  const double log_base = std::log(a / (1.0 - a)) + inv_a * ln + (1.0 - inv_a) * lb;
  // Conjugate of L^(-1/alpha) at (n/b)^(1/alpha), argument passed in log form.
  const SlowlyVarying Lc = tail.L().pow(-inv_a);
  const ConjugateResult conj = debruijn_conjugate_log(Lc, inv_a * (ln - lb));
  return std::exp(log_base) * conj.value;
}

TruncatedSumPrediction expected_truncated_sum(const RegVaryingTail& tail, std::uint64_t n,
                                              double f) {
  const double nn = static_cast<double>(n);
  return {nn * tail.truncated_first_moment_exact(f),
          nn * tail.truncated_first_moment_asymptotic(f)};
}

std::vector<NormingRow> norming_table(const RegVaryingTail& tail, const TrimmingSchedule& schedule,
                                      const std::vector<std::uint64_t>& checkpoints) {
  std::vector<NormingRow> out;
  out.reserve(checkpoints.size());
  const double a = tail.alpha();
  for (std::uint64_t n : checkpoints) {
    const std::uint64_t b = schedule.b_of(n);
    if (b < 2 || b >= n) {
      std::ostringstream msg;
      msg << "schedule gives b=" << b << " at n=" << n << "; need 2 <= b < n";
      throw config_error(msg.str());
    }
    NormingRow row;
    row.n = n;
    row.b = b;
    row.zeta = zeta(b);
    row.g = g_threshold(tail, n, b);
    row.d = d_norming(tail, n, b);
    row.ratio_diag = (row.d / row.g) / (a / (1.0 - a) * static_cast<double>(b));
    out.push_back(row);
  }
  return out;
}

}  // namespace trimlab
