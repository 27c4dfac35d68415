#pragma once
// Lower bounds on the psi dependence coefficient between coordinates at a
// given lag, estimated by counting threshold events across replicas. A large
// value certifies dependence; a small value only says the tested event family
// found none.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trimlab/processes.hpp"

namespace trimlab {

struct EventFamily {
  std::vector<double> thresholds;  // strictly increasing, > 0
  int depth = 1;                   // 1: single coordinate; 2: adds neighbor intersections
  std::uint64_t min_count = 20;    // pairs with fewer hits on either side are skipped

  static EventFamily validated(std::vector<double> thresholds, int depth = 1,
                               std::uint64_t min_count = 20);
};

// |joint * total / (b * c) - 1| from integer counts; b, c >= 1 required.
double psi_measure(std::uint64_t joint, std::uint64_t b_count, std::uint64_t c_count,
                   std::uint64_t total);

struct PsiEstimate {
  std::uint64_t lag = 0;
  double value = 0.0;   // sup of psi_measure over admissible event pairs
  std::string b_desc;   // event achieving the sup, anchor side
  std::string c_desc;   // event achieving the sup, lagged side
  std::uint64_t joint = 0;
  std::uint64_t b_count = 0;
  std::uint64_t c_count = 0;
  std::uint64_t total = 0;
};

// Draw `replicas` independent short paths and count events at coordinates
// k_anchor and k_anchor + lag (1-based). Requires k_anchor >= depth so the
// depth-2 neighbor exists. Deterministic for any worker count.
PsiEstimate estimate_psi(const ProcessSpec& spec, const EventFamily& family, std::uint64_t lag,
                         std::uint64_t k_anchor, std::uint64_t replicas,
                         std::uint64_t master_seed, int workers = 0);

// Same counting over pre-generated paths (each long enough for the lag).
PsiEstimate estimate_psi(std::span<const SamplePath> paths, const EventFamily& family,
                         std::uint64_t lag, std::uint64_t k_anchor);

std::vector<PsiEstimate> psi_scan(const ProcessSpec& spec, const EventFamily& family,
                                  const std::vector<std::uint64_t>& lags, std::uint64_t k_anchor,
                                  std::uint64_t replicas, std::uint64_t master_seed,
                                  int workers = 0);

// Smallest lag whose estimate falls strictly below the threshold.
std::optional<std::uint64_t> min_mixing_lag(std::span<const PsiEstimate> by_lag,
                                            double threshold = 1.0);

}  // namespace trimlab
