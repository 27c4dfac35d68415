#pragma once
#include <span>
#include <vector>

#include "trimlab/trimming.hpp"

namespace trimlab::reference {

// Serial full-sort oracles for the streaming kernels. Kept deliberately naive:
// sort a copy, slice, sum ascending. Tests and the benchmark compare against
// these; they are the ground truth for the one-pass implementations.

std::vector<double> top_b(std::span<const double> values, std::size_t b);  // descending
double trimmed_sum(std::span<const double> values, std::size_t b);
double truncated_sum(std::span<const double> values, double f);
std::vector<CheckpointRow> run_plan(std::span<const double> values, const CheckpointPlan& plan);

}  // namespace trimlab::reference
