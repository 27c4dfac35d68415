#pragma once
#include <stdexcept>
#include <string>

namespace trimlab {

// Bad parameter / domain violation detected before any computation.
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Iterative solver hit its iteration cap before meeting tolerance.
struct nonconvergence_error : std::runtime_error {
  nonconvergence_error(const std::string& what, double last_value, double last_step)
      : std::runtime_error(what), last_value(last_value), last_step(last_step) {}
  double last_value;
  double last_step;
};

// A generated value cannot be represented (bit window exhausted, double overflow).
struct precision_overflow_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Not enough usable samples/counts to produce the requested estimate.
struct insufficient_data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace trimlab
