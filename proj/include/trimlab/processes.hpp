#pragma once
// Stationary processes whose Birkhoff sums the rest of the library trims:
// iid draws from a regularly varying tail, observables over full-branch
// interval maps (Luroth digits, doubling map), and a bit-exact variant of the
// doubling-map observable that sidesteps float orbits entirely.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "trimlab/regvar.hpp"
#include "trimlab/rng.hpp"

namespace trimlab {

// Piecewise affine map on [0,1). Each cell [l_i, r_i) carries T(x) = s_i x + q_i
// with image inside [0,1]. Branches are affine by construction; whether they
// expand or cover the whole interval is checked by the validator, not assumed.
class PiecewiseMapSpec {
 public:
  enum class Kind { Explicit, CanonicalLuroth };

  // breaks = {0, ..., 1} strictly increasing; slopes/intercepts sized breaks-1.
  static PiecewiseMapSpec explicit_cells(std::vector<double> breaks, std::vector<double> slopes,
                                         std::vector<double> intercepts);
  // T(x) = 2x mod 1 as a two-cell explicit map.
  static PiecewiseMapSpec doubling();
  // Countable family I_n = [1/(n+1), 1/n) with T(x) = n(n+1)x - n.
  static PiecewiseMapSpec canonical_luroth();

  double apply(double x) const;
  // 1-based; for the Luroth family this is the digit of x.
  std::size_t cell_index(double x) const;
  // 0 means countably many.
  std::size_t branch_count() const;
  double slope(std::size_t cell) const;
  double intercept(std::size_t cell) const;
  // True when every branch maps its cell onto the whole of [0,1).
  bool full_branch() const;

  Kind kind() const { return kind_; }
  const std::vector<double>& breaks() const { return breaks_; }

 private:
  Kind kind_ = Kind::CanonicalLuroth;
  std::vector<double> breaks_;
  std::vector<double> slopes_;
  std::vector<double> intercepts_;
};

// Step function constant on map cells. Canonical form: value n^(1/alpha) on
// cell n, the observable whose Birkhoff sums have tail index alpha.
class StepObservable {
 public:
  static StepObservable canonical(double alpha);
  static StepObservable per_cell(std::vector<double> values);

  double value_for_cell(std::size_t cell) const;  // 1-based
  double evaluate(const PiecewiseMapSpec& map, double x) const;
  // Throws config_error when a per-cell table cannot cover the map's branches.
  void check_alignment(const PiecewiseMapSpec& map) const;

  bool is_canonical() const { return canonical_; }
  double alpha() const { return alpha_; }
  const std::vector<double>& values() const { return values_; }

 private:
  bool canonical_ = true;
  double alpha_ = 0.5;
  std::vector<double> values_;
};

struct IidRegVarying {
  RegVaryingTail tail;
};

// Luroth digit process: digit d has mass 1/(d(d+1)), observed as d^(1/alpha).
struct LurothStep {
  double alpha = 0.5;
};

// Doubling-map observable x -> x^(-gamma) evaluated directly on the binary
// expansion: z leading zeros and a window_bits mantissa determine the value to
// full double precision, so shifted coordinates are bit-exact.
struct DoublingPareto {
  double gamma;
  int window_bits = 64;       // mantissa width, 1..64
  int max_window_bits = 512;  // give up (precision_overflow) past this many zeros
};

// Diagnostic float iteration of an explicit map; kept for contrast with the
// bit-exact generator, not used by the estimators.
struct FloatOrbit {
  PiecewiseMapSpec map;
  StepObservable observable;
  std::uint64_t burn_in = 1000;
};

// LurothStep first: it is the only default-constructible alternative, which
// keeps config structs holding a ProcessSpec default-constructible too.
using ProcessSpec = std::variant<LurothStep, IidRegVarying, DoublingPareto, FloatOrbit>;

std::string spec_name(const ProcessSpec& spec);
// Canonical JSON (sorted keys, no whitespace); equal specs give equal strings.
std::string canonical_spec_json(const ProcessSpec& spec);

// Stationary marginal tail P(value > x). Not defined for FloatOrbit.
double marginal_tail(const ProcessSpec& spec, double x);
// E[value * 1{value <= f}] under the stationary marginal (iid and Luroth only).
double process_truncated_first_moment(const ProcessSpec& spec, double f);
// Tail used for norming constants: iid keeps its own, Luroth gets the constant
// slowly varying factor its lattice tail is asymptotic to. Others: config_error.
RegVaryingTail norming_tail(const ProcessSpec& spec);

// --- draw sources, injectable for tests ---

class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual double u01() = 0;
};

class RngUniformSource final : public UniformSource {
 public:
  explicit RngUniformSource(Rng rng) : rng_(rng) {}
  double u01() override { return rng_.uniform01(); }

 private:
  Rng rng_;
};

// Replays a fixed list; running past the end is a test bug (throws logic_error).
class FixedUniformSource final : public UniformSource {
 public:
  explicit FixedUniformSource(std::vector<double> vals) : vals_(std::move(vals)) {}
  double u01() override;

 private:
  std::vector<double> vals_;
  std::size_t pos_ = 0;
};

// 64-bit words consumed MSB first.
class BitSource {
 public:
  virtual ~BitSource() = default;
  virtual std::uint64_t next_word() = 0;
};

class RngBitSource final : public BitSource {
 public:
  explicit RngBitSource(Rng rng) : rng_(rng) {}
  std::uint64_t next_word() override { return rng_.next_u64(); }

 private:
  Rng rng_;
};

class FixedBitSource final : public BitSource {
 public:
  explicit FixedBitSource(std::vector<std::uint64_t> words) : words_(std::move(words)) {}
  std::uint64_t next_word() override;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t pos_ = 0;
};

class PathGenerator {
 public:
  virtual ~PathGenerator() = default;
  virtual double next() = 0;
};

std::unique_ptr<PathGenerator> make_generator(const ProcessSpec& spec, Rng rng);
// Source-injecting factories used by tests with hand-written streams.
std::unique_ptr<PathGenerator> make_iid_generator(RegVaryingTail tail,
                                                  std::unique_ptr<UniformSource> u);
std::unique_ptr<PathGenerator> make_luroth_generator(double alpha,
                                                     std::unique_ptr<UniformSource> u);
std::unique_ptr<PathGenerator> make_doubling_pareto_generator(DoublingPareto params,
                                                              std::unique_ptr<BitSource> bits);
std::unique_ptr<PathGenerator> make_orbit_generator(PiecewiseMapSpec map, StepObservable obs,
                                                    std::uint64_t burn_in, double x0);

struct SamplePath {
  std::vector<double> values;
  SeedRecord seed;
  std::string spec_json;
};

SamplePath sample_path(const ProcessSpec& spec, std::uint64_t n, std::uint64_t master_seed,
                       std::uint64_t replica = 0);

// Header line then one %.16e value per line.
void write_path_dump(std::ostream& os, const SamplePath& path);

// --- structural validation of an (map, observable) example ---

struct ConditionCheck {
  bool pass = false;
  std::string note;
};

struct ValidationReport {
  ConditionCheck affine;
  ConditionCheck finite_image;
  ConditionCheck expansion;
  ConditionCheck variation;
  std::string mixing_note;
  double min_slope = 0.0;
  double worst_variation_ratio = 0.0;
  double witness_ell = 0.0;
  bool all_pass() const {
    return affine.pass && finite_image.pass && expansion.pass && variation.pass;
  }
};

// k_bound caps branch enumeration for countable families. ell_grid supplies the
// truncation levels at which variation bounds are checked.
ValidationReport validate_example_conditions(const PiecewiseMapSpec& map,
                                             const StepObservable& obs, std::size_t k_bound,
                                             const std::vector<double>& ell_grid);

// --- empirical marginal check ---

struct TailCheckRow {
  double x = 0.0;
  double expected = 0.0;
  double empirical = 0.0;
  double se = 0.0;         // binomial SE at the expected mass
  double deviation = 0.0;  // (empirical - expected) / se
};

struct TailCheckReport {
  std::vector<TailCheckRow> rows;
  double max_abs_deviation = 0.0;
};

TailCheckReport empirical_tail_check(std::span<const double> values,
                                     const std::function<double(double)>& ref_tail,
                                     const std::vector<double>& grid);

}  // namespace trimlab
