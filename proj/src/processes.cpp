#include "trimlab/processes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "trimlab/errors.hpp"

namespace trimlab {

namespace {

constexpr double kEdgeTol = 1e-12;

double clamp_unit(double t) {
  if (t < 0.0) return 0.0;
  if (t >= 1.0) return std::nextafter(1.0, 0.0);
  return t;
}

}  // namespace

// --- PiecewiseMapSpec ---

PiecewiseMapSpec PiecewiseMapSpec::explicit_cells(std::vector<double> breaks,
                                                  std::vector<double> slopes,
                                                  std::vector<double> intercepts) {
  if (breaks.size() < 2) throw config_error("explicit map needs at least one cell");
  if (breaks.front() != 0.0 || breaks.back() != 1.0)
    throw config_error("cell breakpoints must start at 0 and end at 1");
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!std::isfinite(breaks[i]) || !(breaks[i] < breaks[i + 1]))
      throw config_error("cell breakpoints must be finite and strictly increasing");
  }
  const std::size_t cells = breaks.size() - 1;
  if (slopes.size() != cells || intercepts.size() != cells)
    throw config_error("need one slope and one intercept per cell");
  for (std::size_t i = 0; i < cells; ++i) {
    if (!std::isfinite(slopes[i]) || !(slopes[i] > 0.0))
      throw config_error("cell slopes must be finite and > 0");
    if (!std::isfinite(intercepts[i])) throw config_error("cell intercepts must be finite");
    const double lo = slopes[i] * breaks[i] + intercepts[i];
    const double hi = slopes[i] * breaks[i + 1] + intercepts[i];
    if (lo < -kEdgeTol || hi > 1.0 + kEdgeTol)
      throw config_error("cell image must stay inside [0,1]");
  }
  PiecewiseMapSpec m;
  m.kind_ = Kind::Explicit;
  m.breaks_ = std::move(breaks);
  m.slopes_ = std::move(slopes);
  m.intercepts_ = std::move(intercepts);
  return m;
}

PiecewiseMapSpec PiecewiseMapSpec::doubling() {
  return explicit_cells({0.0, 0.5, 1.0}, {2.0, 2.0}, {0.0, -1.0});
}

PiecewiseMapSpec PiecewiseMapSpec::canonical_luroth() {
  PiecewiseMapSpec m;
  m.kind_ = Kind::CanonicalLuroth;
  return m;
}

std::size_t PiecewiseMapSpec::cell_index(double x) const {
  if (kind_ == Kind::CanonicalLuroth) {
    if (!(x > 0.0))
      throw precision_overflow_error("digit of a nonpositive point diverges");
    if (!(x < 1.0)) throw config_error("map argument must lie in [0,1)");
    // x in [1/(n+1), 1/n)  <=>  1/x in (n, n+1]
    const double inv = 1.0 / x;
    if (inv > 9.0e18) throw precision_overflow_error("digit exceeds integer range");
    auto n = static_cast<std::size_t>(std::ceil(inv)) - 1;
    // ceil can misplace boundary points by one ulp; nudge into the honest cell
    if (n >= 1 && x < 1.0 / static_cast<double>(n + 1)) ++n;
    if (n >= 2 && x >= 1.0 / static_cast<double>(n)) --n;
    return std::max<std::size_t>(n, 1);
  }
  if (!(x >= 0.0) || !(x < 1.0)) throw config_error("map argument must lie in [0,1)");
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
  return static_cast<std::size_t>(it - breaks_.begin() - 1) + 1;
}

double PiecewiseMapSpec::apply(double x) const {
  if (kind_ == Kind::CanonicalLuroth) {
    if (x <= 0.0) return 0.0;  // absorbing convention at the left endpoint
    const std::size_t n = cell_index(x);
    const double nn = static_cast<double>(n);
    return clamp_unit(nn * (nn + 1.0) * x - nn);
  }
  const std::size_t cell = cell_index(x);
  return clamp_unit(slopes_[cell - 1] * x + intercepts_[cell - 1]);
}

std::size_t PiecewiseMapSpec::branch_count() const {
  return kind_ == Kind::Explicit ? breaks_.size() - 1 : 0;
}

double PiecewiseMapSpec::slope(std::size_t cell) const {
  if (cell < 1) throw config_error("cells are numbered from 1");
  if (kind_ == Kind::CanonicalLuroth)
    return static_cast<double>(cell) * (static_cast<double>(cell) + 1.0);
  if (cell > branch_count()) throw config_error("cell index past the last branch");
  return slopes_[cell - 1];
}

double PiecewiseMapSpec::intercept(std::size_t cell) const {
  if (cell < 1) throw config_error("cells are numbered from 1");
  if (kind_ == Kind::CanonicalLuroth) return -static_cast<double>(cell);
  if (cell > branch_count()) throw config_error("cell index past the last branch");
  return intercepts_[cell - 1];
}

bool PiecewiseMapSpec::full_branch() const {
  if (kind_ == Kind::CanonicalLuroth) return true;
  for (std::size_t i = 0; i + 1 < breaks_.size(); ++i) {
    const double lo = slopes_[i] * breaks_[i] + intercepts_[i];
    const double hi = slopes_[i] * breaks_[i + 1] + intercepts_[i];
    if (std::fabs(lo) > kEdgeTol || std::fabs(hi - 1.0) > kEdgeTol) return false;
  }
  return true;
}

// --- StepObservable ---

StepObservable StepObservable::canonical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("observable exponent must lie in (0,1)");
  StepObservable o;
  o.canonical_ = true;
  o.alpha_ = alpha;
  return o;
}

StepObservable StepObservable::per_cell(std::vector<double> values) {
  if (values.empty()) throw config_error("per-cell observable needs at least one value");
  for (double v : values)
    if (!std::isfinite(v) || v < 0.0)
      throw config_error("observable values must be finite and >= 0");
  StepObservable o;
  o.canonical_ = false;
  o.values_ = std::move(values);
  return o;
}

double StepObservable::value_for_cell(std::size_t cell) const {
  if (cell < 1) throw config_error("cells are numbered from 1");
  if (canonical_) return std::pow(static_cast<double>(cell), 1.0 / alpha_);
  if (cell > values_.size()) throw config_error("observable table has no value for this branch");
  return values_[cell - 1];
}

void StepObservable::check_alignment(const PiecewiseMapSpec& map) const {
  if (canonical_) return;
  const std::size_t branches = map.branch_count();
  if (branches == 0)
    throw config_error("a per-cell table cannot cover countably many branches");
  if (values_.size() != branches)
    throw config_error("observable table size must match the number of branches");
}

double StepObservable::evaluate(const PiecewiseMapSpec& map, double x) const {
  return value_for_cell(map.cell_index(x));
}

// --- spec descriptions ---

namespace {

nlohmann::json sv_json(const SlowlyVarying& L) {
  nlohmann::json j;
  if (L.is_constant()) {
    j["kind"] = "const";
    j["c"] = L.constant_value();
  } else {
    j["kind"] = "logpow";
    j["beta"] = L.beta();
  }
  return j;
}

nlohmann::json map_json(const PiecewiseMapSpec& m) {
  nlohmann::json j;
  if (m.kind() == PiecewiseMapSpec::Kind::CanonicalLuroth) {
    j["kind"] = "luroth";
    return j;
  }
  j["kind"] = "explicit";
  j["breaks"] = m.breaks();
  std::vector<double> slopes, intercepts;
  for (std::size_t c = 1; c <= m.branch_count(); ++c) {
    slopes.push_back(m.slope(c));
    intercepts.push_back(m.intercept(c));
  }
  j["slopes"] = slopes;
  j["intercepts"] = intercepts;
  return j;
}

nlohmann::json obs_json(const StepObservable& o) {
  nlohmann::json j;
  if (o.is_canonical()) {
    j["kind"] = "canonical";
    j["alpha"] = o.alpha();
  } else {
    j["kind"] = "per_cell";
    j["values"] = o.values();
  }
  return j;
}

}  // namespace

std::string spec_name(const ProcessSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidRegVarying>) return "iid";
        if constexpr (std::is_same_v<T, LurothStep>) return "luroth";
        if constexpr (std::is_same_v<T, DoublingPareto>) return "doubling_pareto";
        if constexpr (std::is_same_v<T, FloatOrbit>) return "orbit";
      },
      spec);
}

std::string canonical_spec_json(const ProcessSpec& spec) {
  nlohmann::json j = std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        nlohmann::json j;
        if constexpr (std::is_same_v<T, IidRegVarying>) {
          j["kind"] = "iid";
          j["alpha"] = s.tail.alpha();
          j["l"] = sv_json(s.tail.L());
          j["support_left"] = s.tail.support_left();
        } else if constexpr (std::is_same_v<T, LurothStep>) {
          j["kind"] = "luroth";
          j["alpha"] = s.alpha;
        } else if constexpr (std::is_same_v<T, DoublingPareto>) {
          j["kind"] = "doubling_pareto";
          j["gamma"] = s.gamma;
          j["window_bits"] = s.window_bits;
          j["max_window_bits"] = s.max_window_bits;
        } else {
          j["kind"] = "orbit";
          j["map"] = map_json(s.map);
          j["observable"] = obs_json(s.observable);
          j["burn_in"] = s.burn_in;
        }
        return j;
      },
      spec);
  return j.dump();
}

// --- marginals ---

namespace {

// Largest integer d with d^(1/alpha) <= x, robust to pow() roundoff.
std::uint64_t luroth_lattice_bound(double x, double alpha) {
  if (x < 1.0) return 0;
  double est = std::pow(x, alpha);
  if (est > 9.0e18) throw config_error("truncation level too large for the exact lattice sum");
  auto d = static_cast<std::uint64_t>(est);
  const double inv_a = 1.0 / alpha;
  while (d >= 1 && std::pow(static_cast<double>(d), inv_a) > x) --d;
  while (std::pow(static_cast<double>(d + 1), inv_a) <= x) ++d;
  return d;
}

}  // namespace

double marginal_tail(const ProcessSpec& spec, double x) {
  return std::visit(
      [x](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidRegVarying>) {
          return s.tail.tail(x);
        } else if constexpr (std::is_same_v<T, LurothStep>) {
          if (x < 1.0) return 1.0;
          const std::uint64_t d = luroth_lattice_bound(x, s.alpha);
          return 1.0 / (static_cast<double>(d) + 1.0);
        } else if constexpr (std::is_same_v<T, DoublingPareto>) {
          if (x <= 1.0) return 1.0;
          return std::pow(x, -1.0 / s.gamma);
        } else {
          throw config_error("no closed-form marginal for float orbits");
        }
      },
      spec);
}

double process_truncated_first_moment(const ProcessSpec& spec, double f) {
  return std::visit(
      [f](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidRegVarying>) {
          return s.tail.truncated_first_moment_exact(f);
        } else if constexpr (std::is_same_v<T, LurothStep>) {
          const std::uint64_t D = luroth_lattice_bound(f, s.alpha);
          if (D > 200000000ull)
            throw config_error("truncation level too large for the exact lattice sum");
          const double inv_a = 1.0 / s.alpha;
          double acc = 0.0;
          for (std::uint64_t d = D; d >= 1; --d) {  // small terms first
            const double dd = static_cast<double>(d);
            acc += std::pow(dd, inv_a) / (dd * (dd + 1.0));
          }
          return acc;
        } else {
          throw config_error("truncated moment is defined for iid and luroth processes only");
        }
      },
      spec);
}

RegVaryingTail norming_tail(const ProcessSpec& spec) {
  return std::visit(
      [](const auto& s) -> RegVaryingTail {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidRegVarying>) {
          return s.tail;
        } else if constexpr (std::is_same_v<T, LurothStep>) {
          // lattice tail 1/(floor(x^alpha)+1) ~ x^-alpha
          return RegVaryingTail(s.alpha, SlowlyVarying::constant(1.0), 1.0);
        } else {
          throw config_error("no norming tail defined for this process");
        }
      },
      spec);
}

// --- sources ---

double FixedUniformSource::u01() {
  if (pos_ >= vals_.size()) throw std::logic_error("fixed uniform source ran dry");
  return vals_[pos_++];
}

std::uint64_t FixedBitSource::next_word() {
  if (pos_ >= words_.size()) throw std::logic_error("fixed bit source ran dry");
  return words_[pos_++];
}

// --- generators ---

namespace {

class IidGen final : public PathGenerator {
 public:
  IidGen(RegVaryingTail tail, std::unique_ptr<UniformSource> u)
      : tail_(std::move(tail)), u_(std::move(u)) {}
  double next() override { return tail_.quantile(u_->u01()); }

 private:
  RegVaryingTail tail_;
  std::unique_ptr<UniformSource> u_;
};

class LurothGen final : public PathGenerator {
 public:
  LurothGen(double alpha, std::unique_ptr<UniformSource> u) : inv_a_(1.0 / alpha), u_(std::move(u)) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("digit exponent must lie in (0,1)");
  }
  double next() override {
    const double u = u_->u01();
    const double d = std::floor(1.0 / (1.0 - u));  // digit mass 1/(d(d+1))
    if (!std::isfinite(d)) throw precision_overflow_error("digit overflowed double range");
    const double v = std::pow(d, inv_a_);
    if (!std::isfinite(v)) throw precision_overflow_error("observable overflowed double range");
    return v;
  }

 private:
  double inv_a_;
  std::unique_ptr<UniformSource> u_;
};

class DoublingParetoGen final : public PathGenerator {
 public:
  DoublingParetoGen(DoublingPareto params, std::unique_ptr<BitSource> bits)
      : p_(params), bits_(std::move(bits)) {
    if (!(p_.gamma > 0.0) || !std::isfinite(p_.gamma))
      throw config_error("tail exponent gamma must be finite and > 0");
    if (p_.window_bits < 1 || p_.window_bits > 64)
      throw config_error("window_bits must lie in 1..64");
    if (p_.max_window_bits < p_.window_bits)
      throw config_error("max_window_bits must be >= window_bits");
  }

  double next() override {
    ensure_bits(256);
    const std::uint64_t rel = cursor_ - base_bit_;
    const std::size_t wi = rel >> 6;
    const int off = static_cast<int>(rel & 63);
    const std::uint64_t w0 = buf_[wi];
    const std::uint64_t w1 = buf_[wi + 1];
    const std::uint64_t w2 = buf_[wi + 2];
    const std::uint64_t hi = off ? (w0 << off) | (w1 >> (64 - off)) : w0;
    const std::uint64_t lo = off ? (w1 << off) | (w2 >> (64 - off)) : w1;

    double value;
    if (hi != 0) {
      const int z = std::countl_zero(hi);
      if (z >= p_.max_window_bits)
        throw precision_overflow_error("leading-zero run exceeds max_window_bits");
      const int w = p_.window_bits;
      std::uint64_t m;
      if (z + w <= 64) {
        m = (hi << z) >> (64 - w);
      } else {  // window straddles hi/lo; z >= 1 here since w <= 64
        m = ((hi << z) | (lo >> (64 - z))) >> (64 - w);
      }
      value = value_from(z, m);
    } else {
      value = slow_value();
    }
    cursor_ += 1;
    trim_buffer();
    return value;
  }

 private:
  double value_from(int z, std::uint64_t m) const {
    // window value x = m * 2^-(z+w) in [2^-(z+1), 2^-z); report x^-gamma
    const double e =
        p_.gamma * (static_cast<double>(z + p_.window_bits) - std::log2(static_cast<double>(m)));
    if (e >= 1024.0) throw precision_overflow_error("observable overflowed double range");
    return std::exp2(e);
  }

  // Bit-at-a-time fallback for leading-zero runs past the fast window.
  double slow_value() {
    std::uint64_t pos = cursor_;
    int z = 0;
    while (true) {
      if (z >= p_.max_window_bits)
        throw precision_overflow_error("leading-zero run exceeds max_window_bits");
      if (bit_at(pos)) break;
      ++pos;
      ++z;
    }
    std::uint64_t m = 0;
    for (int k = 0; k < p_.window_bits; ++k) m = (m << 1) | bit_at(pos + k);
    return value_from(z, m);
  }

  int bit_at(std::uint64_t abs) {
    ensure_abs(abs + 1);
    const std::uint64_t rel = abs - base_bit_;
    return static_cast<int>((buf_[rel >> 6] >> (63 - (rel & 63))) & 1u);
  }

  void ensure_bits(std::uint64_t ahead) { ensure_abs(cursor_ + ahead); }

  void ensure_abs(std::uint64_t abs_exclusive) {
    while (base_bit_ + 64 * buf_.size() < abs_exclusive) buf_.push_back(bits_->next_word());
  }

  void trim_buffer() {
    const std::uint64_t drop = (cursor_ - base_bit_) >> 6;
    if (drop > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(drop));
      base_bit_ += 64 * drop;
    }
  }

  DoublingPareto p_;
  std::unique_ptr<BitSource> bits_;
  std::vector<std::uint64_t> buf_;
  std::uint64_t base_bit_ = 0;
  std::uint64_t cursor_ = 0;
};

class OrbitGen final : public PathGenerator {
 public:
  OrbitGen(PiecewiseMapSpec map, StepObservable obs, std::uint64_t burn_in, double x0)
      : map_(std::move(map)), obs_(std::move(obs)), x_(x0) {
    obs_.check_alignment(map_);
    for (std::uint64_t i = 0; i < burn_in; ++i) x_ = map_.apply(x_);
  }
  double next() override {
    const double v = obs_.evaluate(map_, x_);
    x_ = map_.apply(x_);
    return v;
  }

 private:
  PiecewiseMapSpec map_;
  StepObservable obs_;
  double x_;
};

}  // namespace

std::unique_ptr<PathGenerator> make_iid_generator(RegVaryingTail tail,
                                                  std::unique_ptr<UniformSource> u) {
  return std::make_unique<IidGen>(std::move(tail), std::move(u));
}

std::unique_ptr<PathGenerator> make_luroth_generator(double alpha,
                                                     std::unique_ptr<UniformSource> u) {
  return std::make_unique<LurothGen>(alpha, std::move(u));
}

std::unique_ptr<PathGenerator> make_doubling_pareto_generator(DoublingPareto params,
                                                              std::unique_ptr<BitSource> bits) {
  return std::make_unique<DoublingParetoGen>(params, std::move(bits));
}

std::unique_ptr<PathGenerator> make_orbit_generator(PiecewiseMapSpec map, StepObservable obs,
                                                    std::uint64_t burn_in, double x0) {
  if (!(x0 >= 0.0 && x0 < 1.0)) throw config_error("orbit start must lie in [0,1)");
  return std::make_unique<OrbitGen>(std::move(map), std::move(obs), burn_in, x0);
}

std::unique_ptr<PathGenerator> make_generator(const ProcessSpec& spec, Rng rng) {
  return std::visit(
      [&rng](const auto& s) -> std::unique_ptr<PathGenerator> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, IidRegVarying>) {
          return make_iid_generator(s.tail, std::make_unique<RngUniformSource>(rng));
        } else if constexpr (std::is_same_v<T, LurothStep>) {
          return make_luroth_generator(s.alpha, std::make_unique<RngUniformSource>(rng));
        } else if constexpr (std::is_same_v<T, DoublingPareto>) {
          return make_doubling_pareto_generator(s, std::make_unique<RngBitSource>(rng));
        } else {
          const double x0 = rng.uniform01();
          return make_orbit_generator(s.map, s.observable, s.burn_in, x0);
        }
      },
      spec);
}

SamplePath sample_path(const ProcessSpec& spec, std::uint64_t n, std::uint64_t master_seed,
                       std::uint64_t replica) {
  SamplePath path;
  path.seed = SeedRecord{master_seed, replica};
  path.spec_json = canonical_spec_json(spec);
  path.values.reserve(n);
  auto gen = make_generator(spec, replica_rng(master_seed, replica));
  for (std::uint64_t i = 0; i < n; ++i) path.values.push_back(gen->next());
  return path;
}

void write_path_dump(std::ostream& os, const SamplePath& path) {
  os << "# trimlab-path v1 spec=" << path.spec_json << " seed=" << path.seed.master << "\n";
  char buf[40];
  for (double v : path.values) {
    std::snprintf(buf, sizeof buf, "%.16e", v);
    os << buf << "\n";
  }
}

// --- validation ---

namespace {

// Total variation of a step function over consecutive cells: internal jumps only.
double step_variation(const std::vector<double>& w) {
  double v = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) v += std::fabs(w[i + 1] - w[i]);
  return v;
}

}  // namespace

ValidationReport validate_example_conditions(const PiecewiseMapSpec& map,
                                             const StepObservable& obs, std::size_t k_bound,
                                             const std::vector<double>& ell_grid) {
  if (map.kind() == PiecewiseMapSpec::Kind::Explicit && map.branch_count() < 2)
    throw config_error("validation needs a map with at least two branches");
  if (k_bound < 2) throw config_error("k_bound must be >= 2");
  if (ell_grid.empty()) throw config_error("need at least one truncation level");
  for (double l : ell_grid)
    if (!std::isfinite(l) || !(l > 0.0)) throw config_error("truncation levels must be > 0");
  obs.check_alignment(map);

  ValidationReport r;
  r.affine = {true, "every branch is affine by construction"};

  if (map.kind() == PiecewiseMapSpec::Kind::CanonicalLuroth) {
    r.finite_image = {true, "1 distinct branch image: every branch covers [0,1)"};
  } else {
    // count distinct image intervals up to a tolerance
    std::vector<std::pair<double, double>> images;
    for (std::size_t c = 1; c <= map.branch_count(); ++c) {
      const double l = map.breaks()[c - 1];
      const double rgt = map.breaks()[c];
      const double s = map.slope(c);
      const double q = map.intercept(c);
      const double lo = s * l + q;
      const double hi = s * rgt + q;
      bool seen = false;
      for (auto& im : images)
        if (std::fabs(im.first - lo) < 1e-9 && std::fabs(im.second - hi) < 1e-9) seen = true;
      if (!seen) images.emplace_back(lo, hi);
    }
    r.finite_image = {true, std::to_string(images.size()) + " distinct branch image(s)"};
  }

  // expansion: minimum slope over enumerated branches
  const std::size_t limit =
      map.branch_count() == 0 ? k_bound : map.branch_count();
  double min_slope = std::numeric_limits<double>::infinity();
  for (std::size_t c = 1; c <= limit; ++c) min_slope = std::min(min_slope, map.slope(c));
  r.min_slope = min_slope;
  if (min_slope > 1.0) {
    std::string note = "min slope " + std::to_string(min_slope);
    if (map.branch_count() == 0) note += " over first " + std::to_string(k_bound) +
                                         " branches; later slopes only grow";
    r.expansion = {true, note};
  } else {
    r.expansion = {false, "min slope " + std::to_string(min_slope) + " is not > 1"};
  }

  // variation of the truncated observable and of the exceedance indicator
  double worst = 0.0;
  double witness = ell_grid.front();
  for (double ell : ell_grid) {
    double v_trunc = 0.0;
    double v_ind = 0.0;
    if (map.kind() == PiecewiseMapSpec::Kind::CanonicalLuroth) {
      // canonical values v_n = n^(1/alpha) rise with n; cells sit in reverse
      // order along [0,1), so the truncated function is 0 near the origin,
      // jumps to v_N, then steps down to v_1.
      if (!obs.is_canonical())
        throw config_error("a per-cell table cannot cover countably many branches");
      const std::uint64_t N = luroth_lattice_bound(ell, obs.alpha());
      if (N >= 1) {
        const double vN = obs.value_for_cell(N);
        const double v1 = obs.value_for_cell(1);
        v_trunc = 2.0 * vN - v1;
        v_ind = 1.0;
      }
    } else {
      std::vector<double> tr, ind;
      for (std::size_t c = 1; c <= map.branch_count(); ++c) {
        const double w = obs.value_for_cell(c);
        tr.push_back(w <= ell ? w : 0.0);
        ind.push_back(w > ell ? 1.0 : 0.0);
      }
      v_trunc = step_variation(tr);
      v_ind = step_variation(ind);
    }
    const double ratio = std::max(v_trunc / (2.0 * ell), v_ind / 2.0);
    if (ratio > worst) {
      worst = ratio;
      witness = ell;
    }
  }
  r.worst_variation_ratio = worst;
  r.witness_ell = witness;
  if (worst <= 1.0 + 1e-12) {
    r.variation = {true, "worst bound ratio " + std::to_string(worst) + " at level " +
                             std::to_string(witness)};
  } else {
    r.variation = {false, "variation bound violated: ratio " + std::to_string(worst) +
                              " at level " + std::to_string(witness)};
  }

  r.mixing_note = map.full_branch()
                      ? "topological mixing holds: every branch maps onto the full interval"
                      : "topological mixing not verified for this cell family";
  return r;
}

TailCheckReport empirical_tail_check(std::span<const double> values,
                                     const std::function<double(double)>& ref_tail,
                                     const std::vector<double>& grid) {
  if (values.empty()) throw insufficient_data_error("no values to check against the marginal");
  if (grid.empty()) throw config_error("need at least one grid point");
  TailCheckReport rep;
  const double M = static_cast<double>(values.size());
  for (double x : grid) {
    TailCheckRow row;
    row.x = x;
    row.expected = ref_tail(x);
    std::size_t count = 0;
    for (double v : values)
      if (v > x) ++count;
    row.empirical = static_cast<double>(count) / M;
    const double var = row.expected * (1.0 - row.expected);
    row.se = std::sqrt(var / M);
    if (row.se == 0.0) {
      row.deviation = row.empirical == row.expected
                          ? 0.0
                          : std::numeric_limits<double>::infinity();
    } else {
      row.deviation = (row.empirical - row.expected) / row.se;
    }
    rep.max_abs_deviation = std::max(rep.max_abs_deviation, std::fabs(row.deviation));
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace trimlab
