#include "trimlab/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "trimlab/errors.hpp"
#include "trimlab/experiments.hpp"
#include "trimlab/mixing.hpp"
#include "trimlab/norming.hpp"
#include "trimlab/processes.hpp"
#include "trimlab/report.hpp"

namespace trimlab {

namespace {

constexpr const char* kToolVersion = "0.1.0";

using nlohmann::json;

// --- flag-string parsing -----------------------------------------------

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& tok, const char* what) {
  const char* c = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(c, &end);
  if (end == c || *end != '\0' || !std::isfinite(v))
    throw config_error(std::string(what) + ": cannot parse number '" + tok + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& tok, const char* what) {
  const double v = parse_double(tok, what);
  if (v < 0.0 || v > 9.0e15 || std::floor(v) != v)
    throw config_error(std::string(what) + ": '" + tok + "' is not a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
  if (s.empty()) return {};
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_double(tok, what));
  return out;
}

std::vector<std::uint64_t> parse_u64_list(const std::string& s, const char* what) {
  if (s.empty()) return {};
  std::vector<std::uint64_t> out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_u64(tok, what));
  return out;
}

SlowlyVarying parse_sv(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() == 2 && parts[0] == "const")
    return SlowlyVarying::constant(parse_double(parts[1], "--l"));
  if (parts.size() == 2 && parts[0] == "logpow")
    return SlowlyVarying::log_power(parse_double(parts[1], "--l"));
  throw config_error("--l must be const:<c> or logpow:<beta>, got '" + s + "'");
}

TrimmingSchedule parse_schedule(const std::string& s) {
  const std::size_t colon = s.find(':');
  if (colon == std::string::npos)
    throw config_error("--schedule must be pow:<theta> or explicit:<n>=<b>,...");
  const std::string kind = s.substr(0, colon);
  const std::string rest = s.substr(colon + 1);
  if (kind == "pow") return TrimmingSchedule::power_rule(parse_double(rest, "--schedule"));
  if (kind == "explicit") {
    std::map<std::uint64_t, std::uint64_t> table;
    for (const auto& tok : split(rest, ',')) {
      const auto eq = split(tok, '=');
      if (eq.size() != 2)
        throw config_error("--schedule explicit entries look like <n>=<b>, got '" + tok + "'");
      table[parse_u64(eq[0], "--schedule")] = parse_u64(eq[1], "--schedule");
    }
    return TrimmingSchedule::explicit_table(std::move(table));
  }
  throw config_error("--schedule must be pow:<theta> or explicit:<n>=<b>,...");
}

PiecewiseMapSpec parse_map(const std::string& s) {
  if (s == "luroth") return PiecewiseMapSpec::canonical_luroth();
  if (s == "doubling") return PiecewiseMapSpec::doubling();
  const std::string prefix = "explicit:";
  if (s.rfind(prefix, 0) == 0) {
    const auto parts = split(s.substr(prefix.size()), ';');
    if (parts.size() != 3)
      throw config_error("--map explicit form: explicit:<breaks>;<slopes>;<intercepts>");
    return PiecewiseMapSpec::explicit_cells(parse_double_list(parts[0], "--map breaks"),
                                            parse_double_list(parts[1], "--map slopes"),
                                            parse_double_list(parts[2], "--map intercepts"));
  }
  throw config_error("--map must be luroth, doubling, or explicit:...;...;...");
}

StepObservable parse_obs(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() == 2 && parts[0] == "canonical")
    return StepObservable::canonical(parse_double(parts[1], "--observable"));
  if (parts.size() == 2 && parts[0] == "cells")
    return StepObservable::per_cell(parse_double_list(parts[1], "--observable"));
  throw config_error("--observable must be canonical:<alpha> or cells:<v1,v2,...>");
}

// --- shared process options ---------------------------------------------

struct ProcOpts {
  std::string process = "iid";
  double alpha = 0.5;
  std::string l = "const:1";
  double support = 1.0;
  double gamma = 2.0;
  int window_bits = 64;
  int max_window_bits = 512;
  std::string map = "luroth";
  std::string observable = "canonical:0.5";
  std::uint64_t burn_in = 1000;

  ProcessSpec to_spec() const {
    if (process == "iid")
      return IidRegVarying{RegVaryingTail(alpha, parse_sv(l), support)};
    if (process == "luroth") return LurothStep{alpha};
    if (process == "doubling-pareto")
      return DoublingPareto{gamma, window_bits, max_window_bits};
    if (process == "orbit")
      return FloatOrbit{parse_map(map), parse_obs(observable), burn_in};
    throw config_error("--process must be iid, luroth, doubling-pareto, or orbit");
  }

  json echo() const {
    json j;
    j["process"] = process;
    if (process == "iid") {
      j["alpha"] = alpha;
      j["l"] = l;
      j["support"] = support;
    } else if (process == "luroth") {
      j["alpha"] = alpha;
    } else if (process == "doubling-pareto") {
      j["gamma"] = gamma;
      j["window_bits"] = window_bits;
      j["max_window_bits"] = max_window_bits;
    } else if (process == "orbit") {
      j["map"] = map;
      j["observable"] = observable;
      j["burn_in"] = burn_in;
    }
    return j;
  }
};

void add_process_options(CLI::App* sub, ProcOpts& p, const char* default_process = "iid") {
  p.process = default_process;
  sub->add_option("--process", p.process, "iid | luroth | doubling-pareto | orbit")
      ->capture_default_str();
  sub->add_option("--alpha", p.alpha, "tail index in (0,1) for iid and luroth")
      ->capture_default_str();
  sub->add_option("--l", p.l, "slowly varying factor, const:<c> or logpow:<beta>")
      ->capture_default_str();
  sub->add_option("--support", p.support, "left edge of the iid tail support")
      ->capture_default_str();
  sub->add_option("--gamma", p.gamma, "observable exponent for doubling-pareto")
      ->capture_default_str();
  sub->add_option("--window-bits", p.window_bits, "mantissa bits for doubling-pareto (1..64)")
      ->capture_default_str();
  sub->add_option("--max-window-bits", p.max_window_bits,
                  "zero-run limit before reporting precision overflow")
      ->capture_default_str();
  sub->add_option("--map", p.map, "orbit map: luroth | doubling | explicit:...")
      ->capture_default_str();
  sub->add_option("--observable", p.observable, "canonical:<alpha> or cells:<v1,...>")
      ->capture_default_str();
  sub->add_option("--burn-in", p.burn_in, "orbit steps discarded before observing")
      ->capture_default_str();
}

// --- config-file binding --------------------------------------------------

std::uint64_t json_u64(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto s = v.get<std::int64_t>();
    if (s < 0) throw config_error("config key '" + key + "' must be >= 0");
    return static_cast<std::uint64_t>(s);
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d < 0.0 || std::floor(d) != d || d > 9.0e15)
      throw config_error("config key '" + key + "' must be an integer");
    return static_cast<std::uint64_t>(d);
  }
  if (v.is_string()) return parse_u64(v.get<std::string>(), key.c_str());
  throw config_error("config key '" + key + "' must be a number");
}

double json_double(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_double(v.get<std::string>(), key.c_str());
  throw config_error("config key '" + key + "' must be a number");
}

std::string json_list_flag(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (!v.is_array()) throw config_error("config key '" + key + "' must be a list");
  std::string s;
  bool first = true;
  for (const auto& e : v) {
    if (!first) s += ',';
    first = false;
    if (e.is_number_unsigned()) s += std::to_string(e.get<std::uint64_t>());
    else if (e.is_number_integer()) s += std::to_string(e.get<std::int64_t>());
    else if (e.is_number_float()) s += fmt17(e.get<double>());
    else if (e.is_string()) s += e.get<std::string>();
    else throw config_error("config key '" + key + "' has a non-scalar element");
  }
  return s;
}

// Fills option targets from a config object, skipping anything given on the
// command line (explicit flags always win).
class ConfigBinder {
 public:
  explicit ConfigBinder(CLI::App* sub) : sub_(sub) {}

  void bind_u64(const std::string& key, std::uint64_t& target) {
    add(key, [&target, key](const json& v) { target = json_u64(v, key); });
  }
  void bind_opt_u64(const std::string& key, std::optional<std::uint64_t>& target) {
    add(key, [&target, key](const json& v) { target = json_u64(v, key); });
  }
  void bind_int(const std::string& key, int& target) {
    add(key, [&target, key](const json& v) {
      target = static_cast<int>(json_double(v, key));
    });
  }
  void bind_double(const std::string& key, double& target) {
    add(key, [&target, key](const json& v) { target = json_double(v, key); });
  }
  void bind_opt_double(const std::string& key, std::optional<double>& target) {
    add(key, [&target, key](const json& v) { target = json_double(v, key); });
  }
  void bind_string(const std::string& key, std::string& target) {
    add(key, [&target, key](const json& v) {
      if (!v.is_string()) throw config_error("config key '" + key + "' must be a string");
      target = v.get<std::string>();
    });
  }
  void bind_list(const std::string& key, std::string& target) {
    add(key, [&target, key](const json& v) { target = json_list_flag(v, key); });
  }
  void bind_bool(const std::string& key, bool& target) {
    add(key, [&target, key](const json& v) {
      if (!v.is_boolean()) throw config_error("config key '" + key + "' must be a boolean");
      target = v.get<bool>();
    });
  }

  void bind_process(ProcOpts& p) {
    bind_string("process", p.process);
    bind_double("alpha", p.alpha);
    bind_string("l", p.l);
    bind_double("support", p.support);
    bind_double("gamma", p.gamma);
    bind_int("window_bits", p.window_bits);
    bind_int("max_window_bits", p.max_window_bits);
    bind_string("map", p.map);
    bind_string("observable", p.observable);
    bind_u64("burn_in", p.burn_in);
  }

  void apply(const json& cfg) {
    for (const auto& [key, setter] : setters_) {
      if (!cfg.contains(key)) continue;
      std::string flag = "--" + key;
      for (auto& c : flag)
        if (c == '_') c = '-';
      const CLI::Option* opt = sub_->get_option_no_throw(flag);
      if (opt != nullptr && opt->count() > 0) continue;
      setter(cfg.at(key));
    }
  }

 private:
  void add(const std::string& key, std::function<void(const json&)> setter) {
    setters_.emplace_back(key, std::move(setter));
  }
  CLI::App* sub_;
  std::vector<std::pair<std::string, std::function<void(const json&)>>> setters_;
};

json load_config_file(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config file is not valid JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("config")) {  // a run manifest
    if (j.contains("command") && j["command"].is_string() &&
        j["command"].get<std::string>() != command)
      throw config_error("config file was produced by command '" +
                         j["command"].get<std::string>() + "', not '" + command + "'");
    return j["config"];
  }
  if (!j.is_object()) throw config_error("config file must hold a JSON object");
  return j;
}

// --- output routing --------------------------------------------------------

struct Emit {
  std::string command;
  std::string out_prefix;                                   // empty: stdout
  std::vector<std::pair<std::string, std::string>> files;   // suffix -> content
  json config;
  std::optional<std::uint64_t> seed;
  json metrics;

  void write() const {
    if (out_prefix.empty()) {
      std::cout << files.front().second;
      return;
    }
    std::vector<std::string> paths;
    for (const auto& [suffix, content] : files) {
      const std::string path = out_prefix + suffix;
      std::ofstream f(path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write output file: " + path);
      f << content;
      paths.push_back(path);
    }
    json manifest;
    manifest["command"] = command;
    manifest["config"] = config;
    if (seed) manifest["master_seed"] = *seed;
    manifest["outputs"] = paths;
    manifest["tool_version"] = kToolVersion;

    json summary;
    summary["command"] = command;
    summary["config"] = config;
    summary["config_hash"] = git_blob_sha1(config.dump());
    summary["metrics"] = metrics;

    for (const auto& [name, doc] :
         {std::pair<std::string, const json*>{".manifest.json", &manifest},
          std::pair<std::string, const json*>{".summary.json", &summary}}) {
      const std::string path = out_prefix + name;
      std::ofstream f(path, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write output file: " + path);
      f << doc->dump(2) << "\n";
    }
  }
};

void require_nonempty(const std::string& value, const char* flag) {
  if (value.empty()) throw config_error(std::string(flag) + " is required");
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw config_error("--seed is required for stochastic commands");
  return *seed;
}

json u64_array(const std::vector<std::uint64_t>& v) {
  json a = json::array();
  for (auto x : v) a.push_back(x);
  return a;
}

json double_array(const std::vector<double>& v) {
  json a = json::array();
  for (auto x : v) a.push_back(x);
  return a;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"trimmed and truncated Birkhoff sums of heavy-tailed processes"};
  app.require_subcommand(1);

  std::map<const CLI::App*, std::function<int()>> runners;

  // ---- norming-table ----
  struct {
    double alpha = 0.5;
    std::string l = "const:1";
    double support = 1.0;
    std::string schedule;
    std::string checkpoints;
    std::string out, config;
  } nt;
  {
    auto* sub = app.add_subcommand("norming-table",
                                   "thresholds and norming scales for a trimming schedule");
    sub->add_option("--alpha", nt.alpha, "tail index in (0,1)")->capture_default_str();
    sub->add_option("--l", nt.l, "slowly varying factor, const:<c> or logpow:<beta>")
        ->capture_default_str();
    sub->add_option("--support", nt.support, "left edge of the tail support")
        ->capture_default_str();
    sub->add_option("--schedule", nt.schedule, "pow:<theta> or explicit:<n>=<b>,...");
    sub->add_option("--checkpoints", nt.checkpoints, "comma list of n values, e.g. 1e3,1e4");
    sub->add_option("--out", nt.out, "output prefix; default prints CSV to stdout");
    sub->add_option("--config", nt.config, "JSON config or manifest to take defaults from");
    runners[sub] = [&nt, sub]() {
      ConfigBinder binder(sub);
      binder.bind_double("alpha", nt.alpha);
      binder.bind_string("l", nt.l);
      binder.bind_double("support", nt.support);
      binder.bind_string("schedule", nt.schedule);
      binder.bind_list("checkpoints", nt.checkpoints);
      if (!nt.config.empty()) binder.apply(load_config_file(nt.config, "norming-table"));
      require_nonempty(nt.schedule, "--schedule");
      require_nonempty(nt.checkpoints, "--checkpoints");

      const RegVaryingTail tail(nt.alpha, parse_sv(nt.l), nt.support);
      const auto schedule = parse_schedule(nt.schedule);
      const auto cps = parse_u64_list(nt.checkpoints, "--checkpoints");
      const auto rows = norming_table(tail, schedule, cps);

      std::ostringstream csv;
      write_norming_csv(csv, rows);
      Emit emit;
      emit.command = "norming-table";
      emit.out_prefix = nt.out;
      emit.files = {{".csv", csv.str()}};
      emit.config = {{"alpha", nt.alpha},
                     {"l", nt.l},
                     {"support", nt.support},
                     {"schedule", nt.schedule},
                     {"checkpoints", u64_array(cps)}};
      emit.metrics = {{"rows", rows.size()},
                      {"final_ratio_diag", rows.empty() ? 0.0 : rows.back().ratio_diag}};
      emit.write();
      return 0;
    };
  }

  // ---- verify-mean ----
  struct {
    ProcOpts proc;
    std::string schedule;
    std::string checkpoints;
    std::uint64_t replicas = 100;
    std::optional<std::uint64_t> seed;
    std::string eps = "0.1,0.25,0.5";
    int workers = 0;
    bool plot_data = false;
    std::string out, config;
  } vm;
  {
    auto* sub = app.add_subcommand(
        "verify-mean", "trimmed-sum ratios against the norming scale across checkpoints");
    add_process_options(sub, vm.proc);
    sub->add_option("--schedule", vm.schedule, "pow:<theta> or explicit:<n>=<b>,...");
    sub->add_option("--checkpoints", vm.checkpoints, "comma list of n values");
    sub->add_option("--replicas", vm.replicas, "independent paths")->capture_default_str();
    sub->add_option("--seed", vm.seed, "master seed (required)");
    sub->add_option("--eps", vm.eps, "deviation levels for exceedance probabilities")
        ->capture_default_str();
    sub->add_option("--workers", vm.workers, "thread count; 0 uses TRIMLAB_WORKERS or OpenMP");
    sub->add_flag("--plot-data", vm.plot_data, "also emit long-form n,metric,value rows");
    sub->add_option("--out", vm.out, "output prefix; default prints CSV to stdout");
    sub->add_option("--config", vm.config, "JSON config or manifest to take defaults from");
    runners[sub] = [&vm, sub]() {
      ConfigBinder binder(sub);
      binder.bind_process(vm.proc);
      binder.bind_string("schedule", vm.schedule);
      binder.bind_list("checkpoints", vm.checkpoints);
      binder.bind_u64("replicas", vm.replicas);
      binder.bind_opt_u64("seed", vm.seed);
      binder.bind_list("eps", vm.eps);
      binder.bind_int("workers", vm.workers);
      binder.bind_bool("plot_data", vm.plot_data);
      if (!vm.config.empty()) binder.apply(load_config_file(vm.config, "verify-mean"));
      require_nonempty(vm.schedule, "--schedule");
      require_nonempty(vm.checkpoints, "--checkpoints");

      ConvergenceConfig cfg;
      cfg.process = vm.proc.to_spec();
      cfg.schedule = parse_schedule(vm.schedule);
      cfg.checkpoints = parse_u64_list(vm.checkpoints, "--checkpoints");
      cfg.replicas = vm.replicas;
      cfg.master_seed = require_seed(vm.seed);
      cfg.eps_grid = parse_double_list(vm.eps, "--eps");
      cfg.workers = vm.workers;
      const ConvergenceReport rep = run_mean_convergence(cfg);

      std::ostringstream csv, plot;
      write_convergence_csv(csv, rep);
      write_convergence_plot_csv(plot, rep);

      Emit emit;
      emit.command = "verify-mean";
      emit.out_prefix = vm.out;
      if (vm.out.empty() && vm.plot_data)
        emit.files = {{".plot.csv", plot.str()}};
      else if (vm.plot_data)
        emit.files = {{".csv", csv.str()}, {".plot.csv", plot.str()}};
      else
        emit.files = {{".csv", csv.str()}};
      json cfg_echo = vm.proc.echo();
      cfg_echo["schedule"] = vm.schedule;
      cfg_echo["checkpoints"] = u64_array(cfg.checkpoints);
      cfg_echo["replicas"] = cfg.replicas;
      cfg_echo["seed"] = cfg.master_seed;
      cfg_echo["eps"] = double_array(cfg.eps_grid);
      cfg_echo["workers"] = vm.workers;
      cfg_echo["plot_data"] = vm.plot_data;
      emit.config = cfg_echo;
      emit.seed = cfg.master_seed;
      const auto& last = rep.checkpoints.back();
      emit.metrics = {{"final_mean_abs_error", last.mae},
                      {"final_mean_ratio", last.mean_ratio},
                      {"completed", rep.completed},
                      {"partial", rep.partial}};
      emit.write();
      return rep.partial ? 1 : 0;
    };
  }

  // ---- truncation-check ----
  struct {
    ProcOpts proc;
    std::string schedule;
    std::string checkpoints;
    std::optional<double> f;
    std::uint64_t replicas = 100;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::string out, config;
  } tc;
  {
    auto* sub = app.add_subcommand(
        "truncation-check", "truncated sums against their closed-form expectations");
    add_process_options(sub, tc.proc);
    sub->add_option("--schedule", tc.schedule, "pow:<theta> or explicit:<n>=<b>,...");
    sub->add_option("--checkpoints", tc.checkpoints, "comma list of n values");
    sub->add_option("--f", tc.f, "fixed truncation level; default uses the threshold g(n,b)");
    sub->add_option("--replicas", tc.replicas, "independent paths")->capture_default_str();
    sub->add_option("--seed", tc.seed, "master seed (required)");
    sub->add_option("--workers", tc.workers, "thread count; 0 uses TRIMLAB_WORKERS or OpenMP");
    sub->add_option("--out", tc.out, "output prefix; default prints CSV to stdout");
    sub->add_option("--config", tc.config, "JSON config or manifest to take defaults from");
    runners[sub] = [&tc, sub]() {
      ConfigBinder binder(sub);
      binder.bind_process(tc.proc);
      binder.bind_string("schedule", tc.schedule);
      binder.bind_list("checkpoints", tc.checkpoints);
      binder.bind_opt_double("f", tc.f);
      binder.bind_u64("replicas", tc.replicas);
      binder.bind_opt_u64("seed", tc.seed);
      binder.bind_int("workers", tc.workers);
      if (!tc.config.empty()) binder.apply(load_config_file(tc.config, "truncation-check"));
      require_nonempty(tc.schedule, "--schedule");
      require_nonempty(tc.checkpoints, "--checkpoints");

      TruncationConfig cfg;
      cfg.process = tc.proc.to_spec();
      cfg.schedule = parse_schedule(tc.schedule);
      cfg.checkpoints = parse_u64_list(tc.checkpoints, "--checkpoints");
      cfg.f_override = tc.f;
      cfg.replicas = tc.replicas;
      cfg.master_seed = require_seed(tc.seed);
      cfg.workers = tc.workers;
      const TruncationReport rep = run_truncation_check(cfg);

      std::ostringstream csv;
      write_truncation_csv(csv, rep);
      Emit emit;
      emit.command = "truncation-check";
      emit.out_prefix = tc.out;
      emit.files = {{".csv", csv.str()}};
      json cfg_echo = tc.proc.echo();
      cfg_echo["schedule"] = tc.schedule;
      cfg_echo["checkpoints"] = u64_array(cfg.checkpoints);
      if (tc.f) cfg_echo["f"] = *tc.f;
      cfg_echo["replicas"] = cfg.replicas;
      cfg_echo["seed"] = cfg.master_seed;
      cfg_echo["workers"] = tc.workers;
      emit.config = cfg_echo;
      emit.seed = cfg.master_seed;
      double worst = 0.0;
      for (const auto& r : rep.rows)
        if (r.expected_exact > 0.0)
          worst = std::max(worst, std::fabs(r.t_mean / r.expected_exact - 1.0));
      emit.metrics = {{"max_rel_gap_exact", worst},
                      {"completed", rep.completed},
                      {"partial", rep.partial}};
      emit.write();
      return rep.partial ? 1 : 0;
    };
  }

  // ---- counterexample ----
  struct {
    ProcOpts proc;
    std::uint64_t n = 10000;
    std::uint64_t b = 100;
    std::uint64_t replicas = 1000;
    std::optional<std::uint64_t> seed;
    std::uint64_t hill_k = 0;
    std::uint64_t bootstrap = 400;
    std::string omega;
    std::string running;
    int workers = 0;
    std::string out, config;
  } ce;
  {
    auto* sub = app.add_subcommand(
        "counterexample", "tail diagnostics of trimmed sums at a fixed checkpoint");
    add_process_options(sub, ce.proc, "doubling-pareto");
    sub->add_option("--n", ce.n, "summands per replica")->capture_default_str();
    sub->add_option("--b", ce.b, "trim depth")->capture_default_str();
    sub->add_option("--replicas", ce.replicas, "independent trimmed sums")
        ->capture_default_str();
    sub->add_option("--seed", ce.seed, "master seed (required)");
    sub->add_option("--hill-k", ce.hill_k, "top order statistics; 0 picks ceil(M^0.6)")
        ->capture_default_str();
    sub->add_option("--bootstrap", ce.bootstrap, "resamples behind the hill CI")
        ->capture_default_str();
    sub->add_option("--omega", ce.omega, "exceedance probes in (0,1), e.g. 0.01,0.1");
    sub->add_option("--running", ce.running, "running-mean sizes; default powers of 10");
    sub->add_option("--workers", ce.workers, "thread count; 0 uses TRIMLAB_WORKERS or OpenMP");
    sub->add_option("--out", ce.out, "output prefix; default prints CSV to stdout");
    sub->add_option("--config", ce.config, "JSON config or manifest to take defaults from");
    runners[sub] = [&ce, sub]() {
      ConfigBinder binder(sub);
      binder.bind_process(ce.proc);
      binder.bind_u64("n", ce.n);
      binder.bind_u64("b", ce.b);
      binder.bind_u64("replicas", ce.replicas);
      binder.bind_opt_u64("seed", ce.seed);
      binder.bind_u64("hill_k", ce.hill_k);
      binder.bind_u64("bootstrap", ce.bootstrap);
      binder.bind_list("omega", ce.omega);
      binder.bind_list("running", ce.running);
      binder.bind_int("workers", ce.workers);
      if (!ce.config.empty()) binder.apply(load_config_file(ce.config, "counterexample"));

      CounterexampleConfig cfg;
      cfg.process = ce.proc.to_spec();
      cfg.n = ce.n;
      cfg.b = ce.b;
      cfg.replicas = ce.replicas;
      cfg.master_seed = require_seed(ce.seed);
      cfg.hill_k = static_cast<std::size_t>(ce.hill_k);
      cfg.bootstrap = static_cast<std::size_t>(ce.bootstrap);
      cfg.omega_grid = parse_double_list(ce.omega, "--omega");
      cfg.running_grid = parse_u64_list(ce.running, "--running");
      cfg.workers = ce.workers;
      const TailReport rep = run_counterexample(cfg);

      std::ostringstream csv, running, omega;
      write_tail_csv(csv, rep);
      write_running_csv(running, rep);
      write_omega_csv(omega, rep);
      Emit emit;
      emit.command = "counterexample";
      emit.out_prefix = ce.out;
      emit.files = {{".csv", csv.str()},
                    {".running.csv", running.str()},
                    {".omega.csv", omega.str()}};
      json cfg_echo = ce.proc.echo();
      cfg_echo["n"] = ce.n;
      cfg_echo["b"] = ce.b;
      cfg_echo["replicas"] = ce.replicas;
      cfg_echo["seed"] = cfg.master_seed;
      cfg_echo["hill_k"] = ce.hill_k;
      cfg_echo["bootstrap"] = ce.bootstrap;
      cfg_echo["omega"] = double_array(cfg.omega_grid);
      cfg_echo["running"] = u64_array(cfg.running_grid);
      cfg_echo["workers"] = ce.workers;
      emit.config = cfg_echo;
      emit.seed = cfg.master_seed;
      emit.metrics = {{"hill", rep.hill},
                      {"ci_lo", rep.ci_lo},
                      {"ci_hi", rep.ci_hi},
                      {"divergence_flag", rep.divergence_flag},
                      {"completed", rep.completed},
                      {"partial", rep.partial}};
      emit.write();
      return rep.partial ? 1 : 0;
    };
  }

  // ---- mixing ----
  struct {
    ProcOpts proc;
    std::string thresholds;
    int depth = 1;
    std::uint64_t min_count = 20;
    std::string lags = "1,2,4";
    std::uint64_t k_anchor = 2;
    std::uint64_t replicas = 10000;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::string out, config;
  } mx;
  {
    auto* sub = app.add_subcommand(
        "mixing", "psi dependence lower bounds over threshold events at several lags");
    add_process_options(sub, mx.proc);
    sub->add_option("--thresholds", mx.thresholds, "strictly increasing event levels");
    sub->add_option("--depth", mx.depth, "1: single coordinate; 2: adds neighbor pairs")
        ->capture_default_str();
    sub->add_option("--min-count", mx.min_count, "skip events with fewer hits")
        ->capture_default_str();
    sub->add_option("--lags", mx.lags, "comma list of lags")->capture_default_str();
    sub->add_option("--k-anchor", mx.k_anchor, "anchor coordinate (1-based)")
        ->capture_default_str();
    sub->add_option("--replicas", mx.replicas, "independent short paths")
        ->capture_default_str();
    sub->add_option("--seed", mx.seed, "master seed (required)");
    sub->add_option("--workers", mx.workers, "thread count; 0 uses TRIMLAB_WORKERS or OpenMP");
    sub->add_option("--out", mx.out, "output prefix; default prints CSV to stdout");
    sub->add_option("--config", mx.config, "JSON config or manifest to take defaults from");
    runners[sub] = [&mx, sub]() {
      ConfigBinder binder(sub);
      binder.bind_process(mx.proc);
      binder.bind_list("thresholds", mx.thresholds);
      binder.bind_int("depth", mx.depth);
      binder.bind_u64("min_count", mx.min_count);
      binder.bind_list("lags", mx.lags);
      binder.bind_u64("k_anchor", mx.k_anchor);
      binder.bind_u64("replicas", mx.replicas);
      binder.bind_opt_u64("seed", mx.seed);
      binder.bind_int("workers", mx.workers);
      if (!mx.config.empty()) binder.apply(load_config_file(mx.config, "mixing"));
      require_nonempty(mx.thresholds, "--thresholds");

      const auto family = EventFamily::validated(
          parse_double_list(mx.thresholds, "--thresholds"), mx.depth, mx.min_count);
      const auto lags = parse_u64_list(mx.lags, "--lags");
      const ProcessSpec spec = mx.proc.to_spec();
      const std::uint64_t seed = require_seed(mx.seed);
      const auto rows = psi_scan(spec, family, lags, mx.k_anchor, mx.replicas, seed, mx.workers);
      const auto lag0 = min_mixing_lag(rows);

      std::ostringstream csv;
      write_psi_csv(csv, rows);
      Emit emit;
      emit.command = "mixing";
      emit.out_prefix = mx.out;
      emit.files = {{".csv", csv.str()}};
      json cfg_echo = mx.proc.echo();
      cfg_echo["thresholds"] = double_array(family.thresholds);
      cfg_echo["depth"] = mx.depth;
      cfg_echo["min_count"] = mx.min_count;
      cfg_echo["lags"] = u64_array(lags);
      cfg_echo["k_anchor"] = mx.k_anchor;
      cfg_echo["replicas"] = mx.replicas;
      cfg_echo["seed"] = seed;
      cfg_echo["workers"] = mx.workers;
      emit.config = cfg_echo;
      emit.seed = seed;
      double max_psi = 0.0;
      for (const auto& r : rows) max_psi = std::max(max_psi, r.value);
      emit.metrics = {{"max_psi", max_psi},
                      {"min_mixing_lag", lag0 ? json(*lag0) : json(nullptr)}};
      emit.write();
      return 0;
    };
  }

  // ---- validate-map ----
  struct {
    std::string map;
    std::string observable = "canonical:0.5";
    std::uint64_t k_bound = 4;
    std::string ell_grid = "1,10,100";
    std::string out, config;
  } vmap;
  {
    auto* sub = app.add_subcommand(
        "validate-map", "structural checks on a piecewise affine map and its observable");
    sub->add_option("--map", vmap.map, "luroth | doubling | explicit:<breaks>;<slopes>;<ints>");
    sub->add_option("--observable", vmap.observable, "canonical:<alpha> or cells:<v1,...>")
        ->capture_default_str();
    sub->add_option("--k-bound", vmap.k_bound, "branches enumerated for countable families")
        ->capture_default_str();
    sub->add_option("--ell-grid", vmap.ell_grid, "truncation levels for variation bounds")
        ->capture_default_str();
    sub->add_option("--out", vmap.out, "output prefix; default prints CSV to stdout");
    sub->add_option("--config", vmap.config, "JSON config or manifest to take defaults from");
    runners[sub] = [&vmap, sub]() {
      ConfigBinder binder(sub);
      binder.bind_string("map", vmap.map);
      binder.bind_string("observable", vmap.observable);
      binder.bind_u64("k_bound", vmap.k_bound);
      binder.bind_list("ell_grid", vmap.ell_grid);
      if (!vmap.config.empty()) binder.apply(load_config_file(vmap.config, "validate-map"));
      require_nonempty(vmap.map, "--map");

      const auto map = parse_map(vmap.map);
      const auto obs = parse_obs(vmap.observable);
      const auto grid = parse_double_list(vmap.ell_grid, "--ell-grid");
      const auto rep = validate_example_conditions(map, obs, vmap.k_bound, grid);

      std::ostringstream csv;
      write_validation_csv(csv, rep);
      Emit emit;
      emit.command = "validate-map";
      emit.out_prefix = vmap.out;
      emit.files = {{".csv", csv.str()}};
      emit.config = {{"map", vmap.map},
                     {"observable", vmap.observable},
                     {"k_bound", vmap.k_bound},
                     {"ell_grid", double_array(grid)}};
      emit.metrics = {{"all_pass", rep.all_pass()},
                      {"min_slope", rep.min_slope},
                      {"worst_variation_ratio", rep.worst_variation_ratio}};
      emit.write();
      return 0;  // a failing check is a result, not a tool error
    };
  }

  // ---- dump-path ----
  struct {
    ProcOpts proc;
    std::uint64_t n = 0;
    std::optional<std::uint64_t> seed;
    std::string out, config;
  } dp;
  {
    auto* sub = app.add_subcommand("dump-path", "write one replica path as text");
    add_process_options(sub, dp.proc);
    sub->add_option("--n", dp.n, "path length");
    sub->add_option("--out", dp.out, "output prefix; default prints to stdout");
    sub->add_option("--seed", dp.seed, "master seed (required)");
    sub->add_option("--config", dp.config, "JSON config or manifest to take defaults from");
    runners[sub] = [&dp, sub]() {
      ConfigBinder binder(sub);
      binder.bind_process(dp.proc);
      binder.bind_u64("n", dp.n);
      binder.bind_opt_u64("seed", dp.seed);
      if (!dp.config.empty()) binder.apply(load_config_file(dp.config, "dump-path"));
      if (dp.n == 0) throw config_error("--n must be >= 1");

      const ProcessSpec spec = dp.proc.to_spec();
      const std::uint64_t seed = require_seed(dp.seed);
      const SamplePath path = sample_path(spec, dp.n, seed);
      std::ostringstream txt;
      write_path_dump(txt, path);

      Emit emit;
      emit.command = "dump-path";
      emit.out_prefix = dp.out;
      emit.files = {{".path", txt.str()}};
      json cfg_echo = dp.proc.echo();
      cfg_echo["n"] = dp.n;
      cfg_echo["seed"] = seed;
      emit.config = cfg_echo;
      emit.seed = seed;
      emit.metrics = {{"n", dp.n}};
      emit.write();
      return 0;
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto started = std::chrono::steady_clock::now();
  int rc = 0;
  try {
    for (auto* sub : app.get_subcommands()) {
      const auto it = runners.find(sub);
      if (it != runners.end()) rc = it->second();
    }
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = 1;
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  std::fprintf(stderr, "elapsed %.3fs\n", elapsed.count());
  return rc;
}

}  // namespace trimlab
