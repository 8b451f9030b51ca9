#pragma once

// Flat key=value configuration files. Lines are `key = value`; `#` starts a
// comment; blank lines are ignored. Unknown keys are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "analytics.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace cspecon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelParams model;
  SolverConfig solver;
  // First step of the measurement window; unset means warmup_steps(omega).
  std::optional<std::int64_t> measure_start;
  std::string out_dir = "out";
  bool update_before_trade = false;
  bool emit_full_series = false;
  int tau_min = -10;
  int tau_max = 10;
  RegimeThresholds thresholds;

  std::int64_t window_start() const {
    return measure_start.value_or(warmup_steps(model.omega));
  }

  void validate() const {
    model.validate();
    solver.validate();
    if (measure_start && *measure_start < 0) throw ConfigError("measure_start must be >= 0");
    if (tau_min > tau_max) throw ConfigError("tau_min must be <= tau_max");
  }
};

struct SweepConfig {
  RunConfig base;
  std::string variable = "sigma";
  std::vector<double> values;
  int replicates = 1;
  std::uint64_t master_seed = 1;

  void validate() const {
    base.validate();
    if (values.empty()) throw ConfigError("sweep grid is empty");
    if (replicates < 1) throw ConfigError("sweep replicates must be >= 1");
  }
};

// Seed of sweep cell (value_index, replicate):
//   splitmix64(splitmix64(splitmix64(master) ^ value_index) ^ replicate)
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t value_index,
                                 std::uint64_t replicate) {
  return splitmix64(splitmix64(splitmix64(master) ^ value_index) ^ replicate);
}

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("bad number for " + key + ": '" + v + "'");
  return out;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

// Applies one key to a run configuration. Returns false for unknown keys.
inline bool set_run_key(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  auto& m = c.model;
  auto& s = c.solver;
  if (key == "n_goods") m.n_goods = parse_int<int>(key, value);
  else if (key == "n_agents") m.n_agents = parse_int<int>(key, value);
  else if (key == "sigma") m.sigma = parse_double(key, value);
  else if (key == "eps_d") m.eps_d = parse_double(key, value);
  else if (key == "eps_p") m.eps_p = parse_double(key, value);
  else if (key == "gamma") m.gamma = parse_double(key, value);
  else if (key == "omega") m.omega = parse_double(key, value);
  else if (key == "x_m") m.x_m = parse_double(key, value);
  else if (key == "n_steps") m.n_steps = parse_int<std::int64_t>(key, value);
  else if (key == "seed") m.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "pref_scale") {
    if (value == "auto") m.pref_scale.reset();
    else m.pref_scale = parse_double(key, value);
  }
  else if (key == "solver.max_iters") s.max_iters = parse_int<int>(key, value);
  else if (key == "solver.grad_tol") s.grad_tol = parse_double(key, value);
  else if (key == "solver.obj_tol") s.obj_tol = parse_double(key, value);
  else if (key == "solver.init_step") s.init_step = parse_double(key, value);
  else if (key == "solver.shrink") s.shrink = parse_double(key, value);
  else if (key == "solver.sufficient_decrease") s.sufficient_decrease = parse_double(key, value);
  else if (key == "solver.face_newton") s.face_newton = parse_bool(key, value);
  else if (key == "measure_start") {
    if (value == "auto") c.measure_start.reset();
    else c.measure_start = parse_int<std::int64_t>(key, value);
  }
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "update_before_trade") c.update_before_trade = parse_bool(key, value);
  else if (key == "emit_full_series") c.emit_full_series = parse_bool(key, value);
  else if (key == "tau_min") c.tau_min = parse_int<int>(key, value);
  else if (key == "tau_max") c.tau_max = parse_int<int>(key, value);
  else if (key == "regime.unstable_mean") c.thresholds.unstable_mean = parse_double(key, value);
  else if (key == "regime.acf_peak") c.thresholds.acf_peak = parse_double(key, value);
  else if (key == "regime.spike_ratio") c.thresholds.spike_ratio = parse_double(key, value);
  else if (key == "regime.min_period") c.thresholds.min_period = parse_int<std::size_t>(key, value);
  else if (key == "regime.min_length") c.thresholds.min_length = parse_int<std::size_t>(key, value);
  else return false;
  return true;
}

// Parses `key = value` lines into an ordered list of pairs.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

namespace detail {

// alpha is redundant with n_agents / n_goods; it may be given instead of
// n_agents, or alongside it if consistent.
inline void apply_alpha(RunConfig& c, const std::optional<double>& alpha, bool agents_given) {
  if (!alpha) return;
  const double m = *alpha * c.model.n_goods;
  if (agents_given) {
    if (m != static_cast<double>(c.model.n_agents))
      throw ConfigError("alpha disagrees with n_agents / n_goods");
    return;
  }
  if (m != std::floor(m) || m < 1.0) throw ConfigError("alpha * n_goods must be a positive integer");
  c.model.n_agents = static_cast<int>(m);
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  std::optional<double> alpha;
  bool agents_given = false;
  for (const auto& [k, v] : parse_key_values(in)) {
    if (k == "alpha") {
      alpha = detail::parse_double(k, v);
      continue;
    }
    if (k == "n_agents") agents_given = true;
    if (!set_run_key(c, k, v)) throw ConfigError("unknown key: " + k);
  }
  detail::apply_alpha(c, alpha, agents_given);
  c.validate();
  return c;
}

inline std::vector<double> parse_value_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(detail::parse_double(key, item));
  }
  return out;
}

// `start:stop:step`, inclusive of stop up to round-off. Values are computed as
// start + k * step so the grid does not accumulate error.
inline std::vector<double> parse_range(const std::string& key, const std::string& v) {
  const auto parts = parse_value_list(key, [&] {
    std::string s = v;
    for (char& ch : s)
      if (ch == ':') ch = ',';
    return s;
  }());
  if (parts.size() != 3 || parts[2] == 0.0) throw ConfigError("bad range for " + key + ": " + v);
  const double start = parts[0], stop = parts[1], step = parts[2];
  const double count = std::floor((stop - start) / step + 1e-9);
  if (count < 0) throw ConfigError("empty range for " + key);
  std::vector<double> out;
  for (int k = 0; k <= static_cast<int>(count); ++k) out.push_back(start + k * step);
  return out;
}

inline bool is_sweepable(const std::string& key) {
  return key == "sigma" || key == "eps_d" || key == "eps_p" || key == "gamma" || key == "omega" ||
         key == "x_m" || key == "n_agents" || key == "n_goods";
}

inline SweepConfig parse_sweep_config(std::istream& in) {
  SweepConfig c;
  std::optional<double> alpha;
  bool agents_given = false;
  for (const auto& [k, v] : parse_key_values(in)) {
    if (k == "sweep.variable") c.variable = v;
    else if (k == "sweep.values") c.values = parse_value_list(k, v);
    else if (k == "sweep.range") c.values = parse_range(k, v);
    else if (k == "sweep.replicates") c.replicates = detail::parse_int<int>(k, v);
    else if (k == "sweep.master_seed") c.master_seed = detail::parse_int<std::uint64_t>(k, v);
    else if (k == "alpha") alpha = detail::parse_double(k, v);
    else {
      if (k == "n_agents") agents_given = true;
      if (!set_run_key(c.base, k, v)) throw ConfigError("unknown key: " + k);
    }
  }
  if (!is_sweepable(c.variable)) throw ConfigError("cannot sweep over '" + c.variable + "'");
  detail::apply_alpha(c.base, alpha, agents_given);
  c.validate();
  return c;
}

// Sets the swept variable on a copy of the base configuration.
inline RunConfig sweep_cell_config(const SweepConfig& sw, std::size_t value_index, int replicate) {
  RunConfig c = sw.base;
  const std::string v = format_double(sw.values.at(value_index));
  if (sw.variable == "n_agents" || sw.variable == "n_goods") {
    const double x = sw.values[value_index];
    if (x != std::floor(x)) throw ConfigError(sw.variable + " must be an integer");
    set_run_key(c, sw.variable, std::to_string(static_cast<long long>(x)));
  } else {
    set_run_key(c, sw.variable, v);
  }
  c.model.seed = derive_seed(sw.master_seed, value_index, static_cast<std::uint64_t>(replicate));
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  return parse_run_config(in);
}

inline SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sweep config: " + path);
  return parse_sweep_config(in);
}

// Fully resolved configuration, one key per line, in a fixed order. Parsing
// the echo back yields the same configuration.
inline std::string echo_config(const RunConfig& c) {
  std::ostringstream o;
  const auto& m = c.model;
  const auto& s = c.solver;
  o << "# csp-econ v1\n";
  o << "n_goods = " << m.n_goods << "\n";
  o << "n_agents = " << m.n_agents << "\n";
  o << "# alpha = " << format_double(m.alpha()) << "\n";
  o << "sigma = " << format_double(m.sigma) << "\n";
  o << "eps_d = " << format_double(m.eps_d) << "\n";
  o << "eps_p = " << format_double(m.eps_p) << "\n";
  o << "gamma = " << format_double(m.gamma) << "\n";
  o << "omega = " << format_double(m.omega) << "\n";
  o << "x_m = " << format_double(m.x_m) << "\n";
  o << "n_steps = " << m.n_steps << "\n";
  o << "seed = " << m.seed << "\n";
  o << "pref_scale = " << format_double(m.pref_std()) << "\n";
  o << "solver.max_iters = " << s.max_iters << "\n";
  o << "solver.grad_tol = " << format_double(s.grad_tol) << "\n";
  o << "solver.obj_tol = " << format_double(s.obj_tol) << "\n";
  o << "solver.init_step = " << format_double(s.init_step) << "\n";
  o << "solver.shrink = " << format_double(s.shrink) << "\n";
  o << "solver.sufficient_decrease = " << format_double(s.sufficient_decrease) << "\n";
  o << "solver.face_newton = " << (s.face_newton ? "true" : "false") << "\n";
  o << "measure_start = " << c.window_start() << "\n";
  o << "update_before_trade = " << (c.update_before_trade ? "true" : "false") << "\n";
  o << "emit_full_series = " << (c.emit_full_series ? "true" : "false") << "\n";
  o << "tau_min = " << c.tau_min << "\n";
  o << "tau_max = " << c.tau_max << "\n";
  o << "regime.unstable_mean = " << format_double(c.thresholds.unstable_mean) << "\n";
  o << "regime.acf_peak = " << format_double(c.thresholds.acf_peak) << "\n";
  o << "regime.spike_ratio = " << format_double(c.thresholds.spike_ratio) << "\n";
  o << "regime.min_period = " << c.thresholds.min_period << "\n";
  o << "regime.min_length = " << c.thresholds.min_length << "\n";
  return o.str();
}

}  // namespace cspecon
