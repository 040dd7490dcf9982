// Key-value run configuration with a versioned schema.
//
//   # comment
//   schema = 1
//   [grid]
//   n = 4096
//   r_max = 40
//
// Section headers prefix the keys that follow ("grid.n"); dotted keys may
// also be written out in full. Lists are comma separated.
#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/constants.hpp"
#include "snls/initial_data.hpp"
#include "snls/interval_engine.hpp"
#include "snls/trajectory.hpp"

namespace snls {

inline constexpr int kConfigSchema = 1;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? "config: " + what : "config: field '" + field + "': " + what),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct KeyValueFile {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, Entry> entries;
  std::string source;

  static KeyValueFile parse(const std::string& text, const std::string& source = "<string>") {
    KeyValueFile f;
    f.source = source;
    std::istringstream in(text);
    std::string line, section;
    for (int no = 1; std::getline(in, line); ++no) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("", source + ":" + std::to_string(no) + ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("", source + ":" + std::to_string(no) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("", source + ":" + std::to_string(no) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      if (f.entries.count(key)) throw ConfigError(key, "duplicate key (line " + std::to_string(no) + ")");
      f.entries[key] = {trim(line.substr(eq + 1)), no};
    }
    return f;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
  }
};

struct SweepSpec {
  std::vector<double> amplitudes;
  std::vector<double> widths;
  int jobs = 1;
};

struct DiagnoseSpec {
  std::optional<double> radius_factor;
  std::optional<double> strichartz_constant;
  bool include_exceptional = true;
  RemovalRange removal = RemovalRange::whole_window;
};

struct MonitorSpec {
  std::string mode = "theorem1";
  std::optional<double> R0, E0, M0;
  double delta = 0.1;
};

struct BoundsSpec {
  double E = 1.0, M = 1.0, delta = 1e-6, u0_norm = 1.0;
};

struct RunConfig {
  int schema = kConfigSchema;
  std::size_t n = 4096;
  double r_max = 40.0;
  StepController controller;
  InitialData data;
  double noise = 0.0;
  double t_end = 1.0;
  double nonlinearity = 1.0;
  std::size_t checkpoint_every = 10;
  double norm_delta = 0.1;
  ProofConstants constants;
  std::string energy_mode = "measure";
  double declared_E = 1.0;
  DiagnoseSpec diagnose;
  MonitorSpec monitor;
  BoundsSpec bounds;
  SweepSpec sweep;
  std::string output_dir = "runs/default";
  std::uint64_t seed = 0;

  RadialGrid grid() const { return {n, r_max}; }
  std::vector<double> norm_orders() const { return default_norm_orders(norm_delta); }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out)) throw ConfigError(key, "expected a finite number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, KeyValueFile::trim(item)));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list of numbers");
  return out;
}

inline std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::optional<std::string>(const RunConfig&)> get;
};

inline const std::map<std::string, Field>& schema_fields() {
  using O = std::optional<std::string>;
  auto num = [](double RunConfig::*m) {
    return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); },
                 [m](const RunConfig& c) -> O { return format_double(c.*m); }};
  };
  auto ctl = [](double StepController::*m) {
    return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.controller.*m = parse_double(k, v); },
                 [m](const RunConfig& c) -> O { return format_double(c.controller.*m); }};
  };
  auto dat = [](double InitialData::*m) {
    return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.data.*m = parse_double(k, v); },
                 [m](const RunConfig& c) -> O { return format_double(c.data.*m); }};
  };
  auto con = [](double ProofConstants::*m) {
    return Field{[m](RunConfig& c, const std::string& k, const std::string& v) { c.constants.*m = parse_double(k, v); },
                 [m](const RunConfig& c) -> O { return format_double(c.constants.*m); }};
  };
  auto opt = [](auto accessor) {
    return Field{[accessor](RunConfig& c, const std::string& k, const std::string& v) { accessor(c) = parse_double(k, v); },
                 [accessor](const RunConfig& c) -> O {
                   const auto& o = accessor(const_cast<RunConfig&>(c));
                   return o ? O(format_double(*o)) : std::nullopt;
                 }};
  };
  static const std::map<std::string, Field> fields = {
      {"schema", {[](RunConfig& c, const std::string& k, const std::string& v) { c.schema = int(parse_uint(k, v)); },
                  [](const RunConfig& c) -> O { return std::to_string(c.schema); }}},
      {"seed", {[](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); },
                [](const RunConfig& c) -> O { return std::to_string(c.seed); }}},
      {"grid.n", {[](RunConfig& c, const std::string& k, const std::string& v) { c.n = std::size_t(parse_uint(k, v)); },
                  [](const RunConfig& c) -> O { return std::to_string(c.n); }}},
      {"grid.r_max", num(&RunConfig::r_max)},
      {"controller.dt_max", ctl(&StepController::dt_max)},
      {"controller.theta", ctl(&StepController::phase_budget)},
      {"controller.snapshot_stride", ctl(&StepController::snapshot_stride)},
      {"controller.boundary_mass_tol", ctl(&StepController::boundary_mass_tol)},
      {"controller.blowup_ceiling", ctl(&StepController::blowup_ceiling)},
      {"controller.absorbing_mask",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.controller.absorbing_mask = parse_bool(k, v); },
        [](const RunConfig& c) -> O { return c.controller.absorbing_mask ? "true" : "false"; }}},
      {"data.family",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.data.family = parse_family(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(k, e.what());
          }
        },
        [](const RunConfig& c) -> O { return to_string(c.data.family); }}},
      {"data.amplitude", dat(&InitialData::amplitude)},
      {"data.width", dat(&InitialData::width)},
      {"data.chirp", dat(&InitialData::chirp)},
      {"data.ring_radius", dat(&InitialData::ring_radius)},
      {"data.noise", num(&RunConfig::noise)},
      {"run.t_end", num(&RunConfig::t_end)},
      {"run.nonlinearity", num(&RunConfig::nonlinearity)},
      {"run.checkpoint_every",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.checkpoint_every = std::size_t(parse_uint(k, v)); },
        [](const RunConfig& c) -> O { return std::to_string(c.checkpoint_every); }}},
      {"norms.delta", num(&RunConfig::norm_delta)},
      {"constants.C0", con(&ProofConstants::C0)},
      {"constants.C1", con(&ProofConstants::C1)},
      {"constants.C2", con(&ProofConstants::C2)},
      {"constants.c", con(&ProofConstants::c)},
      {"constants.C", con(&ProofConstants::C)},
      {"constants.C_tilde", con(&ProofConstants::C_tilde)},
      {"constants.C_prime", con(&ProofConstants::C_prime)},
      {"energy.mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v != "measure" && v != "declare") throw ConfigError(k, "expected measure or declare, got '" + v + "'");
          c.energy_mode = v;
        },
        [](const RunConfig& c) -> O { return c.energy_mode; }}},
      {"energy.E", num(&RunConfig::declared_E)},
      {"diagnose.radius_factor", opt([](RunConfig& c) -> std::optional<double>& { return c.diagnose.radius_factor; })},
      {"diagnose.strichartz_constant",
       opt([](RunConfig& c) -> std::optional<double>& { return c.diagnose.strichartz_constant; })},
      {"diagnose.include_exceptional",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.diagnose.include_exceptional = parse_bool(k, v); },
        [](const RunConfig& c) -> O { return c.diagnose.include_exceptional ? "true" : "false"; }}},
      {"diagnose.removal",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "whole_window") c.diagnose.removal = RemovalRange::whole_window;
          else if (v == "left_of_pick") c.diagnose.removal = RemovalRange::left_of_pick;
          else throw ConfigError(k, "expected whole_window or left_of_pick, got '" + v + "'");
        },
        [](const RunConfig& c) -> O {
          return c.diagnose.removal == RemovalRange::whole_window ? "whole_window" : "left_of_pick";
        }}},
      {"monitor.mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v != "theorem1" && v != "corollary") throw ConfigError(k, "expected theorem1 or corollary, got '" + v + "'");
          c.monitor.mode = v;
        },
        [](const RunConfig& c) -> O { return c.monitor.mode; }}},
      {"monitor.R0", opt([](RunConfig& c) -> std::optional<double>& { return c.monitor.R0; })},
      {"monitor.E0", opt([](RunConfig& c) -> std::optional<double>& { return c.monitor.E0; })},
      {"monitor.M0", opt([](RunConfig& c) -> std::optional<double>& { return c.monitor.M0; })},
      {"monitor.delta",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.monitor.delta = parse_double(k, v); },
        [](const RunConfig& c) -> O { return format_double(c.monitor.delta); }}},
      {"bounds.E",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.bounds.E = parse_double(k, v); },
        [](const RunConfig& c) -> O { return format_double(c.bounds.E); }}},
      {"bounds.M",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.bounds.M = parse_double(k, v); },
        [](const RunConfig& c) -> O { return format_double(c.bounds.M); }}},
      {"bounds.delta",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.bounds.delta = parse_double(k, v); },
        [](const RunConfig& c) -> O { return format_double(c.bounds.delta); }}},
      {"bounds.u0_norm",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.bounds.u0_norm = parse_double(k, v); },
        [](const RunConfig& c) -> O { return format_double(c.bounds.u0_norm); }}},
      {"sweep.amplitudes",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.sweep.amplitudes = parse_list(k, v); },
        [](const RunConfig& c) -> O {
          return c.sweep.amplitudes.empty() ? std::nullopt : O(format_list(c.sweep.amplitudes));
        }}},
      {"sweep.widths",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.sweep.widths = parse_list(k, v); },
        [](const RunConfig& c) -> O { return c.sweep.widths.empty() ? std::nullopt : O(format_list(c.sweep.widths)); }}},
      {"sweep.jobs",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.sweep.jobs = int(parse_uint(k, v)); },
        [](const RunConfig& c) -> O { return std::to_string(c.sweep.jobs); }}},
      {"output.dir",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
        [](const RunConfig& c) -> O { return c.output_dir; }}},
  };
  return fields;
}

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace detail

/// Range and consistency checks; throws ConfigError naming the field.
inline void validate(const RunConfig& c) {
  using detail::require;
  require(c.schema == kConfigSchema, "schema", "unsupported schema version " + std::to_string(c.schema) + " (expected " +
                                                   std::to_string(kConfigSchema) + ")");
  require(c.n >= 8 && (c.n & (c.n - 1)) == 0, "grid.n", "must be a power of two, at least 8");
  require(c.r_max > 0.0, "grid.r_max", "must be positive");
  require(c.controller.dt_max > 0.0, "controller.dt_max", "must be positive");
  require(c.controller.phase_budget > 0.0 && c.controller.phase_budget <= 1.0, "controller.theta", "must lie in (0, 1]");
  require(c.controller.snapshot_stride > 0.0, "controller.snapshot_stride", "must be positive");
  require(c.controller.boundary_mass_tol > 0.0, "controller.boundary_mass_tol", "must be positive");
  require(c.controller.blowup_ceiling > 0.0, "controller.blowup_ceiling", "must be positive");
  require(c.data.amplitude >= 0.0, "data.amplitude", "must be nonnegative");
  require(c.data.width > 0.0, "data.width", "must be positive");
  require(c.data.ring_radius >= 0.0, "data.ring_radius", "must be nonnegative");
  require(c.noise >= 0.0, "data.noise", "must be nonnegative");
  require(c.t_end > 0.0, "run.t_end", "must be positive");
  require(c.nonlinearity >= 0.0, "run.nonlinearity", "must be nonnegative (defocusing or free)");
  require(c.checkpoint_every >= 1, "run.checkpoint_every", "must be at least 1");
  require(c.norm_delta > 0.0 && c.norm_delta < kCriticalRegularity, "norms.delta", "must lie in (0, 7/6)");
  try {
    c.constants.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const auto dot = what.find("constants.");
    const std::string field = dot == std::string::npos ? "constants" : what.substr(dot, what.find(' ', dot) - dot);
    throw ConfigError(field, what);
  }
  require(c.declared_E >= 0.0, "energy.E", "must be nonnegative");
  if (c.diagnose.radius_factor) require(*c.diagnose.radius_factor > 0.0, "diagnose.radius_factor", "must be positive");
  if (c.diagnose.strichartz_constant)
    require(*c.diagnose.strichartz_constant > 0.0, "diagnose.strichartz_constant", "must be positive");
  require(c.monitor.delta > 0.0 && c.monitor.delta < 1.0, "monitor.delta", "must lie in (0, 1)");
  for (double a : c.sweep.amplitudes) require(a >= 0.0, "sweep.amplitudes", "entries must be nonnegative");
  for (double w : c.sweep.widths) require(w > 0.0, "sweep.widths", "entries must be positive");
  require(c.sweep.jobs >= 1, "sweep.jobs", "must be at least 1");
  require(!c.output_dir.empty(), "output.dir", "must not be empty");
}

/// Applies every entry of the file over `base`, rejecting unknown keys.
inline RunConfig apply(const KeyValueFile& file, RunConfig base = {}) {
  const auto& fields = detail::schema_fields();
  for (const auto& [key, entry] : file.entries) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(key, "unknown key (" + file.source + ":" + std::to_string(entry.line) + ")");
    it->second.set(base, key, entry.value);
  }
  validate(base);
  return base;
}

inline RunConfig parse_config(const std::string& text, const std::string& source = "<string>") {
  return apply(KeyValueFile::parse(text, source));
}

inline RunConfig load_config(const std::string& path) { return apply(KeyValueFile::load(path)); }

/// Canonical text form: every set key in sorted order, reparses to the same config.
inline std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& [key, field] : detail::schema_fields())
    if (auto v = field.get(c)) out += key + " = " + *v + "\n";
  return out;
}

}  // namespace snls
