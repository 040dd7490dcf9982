// Run orchestration behind the command-line tool: simulate, diagnose,
// select, bounds and sweep, with their JSON and CSV outputs.
//
// Run directory layout
//   config.txt       canonical echo of the run configuration
//   trajectory.bin   checkpoint, replaced atomically after every chunk
//   densities.csv    one row per frame, columns kDensityColumns
//   manifest.json    status, counters, file list (no wall-clock fields)
//   diagnose.json    written by diagnose
//   intervals.csv    written by diagnose, one row per interval, columns kIntervalColumns
//   certificates.csv written by diagnose, one row per scanned interval
//   monitor.jsonl    written by bounds when pointed at a run directory
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "snls/bounds.hpp"
#include "snls/config.hpp"
#include "snls/interval_engine.hpp"
#include "snls/propagator.hpp"
#include "snls/run_io.hpp"
#include "snls/space_time.hpp"

namespace snls {

using json = nlohmann::ordered_json;

enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitConfig = 2,
  kExitAbort = 3,
  kExitBoundary = 4,
};

inline constexpr const char* kManifestSchema = "snls.manifest/1";
inline constexpr const char* kDiagnoseSchema = "snls.diagnose/1";
inline constexpr const char* kSelectSchema = "snls.select/1";
inline constexpr const char* kBoundsSchema = "snls.bounds/1";
inline constexpr const char* kMonitorSchema = "snls.monitor/1";

class IncompleteRunError : public std::runtime_error {
 public:
  IncompleteRunError(const std::string& what, std::vector<double> missing)
      : std::runtime_error(what), missing_(std::move(missing)) {}
  const std::vector<double>& missing() const noexcept { return missing_; }

 private:
  std::vector<double> missing_;
};

// ---------------------------------------------------------------------------
// Simulate

/// Sampled initial profile plus seeded complex noise under a Gaussian
/// envelope of twice the data width.
inline RadialField initial_field(const RunConfig& cfg) {
  RadialField u = cfg.data.sample(cfg.grid());
  if (cfg.noise == 0.0) return u;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::vector<cplx> v(u.values().begin(), u.values().end());
  const double w = 2.0 * cfg.data.width;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = cfg.grid().r(i);
    const double re = normal(rng), im = normal(rng);
    v[i] += cfg.noise * std::exp(-r * r / (2.0 * w * w)) * cplx(re, im);
  }
  return {cfg.grid(), std::move(v)};
}

namespace detail {

/// Keys that determine the evolution; a resumed run must agree on all of them.
inline std::string evolution_fingerprint(const RunConfig& cfg) {
  std::string out;
  std::istringstream in(to_text(cfg));
  for (std::string line; std::getline(in, line);) {
    for (const char* p : {"grid.", "controller.", "data.", "run.nonlinearity", "norms.", "seed"})
      if (line.rfind(p, 0) == 0) {
        out += line + "\n";
        break;
      }
  }
  return out;
}

inline int exit_code_of(const Trajectory& traj) {
  if (traj.status != RunStatus::completed) return kExitAbort;
  if (traj.boundary_breach) return kExitBoundary;
  return kExitOk;
}

}  // namespace detail

struct SimulateOptions {
  bool resume = false;
  /// Stop after this many checkpoint chunks without finalizing (kill stand-in).
  std::optional<std::size_t> stop_after_chunks;
};

struct SimulateOutcome {
  int exit_code = kExitOk;
  bool finished = false;
  Trajectory trajectory;
};

inline json manifest_json(const RunConfig& cfg, const Trajectory& traj, int exit_code) {
  json m;
  m["schema"] = kManifestSchema;
  m["status"] = to_string(traj.status);
  m["exit_code"] = exit_code;
  m["diagnostic"] = traj.diagnostic;
  m["initial_data"] = traj.initial_data;
  m["grid"] = {{"n", cfg.n}, {"r_max", cfg.r_max}};
  m["t_end_requested"] = cfg.t_end;
  m["t_end_reached"] = traj.t_end();
  m["frames"] = traj.size();
  m["expected_frames"] = expected_times(cfg.t_end, cfg.controller.snapshot_stride).size();
  m["steps_taken"] = traj.steps_taken;
  m["steps_rejected"] = traj.steps_rejected;
  m["boundary_breach"] = traj.boundary_breach;
  m["boundary_breach_time"] = traj.boundary_breach ? json(traj.boundary_breach_time) : json(nullptr);
  m["norm_orders"] = std::vector<double>(traj.sobolev_orders().begin(), traj.sobolev_orders().end());
  m["density_columns"] = kDensityColumns;
  m["seed"] = cfg.seed;
  json c = json::object();
  std::istringstream in(to_text(cfg));
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    c[line.substr(0, eq)] = line.substr(eq + 3);
  }
  m["config"] = c;
  m["files"] = {"config.txt", "trajectory.bin", "densities.csv", "manifest.json"};
  return m;
}

/// Evolves in chunks of checkpoint_every frames, replacing the checkpoint
/// after each; with resume, continues from an existing checkpoint whose
/// evolution parameters match. Snapshot times are index-computed, so the
/// resumed output is byte-identical to an uninterrupted run.
inline SimulateOutcome simulate(const RunConfig& cfg, const fs::path& dir, const SimulateOptions& opts = {}) {
  validate(cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw RunIoError("cannot create run directory '" + dir.string() + "'");
  const fs::path ckpt = dir / "trajectory.bin", echo = dir / "config.txt";

  Trajectory traj;
  bool have = false;
  if (opts.resume && fs::exists(ckpt)) {
    if (fs::exists(echo)) {
      const RunConfig stored = parse_config(read_file(echo), echo.string());
      if (detail::evolution_fingerprint(stored) != detail::evolution_fingerprint(cfg))
        throw ConfigError("", "--resume: run directory '" + dir.string() + "' was produced by different evolution parameters");
    }
    traj = load_trajectory(ckpt);
    if (!(traj.grid() == cfg.grid())) throw ConfigError("grid", "--resume: checkpoint grid differs from config");
    have = true;
  }
  write_atomic(echo, to_text(cfg));

  const double stride = cfg.controller.snapshot_stride;
  const double tol = 1e-12 * std::max(1.0, std::abs(cfg.t_end));
  auto chunk_end = [&](std::size_t frames_done) {
    const double t = 0.0 + double(frames_done - 1 + cfg.checkpoint_every) * stride;
    return t > cfg.t_end - tol ? cfg.t_end : t;
  };

  std::size_t chunks = 0;
  if (!have) {
    EvolveOptions eo;
    eo.nonlinearity = cfg.nonlinearity;
    eo.norm_orders = cfg.norm_orders();
    eo.initial_data = cfg.data.describe();
    traj = evolve(initial_field(cfg), 0.0, chunk_end(1), cfg.controller, eo);
    save_trajectory(ckpt, traj);
    ++chunks;
  }
  while (traj.status == RunStatus::completed && traj.t_end() < cfg.t_end - tol) {
    if (opts.stop_after_chunks && chunks >= *opts.stop_after_chunks) return {detail::exit_code_of(traj), false, traj};
    traj = resume(std::move(traj), chunk_end(traj.size()));
    save_trajectory(ckpt, traj);
    ++chunks;
  }
  const int code = detail::exit_code_of(traj);
  write_atomic(dir / "densities.csv", densities_csv(traj));
  write_atomic(dir / "manifest.json", manifest_json(cfg, traj, code).dump(2) + "\n");
  return {code, true, std::move(traj)};
}

// ---------------------------------------------------------------------------
// JSON views

inline json to_json(const Saturating& s) {
  return {{"value", s.value}, {"log", s.log_value}, {"saturated", s.saturated}};
}

inline json to_json(const ProofConstants& k) {
  return {{"C0", k.C0}, {"C1", k.C1}, {"C2", k.C2}, {"c", k.c}, {"C", k.C}, {"C_tilde", k.C_tilde}, {"C_prime", k.C_prime}};
}

inline ProofConstants constants_from_json(const json& j, ProofConstants k = {}) {
  for (auto [name, member] : std::initializer_list<std::pair<const char*, double ProofConstants::*>>{
           {"C0", &ProofConstants::C0}, {"C1", &ProofConstants::C1}, {"C2", &ProofConstants::C2},
           {"c", &ProofConstants::c}, {"C", &ProofConstants::C}, {"C_tilde", &ProofConstants::C_tilde},
           {"C_prime", &ProofConstants::C_prime}})
    if (j.contains(name)) k.*member = j.at(name).get<double>();
  for (const auto& [key, _] : j.items())
    if (!(key == "C0" || key == "C1" || key == "C2" || key == "c" || key == "C" || key == "C_tilde" || key == "C_prime"))
      throw ConfigError("constants." + key, "unknown constant");
  return k;
}

inline json to_json(const SelectionResult& s) {
  return {{"t_star", s.t_star},
          {"chain", s.chain},
          {"K", s.K},
          {"dist_ratios", s.dist_ratios},
          {"dist_cap", s.dist_cap},
          {"first_run_meets_threshold", s.first_run_meets_threshold},
          {"meets_log_bound", s.meets_log_bound},
          {"truncated_links", s.truncated_links},
          {"iterations", s.iterations}};
}

inline json to_json(const ChainCheck& c) {
  return {{"dyadic", c.dyadic}, {"unexceptional", c.unexceptional}, {"within_cap", c.within_cap}, {"ok", c.ok()}};
}

inline json to_json(const MassBracketingAudit& a) {
  json rows = json::array();
  for (const auto& r : a.rows)
    rows.push_back({{"index", r.index},
                    {"length", r.length},
                    {"radius", r.radius},
                    {"resolvable", r.resolvable},
                    {"localized_mass", r.localized_mass},
                    {"lower_ratio", r.lower_ratio},
                    {"upper_ratio", r.upper_ratio},
                    {"dyadic_tail_ratio", r.dyadic_tail_ratio}});
  return {{"t_star", a.t_star},
          {"t_frame", a.t_frame},
          {"substituted_frame", a.substituted_frame},
          {"K", a.K},
          {"N", a.N},
          {"rows", rows},
          {"hardy_lhs", a.hardy_lhs},
          {"sobolev_sq", a.sobolev_sq},
          {"hardy_ratio", a.hardy_ratio},
          {"hardy_summation_ratio", a.hardy_summation_ratio},
          {"K_ceiling", a.K_ceiling},
          {"K_ratio", a.K_ratio},
          {"log_J_ceiling", a.log_J_ceiling},
          {"J_prime", a.J_prime},
          {"mass_length_exponent", a.mass_length_exponent}};
}

inline json to_json(const NormReport& n) {
  json sob = json::object();
  for (const auto& [s, v] : n.linf_sobolev) sob[format_number(s)] = v;
  return {{"t_a", n.t_a}, {"t_b", n.t_b}, {"S", n.S},     {"W", n.W},           {"W_a", n.W_a}, {"W_b", n.W_b},
          {"N", n.N},     {"mass", n.mass}, {"energy", n.energy}, {"linf_sobolev", sob}};
}

inline json to_json(const BootstrapPlan& p) {
  return {{"M", p.M},
          {"E0", p.E0},
          {"delta", p.delta},
          {"theta", p.theta},
          {"eps_reg", p.eps_reg},
          {"eps", p.eps},
          {"R0", to_json(p.R0)},
          {"delta0", p.delta0},
          {"m_ceiling", to_json(p.m_ceiling)},
          {"S_ceiling", to_json(p.S_ceiling)},
          {"bound", to_json(p.bound)},
          {"theorem_shape", to_json(p.theorem_shape)},
          {"closes", p.closes},
          {"failure", p.failure}};
}

inline json to_json(const BoundReport& r) {
  return {{"schema", kBoundsSchema},
          {"E", r.E},
          {"M", r.M},
          {"delta", r.delta},
          {"u0_norm", r.u0_norm},
          {"constants", to_json(r.constants)},
          {"eta", r.eta},
          {"B_ceiling", to_json(r.B_ceiling)},
          {"scattering_bound", to_json(r.scattering)},
          {"count_shape",
           {{"log_two_J_eta", r.count.log_two_J_eta},
            {"C_hat", r.count.C_hat},
            {"log_shape", r.count.log_shape},
            {"within_shape", r.count.within_shape}}},
          {"theorem1_plan", to_json(r.plan)},
          {"m0",
           {{"M0", to_json(r.m0.M0)},
            {"at_floor", r.m0.at_floor},
            {"slack", r.m0.slack},
            {"iterations", r.m0.iterations}}},
          {"g_at_2M0", r.g_at_2M0},
          {"g_composition_log_rel_err", r.g_composition_log_rel_err}};
}

inline json to_json(const MonitorStep& s) {
  return {{"T", s.T},
          {"norm", s.norm},
          {"ceiling", s.ceiling},
          {"interp_lhs", s.interp_lhs},
          {"interp_rhs", s.interp_rhs},
          {"holder_ratio", s.holder_ratio},
          {"apriori", s.apriori},
          {"m", s.m},
          {"m_ceiling", s.m_ceiling},
          {"max_doubling", s.max_doubling},
          {"violated", s.violated}};
}

// ---------------------------------------------------------------------------
// Diagnose

/// Applies the diagnose-time keys (diagnose.*, constants.*, energy.*,
/// monitor.*, bounds.*) of a key-value file over `cfg`.
inline RunConfig apply_analysis_overrides(const KeyValueFile& file, RunConfig cfg) {
  for (const auto& [key, entry] : file.entries) {
    bool ok = false;
    for (const char* p : {"diagnose.", "constants.", "energy.", "monitor.", "bounds."}) ok = ok || key.rfind(p, 0) == 0;
    if (!ok) throw ConfigError(key, "not an analysis key; only diagnose, constants, energy, monitor and bounds apply here");
  }
  return apply(file, std::move(cfg));
}

/// Constants file: keys with or without the "constants." prefix.
inline ProofConstants load_constants(const fs::path& path, ProofConstants base = {}) {
  KeyValueFile file = KeyValueFile::load(path.string());
  KeyValueFile prefixed;
  prefixed.source = file.source;
  for (auto& [key, entry] : file.entries)
    prefixed.entries[key.rfind("constants.", 0) == 0 ? key : "constants." + key] = entry;
  RunConfig cfg;
  cfg.constants = base;
  return apply(prefixed, cfg).constants;
}

/// Snapshot times of the configured run absent from the trajectory.
inline std::vector<double> missing_frames(const Trajectory& traj, const RunConfig& cfg) {
  std::vector<double> out;
  for (double t : expected_times(cfg.t_end, cfg.controller.snapshot_stride))
    if (!traj.frame_at(t, 1e-9)) out.push_back(t);
  return out;
}

struct DiagnoseResult {
  json report;
  IntervalDecomposition decomposition;
  std::vector<ConcentrationCertificate> certificates;
  std::optional<SelectionResult> selection;
};

/// Full interval pipeline on a complete trajectory.
inline constexpr const char* kIntervalsFile = "intervals.csv";
inline constexpr const char* kIntervalColumns = "index,t0,t1,mass,flag,minus_mass,plus_mass";

inline constexpr const char* kCertificatesFile = "certificates.csv";
inline constexpr const char* kCertificateColumns = "index,flag,radius,resolvable,min_ratio,min_ratio_time,samples";

/// Unresolvable rows leave min_ratio and min_ratio_time empty.
inline std::string certificates_csv(const IntervalDecomposition& dec, const std::vector<ConcentrationCertificate>& certs) {
  std::string out = std::string(kCertificateColumns) + "\n";
  for (const auto& c : certs) {
    out += std::to_string(c.index) + "," + to_string(dec.flags[c.index]) + "," + format_number(c.radius) + "," +
           (c.resolvable ? "true" : "false") + ",";
    if (c.resolvable) out += format_number(c.min_ratio) + "," + format_number(c.min_ratio_time);
    else out += ",";
    out += "," + std::to_string(c.samples) + "\n";
  }
  return out;
}

inline std::string intervals_csv(const IntervalDecomposition& dec) {
  std::string out = std::string(kIntervalColumns) + "\n";
  out.reserve(out.size() + dec.size() * 96);
  for (std::size_t j = 0; j < dec.size(); ++j) {
    out += std::to_string(j);
    for (double x : {dec.intervals[j].t0, dec.intervals[j].t1, dec.masses[j]}) out += "," + format_number(x);
    out += "," + to_string(dec.flags[j]);
    for (double x : {dec.minus_masses[j], dec.plus_masses[j]}) out += "," + format_number(x);
    out += "\n";
  }
  return out;
}

/// The brute-force oracle is cubic in the unexceptional count; above this
/// it is skipped and reported as null.
inline constexpr std::size_t kOracleMaxEligible = 400;

inline DiagnoseResult diagnose(const Trajectory& traj, const RunConfig& cfg) {
  const auto missing = missing_frames(traj, cfg);
  if (traj.status != RunStatus::completed || !missing.empty()) {
    std::string what = "incomplete trajectory (status " + to_string(traj.status) + "); missing frames at t =";
    for (double t : missing) what += " " + format_number(t);
    throw IncompleteRunError(what, missing);
  }
  const ProofConstants& k = cfg.constants;
  k.validate();

  const auto hsc = traj.sobolev(kCriticalRegularity);
  const double E_measured = *std::max_element(hsc.begin(), hsc.end());
  const double E = cfg.energy_mode == "measure" ? E_measured : cfg.declared_E;
  const double eta = k.eta(E);

  IntervalDecomposition dec = classify(partition_by_eta(traj, eta), traj, k);
  DiagnoseResult out;
  json& r = out.report;
  r["schema"] = kDiagnoseSchema;
  r["run"] = {{"initial_data", traj.initial_data},
              {"grid", {{"n", traj.grid().n()}, {"r_max", traj.grid().r_max()}}},
              {"nonlinearity", traj.nonlinearity()},
              {"frames", traj.size()},
              {"t_begin", traj.t_begin()},
              {"t_end", traj.t_end()},
              {"boundary_breach", traj.boundary_breach}};
  r["constants"] = to_json(k);
  r["energy"] = {{"mode", cfg.energy_mode}, {"E", E}, {"sup_Hsc", E_measured}};
  r["eta"] = eta;

  const std::size_t n_tail = dec.count(IntervalFlag::tail);
  const std::size_t n_full = dec.size() - n_tail;
  const std::size_t B = dec.count(IntervalFlag::exceptional), G = dec.count(IntervalFlag::unexceptional);
  r["decomposition"] = {{"J", dec.size()},
                        {"full_intervals", n_full},
                        {"has_tail", dec.has_tail()},
                        {"total_mass", dec.total_mass},
                        {"threshold", dec.threshold},
                        {"counts", {{"unexceptional", G}, {"exceptional", B}, {"tail", n_tail}}},
                        {"intervals_file", kIntervalsFile}};

  double sum = 0.0;
  for (double m : dec.masses) sum += m;
  const double reint = space_time_norms(traj, traj.t_begin(), traj.t_end()).S;
  const double reint15 = std::pow(reint, 15.0);
  const double scale = std::max(dec.total_mass, std::numeric_limits<double>::min());
  r["reconstruction"] = {{"sum_masses", sum},
                         {"total_mass", dec.total_mass},
                         {"reintegrated_S15", reint15},
                         {"rel_err", std::abs(sum - dec.total_mass) / scale},
                         {"reintegration_rel_err", std::abs(sum - reint15) / scale},
                         {"two_J_eta", 2.0 * double(dec.size()) * eta},
                         {"within_two_J_eta", sum <= 2.0 * double(dec.size()) * eta * (1.0 + 1e-12)}};

  // Strichartz reading of the exceptional-count ceiling:
  // #B eta^{C1} <= ||u_-||_15^15 + ||u_+||_15^15 <= 2 (C_str E)^15.
  double sum_minus = 0.0, sum_plus = 0.0;
  for (std::size_t j = 0; j < dec.size(); ++j) sum_minus += dec.minus_masses[j], sum_plus += dec.plus_masses[j];
  const std::size_t m_minus = *traj.frame_at(dec.intervals.front().t0, 1e-9);
  const std::size_t m_plus = *traj.frame_at(dec.intervals.back().t1, 1e-9);
  const double h_minus = hsc[m_minus], h_plus = hsc[m_plus];
  double observed = 0.0;
  if (h_minus > 0.0) observed = std::max(observed, std::pow(sum_minus, 1.0 / 15.0) / h_minus);
  if (h_plus > 0.0) observed = std::max(observed, std::pow(sum_plus, 1.0 / 15.0) / h_plus);
  const double c_str = cfg.diagnose.strichartz_constant.value_or(observed);
  const Saturating str_ceiling =
      (E > 0.0 && c_str > 0.0) ? Saturating::from_log(std::log(2.0) + 15.0 * std::log(c_str * E) - k.C1 * std::log(eta))
                               : Saturating{};
  const Saturating remark = exceptional_count_ceiling(E, k);
  r["ceilings"] = {{"B", B},
                   {"B_ceiling", to_json(remark)},
                   {"B_within_ceiling", double(B) <= remark.value},
                   {"strichartz_constant", c_str},
                   {"strichartz_observed", observed},
                   {"strichartz_source", cfg.diagnose.strichartz_constant ? "config" : "observed"},
                   {"B_ceiling_strichartz", to_json(str_ceiling)},
                   {"B_within_strichartz_ceiling", double(B) <= str_ceiling.value},
                   {"free_flow_masses", {{"minus", sum_minus}, {"plus", sum_plus}}},
                   {"G", G}};
  if (E >= 1.0) {
    const auto cs = count_shape(E, k);
    r["ceilings"]["count_shape"] = {{"log_two_J_eta", cs.log_two_J_eta},
                                    {"C_hat", cs.C_hat},
                                    {"log_shape", cs.log_shape},
                                    {"within_shape", cs.within_shape},
                                    {"log_two_J_eta_observed", std::log(2.0 * double(dec.size()) * eta)}};
  } else {
    r["ceilings"]["count_shape"] = nullptr;
  }

  ScanOptions scan;
  scan.radius_factor = cfg.diagnose.radius_factor;
  scan.include_exceptional = cfg.diagnose.include_exceptional;
  out.certificates = concentration_scan(traj, dec, k, scan);
  std::size_t resolvable = 0, positive = 0;
  double min_ratio = std::numeric_limits<double>::infinity();
  std::vector<char> certified(dec.size(), 0);
  for (const auto& c : out.certificates) {
    if (!c.resolvable) continue;
    ++resolvable;
    min_ratio = std::min(min_ratio, c.min_ratio);
    if (c.min_ratio > 0.0) ++positive, certified[c.index] = 1;
  }
  bool all_unexceptional = true;
  for (std::size_t j : dec.unexceptional()) all_unexceptional = all_unexceptional && certified[j];
  r["certificates"] = {{"radius_factor", scan.radius_factor ? json(*scan.radius_factor) : json(nullptr)},
                       {"include_exceptional", scan.include_exceptional},
                       {"scanned", out.certificates.size()},
                       {"resolvable", resolvable},
                       {"positive", positive},
                       {"min_ratio", resolvable ? json(min_ratio) : json(nullptr)},
                       {"all_unexceptional_positive", all_unexceptional},
                       {"certificates_file", kCertificatesFile}};

  r["no_unexceptional"] = G == 0;
  if (G == 0) {
    r["selection"] = nullptr;
    r["oracle"] = nullptr;
    r["audit"] = nullptr;
  } else {
    SelectionOptions so;
    so.removal = cfg.diagnose.removal;
    const SelectionResult sel = recursive_select(dec, k, so);
    json sj = to_json(sel);
    sj["removal"] = so.removal == RemovalRange::whole_window ? "whole_window" : "left_of_pick";
    sj["invariants"] = to_json(check_selection(dec, sel));
    r["selection"] = sj;
    if (G <= kOracleMaxEligible) {
      const std::size_t K_oracle = brute_force_chain(dec, sel.dist_cap);
      r["oracle"] = {{"K_oracle", K_oracle}, {"K_algorithm", sel.K}, {"K_within_oracle", sel.K <= K_oracle}};
    } else {
      r["oracle"] = {{"K_oracle", nullptr}, {"K_algorithm", sel.K}, {"K_within_oracle", nullptr}};
    }
    r["audit"] = to_json(mass_bracketing_audit(traj, dec, sel, k, cfg.diagnose.radius_factor));
    out.selection = sel;
  }
  r["norms"] = to_json(space_time_norms(traj, traj.t_begin(), traj.t_end()));
  out.decomposition = std::move(dec);
  return out;
}

/// Loads a run directory (config echo + checkpoint), applies `overrides`
/// and writes diagnose.json, intervals.csv and certificates.csv next to the run.
inline DiagnoseResult diagnose_run(const fs::path& dir, const KeyValueFile* overrides = nullptr,
                                   const std::optional<ProofConstants>& constants = std::nullopt) {
  const fs::path echo = dir / "config.txt", ckpt = dir / "trajectory.bin";
  if (!fs::exists(echo) || !fs::exists(ckpt))
    throw RunIoError("'" + dir.string() + "' is not a run directory (config.txt and trajectory.bin required)");
  RunConfig cfg = parse_config(read_file(echo), echo.string());
  if (overrides) cfg = apply_analysis_overrides(*overrides, cfg);
  if (constants) {
    cfg.constants = *constants;
    validate(cfg);
  }
  DiagnoseResult res = diagnose(load_trajectory(ckpt), cfg);
  write_atomic(dir / "diagnose.json", res.report.dump(2) + "\n");
  write_atomic(dir / kIntervalsFile, intervals_csv(res.decomposition));
  write_atomic(dir / kCertificatesFile, certificates_csv(res.decomposition, res.certificates));
  return res;
}

// ---------------------------------------------------------------------------
// Select

/// Instance file:
///   {"eta": 0.125,
///    "lengths": [...] | "intervals": [[t0, t1], ...],
///    "flags": ["unexceptional" | "exceptional", ...],     optional
///    "constants": {"C": 1, ...},                           optional
///    "removal": "whole_window" | "left_of_pick"}           optional
struct SelectInstance {
  IntervalDecomposition dec;
  ProofConstants constants;
  RemovalRange removal = RemovalRange::whole_window;
};

inline SelectInstance parse_select_instance(const json& j) {
  auto field = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw ConfigError(key, "missing");
    return j.at(key);
  };
  SelectInstance in;
  try {
    in.dec.eta = field("eta").get<double>();
    if (!(in.dec.eta > 0.0 && in.dec.eta < 1.0)) throw ConfigError("eta", "must lie in (0, 1)");
    if (j.contains("lengths") == j.contains("intervals")) throw ConfigError("lengths", "give exactly one of lengths or intervals");
    if (j.contains("lengths")) {
      double t = 0.0;
      for (double len : j.at("lengths").get<std::vector<double>>()) {
        if (!(len > 0.0)) throw ConfigError("lengths", "entries must be positive");
        in.dec.intervals.push_back({t, t + len});
        t += len;
      }
    } else {
      for (const auto& pair : j.at("intervals")) {
        const auto p = pair.get<std::vector<double>>();
        if (p.size() != 2 || !(p[1] > p[0])) throw ConfigError("intervals", "entries must be [t0, t1] with t1 > t0");
        if (!in.dec.intervals.empty() && p[0] < in.dec.intervals.back().t1)
          throw ConfigError("intervals", "intervals must be ordered and disjoint");
        in.dec.intervals.push_back({p[0], p[1]});
      }
    }
    if (in.dec.intervals.empty()) throw ConfigError("lengths", "no intervals");
    in.dec.masses.assign(in.dec.size(), in.dec.eta);
    in.dec.total_mass = in.dec.eta * double(in.dec.size());
    in.dec.flags.assign(in.dec.size(), IntervalFlag::unexceptional);
    if (j.contains("flags")) {
      const auto flags = j.at("flags").get<std::vector<std::string>>();
      if (flags.size() != in.dec.size()) throw ConfigError("flags", "length differs from the interval count");
      for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] == "exceptional") in.dec.flags[i] = IntervalFlag::exceptional;
        else if (flags[i] != "unexceptional")
          throw ConfigError("flags[" + std::to_string(i) + "]", "expected unexceptional or exceptional");
      }
    }
    if (j.contains("constants")) in.constants = constants_from_json(j.at("constants"));
    if (j.contains("removal")) {
      const auto r = j.at("removal").get<std::string>();
      if (r == "left_of_pick") in.removal = RemovalRange::left_of_pick;
      else if (r != "whole_window") throw ConfigError("removal", "expected whole_window or left_of_pick");
    }
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("instance: ") + e.what());
  }
  return in;
}

inline json select_report(const SelectInstance& in) {
  try {
    in.constants.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("constants", e.what());
  }
  json r;
  r["schema"] = kSelectSchema;
  r["J"] = in.dec.size();
  r["eta"] = in.dec.eta;
  r["constants"] = to_json(in.constants);
  r["removal"] = in.removal == RemovalRange::whole_window ? "whole_window" : "left_of_pick";
  if (in.dec.unexceptional().empty()) {
    r["no_unexceptional"] = true;
    r["selection"] = nullptr;
    return r;
  }
  SelectionOptions so;
  so.removal = in.removal;
  const auto sel = recursive_select(in.dec, in.constants, so);
  r["no_unexceptional"] = false;
  r["selection"] = to_json(sel);
  r["invariants"] = to_json(check_selection(in.dec, sel));
  r["K_oracle"] = in.dec.count(IntervalFlag::unexceptional) <= kOracleMaxEligible
                     ? json(brute_force_chain(in.dec, sel.dist_cap))
                     : json(nullptr);
  return r;
}

// ---------------------------------------------------------------------------
// Bounds and monitor

inline json bounds_report(const RunConfig& cfg) {
  const auto& b = cfg.bounds;
  if (!(b.E >= 0.0)) throw ConfigError("bounds.E", "must be nonnegative");
  if (!(b.M > 0.0)) throw ConfigError("bounds.M", "must be positive");
  if (!(b.delta > 0.0 && b.delta < 1.0)) throw ConfigError("bounds.delta", "must lie in (0, 1)");
  if (!(b.u0_norm >= 0.0)) throw ConfigError("bounds.u0_norm", "must be nonnegative");
  return to_json(bound_report(b.E, b.M, b.delta, b.u0_norm, cfg.constants));
}

/// Unset monitor keys fall back to the run's sup H^{s_c - delta} (E0), the
/// planned R0 and the solved M0.
inline MonitorParams monitor_params(const RunConfig& cfg, const Trajectory* traj = nullptr) {
  MonitorParams p;
  p.mode = cfg.monitor.mode == "corollary" ? BootstrapMode::corollary : BootstrapMode::theorem1;
  p.delta = cfg.monitor.delta;
  double measured = 0.0;
  if (traj)
    for (std::size_t m = 0; m < traj->size(); ++m)
      measured = std::max(measured, sobolev_norm(traj->frame(m), kCriticalRegularity - p.delta));
  p.E0 = cfg.monitor.E0.value_or(std::max({cfg.bounds.E, measured, 1.0}));
  p.R0 = cfg.monitor.R0.value_or(theorem1_plan(cfg.bounds.M, p.E0, p.delta, cfg.constants).R0.value);
  p.M0 = cfg.monitor.M0.value_or(m0_solve(cfg.bounds.u0_norm, cfg.constants).M0.value);
  return p;
}

/// Header line with parameters, then one line per monitored frame time.
inline std::string monitor_jsonl(const MonitorTrail& trail) {
  json head = {{"schema", kMonitorSchema},
               {"mode", trail.params.mode == BootstrapMode::theorem1 ? "theorem1" : "corollary"},
               {"R0", trail.params.R0},
               {"delta", trail.params.delta},
               {"E0", trail.params.E0},
               {"M0", trail.params.M0},
               {"eps", trail.eps},
               {"constants", to_json(trail.constants)},
               {"steps", trail.steps.size()},
               {"passed", trail.passed()},
               {"first_violation", trail.first_violation ? json(*trail.first_violation) : json(nullptr)},
               {"doubling_ratios", trail.doubling_ratios}};
  std::string out = head.dump() + "\n";
  for (const auto& s : trail.steps) out += to_json(s).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepRow {
  double amplitude = 0.0, width = 0.0;
  std::string cell;
  int exit_code = kExitOk;
  std::string status;
  std::size_t frames = 0;
  double mass0 = 0.0, energy0 = 0.0;
  double E = std::numeric_limits<double>::quiet_NaN(), eta = std::numeric_limits<double>::quiet_NaN();
  std::size_t J = 0, B = 0, G = 0, K = 0;
  std::optional<std::size_t> K_oracle;
  double S = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

inline constexpr const char* kSweepColumns =
    "amplitude,width,cell,exit_code,status,frames,mass0,energy0,E,eta,J,B,G,K,K_oracle,S,error";

inline std::string sweep_cell_name(double amplitude, double width) {
  return "a" + format_number(amplitude) + "_w" + format_number(width);
}

/// One simulate + diagnose cell; never throws.
inline SweepRow run_sweep_cell(RunConfig cfg, double amplitude, double width, const fs::path& root) {
  SweepRow row;
  row.amplitude = amplitude;
  row.width = width;
  row.cell = sweep_cell_name(amplitude, width);
  try {
    cfg.data.amplitude = amplitude;
    cfg.data.width = width;
    cfg.sweep = {};
    cfg.output_dir = (root / row.cell).string();
    const auto sim = simulate(cfg, root / row.cell);
    row.exit_code = sim.exit_code;
    row.status = to_string(sim.trajectory.status);
    row.frames = sim.trajectory.size();
    row.mass0 = sim.trajectory.mass().front();
    row.energy0 = sim.trajectory.energy().front();
    if (sim.trajectory.status == RunStatus::completed) {
      const auto d = diagnose(sim.trajectory, cfg);
      write_atomic(root / row.cell / "diagnose.json", d.report.dump(2) + "\n");
      write_atomic(root / row.cell / kIntervalsFile, intervals_csv(d.decomposition));
      write_atomic(root / row.cell / kCertificatesFile, certificates_csv(d.decomposition, d.certificates));
      const auto& r = d.report;
      row.E = r["energy"]["E"].get<double>();
      row.eta = r["eta"].get<double>();
      row.J = r["decomposition"]["J"].get<std::size_t>();
      row.B = r["ceilings"]["B"].get<std::size_t>();
      row.G = r["ceilings"]["G"].get<std::size_t>();
      if (d.selection) {
        row.K = d.selection->K;
        if (!r["oracle"]["K_oracle"].is_null()) row.K_oracle = r["oracle"]["K_oracle"].get<std::size_t>();
      }
      row.S = r["norms"]["S"].get<double>();
    }
  } catch (const ConfigError& e) {
    row.exit_code = kExitConfig;
    row.status = "error";
    row.error = e.what();
  } catch (const std::exception& e) {
    row.exit_code = kExitIo;
    row.status = "error";
    row.error = e.what();
  }
  return row;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  std::string out = std::string(kSweepColumns) + "\n";
  for (const auto& r : rows) {
    out += format_number(r.amplitude) + "," + format_number(r.width) + "," + r.cell + "," + std::to_string(r.exit_code) +
           "," + r.status + "," + std::to_string(r.frames) + "," + format_number(r.mass0) + "," +
           format_number(r.energy0) + "," + format_number(r.E) + "," + format_number(r.eta) + "," + std::to_string(r.J) +
           "," + std::to_string(r.B) + "," + std::to_string(r.G) + "," + std::to_string(r.K) + "," +
           (r.K_oracle ? std::to_string(*r.K_oracle) : std::string()) + "," + format_number(r.S) + "," + quote(r.error) + "\n";
  }
  return out;
}

/// Runs every (amplitude, width) cell on `jobs` workers, each in its own
/// run directory under `root`, and writes sweep.csv sorted by
/// (amplitude, width).
inline std::vector<SweepRow> sweep(const RunConfig& cfg, const fs::path& root, int jobs) {
  validate(cfg);
  if (cfg.sweep.amplitudes.empty() && cfg.sweep.widths.empty())
    throw ConfigError("sweep.amplitudes", "sweep needs sweep.amplitudes and/or sweep.widths");
  if (jobs < 1) throw ConfigError("sweep.jobs", "must be at least 1");
  const auto amps = cfg.sweep.amplitudes.empty() ? std::vector<double>{cfg.data.amplitude} : cfg.sweep.amplitudes;
  const auto widths = cfg.sweep.widths.empty() ? std::vector<double>{cfg.data.width} : cfg.sweep.widths;
  std::vector<std::pair<double, double>> cells;
  for (double a : amps)
    for (double w : widths) cells.emplace_back(a, w);
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw RunIoError("cannot create sweep directory '" + root.string() + "'");

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::min<std::size_t>(std::size_t(jobs), cells.size());
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < cells.size();)
          rows[i] = run_sweep_cell(cfg, cells[i].first, cells[i].second, root);
      });
  }
  write_atomic(root / "sweep.csv", sweep_csv(rows));
  return rows;
}

}  // namespace snls
