// snls: simulate, diagnose, select, bounds and sweep.
//
// Exit codes: 0 success, 1 I/O or incomplete-run error, 2 config or usage
// error, 3 blow-up guard or dt underflow, 4 boundary-mass breach.
// SNLS_CONFIG_ROOT, when set, is the base for relative --config and
// --constants paths.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "snls/harness.hpp"

namespace fs = std::filesystem;
using namespace snls;

namespace {

fs::path config_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative())
    if (const char* root = std::getenv("SNLS_CONFIG_ROOT"); root && *root) return fs::path(root) / path;
  return path;
}

void emit(const std::string& text, const std::string& out, const std::string& default_name) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  fs::path path(out);
  if (fs::is_directory(path) || path.extension().empty()) {
    std::error_code ec;
    fs::create_directories(path, ec);
    path /= default_name;
  }
  write_atomic(path, text);
  std::cerr << "wrote " << path.string() << "\n";
}

RunConfig load_run_config(const std::string& path, const std::string& constants) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_config(config_path(path).string());
  if (!constants.empty()) {
    cfg.constants = load_constants(config_path(constants), cfg.constants);
    validate(cfg);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial defocusing NLS on R^3: simulation and interval diagnostics"};
  app.require_subcommand(1);

  std::string config, out, constants;
  int jobs = 0;
  bool resume = false;

  auto* sim = app.add_subcommand("simulate", "Evolve a configured initial datum into a run directory");
  sim->add_option("--config", config, "Run configuration file")->required();
  sim->add_option("--out", out, "Run directory (default: output.dir)");
  sim->add_option("--constants", constants, "Constants file");
  sim->add_flag("--resume", resume, "Continue from the run directory's checkpoint");

  auto* diag = app.add_subcommand("diagnose", "Interval pipeline on a completed run directory");
  diag->add_option("--out", out, "Run directory")->required();
  diag->add_option("--config", config, "Analysis overrides (diagnose, constants, energy, monitor, bounds keys)");
  diag->add_option("--constants", constants, "Constants file");

  auto* sel = app.add_subcommand("select", "Recursive chain selection on an interval instance (JSON)");
  sel->add_option("--config", config, "Instance file")->required();
  sel->add_option("--constants", constants, "Constants file");
  sel->add_option("--out", out, "Output file or directory (default: stdout)");

  auto* bnd = app.add_subcommand("bounds", "Bound formulas; with a run directory as --out, also the bootstrap monitor");
  bnd->add_option("--config", config, "Configuration with bounds and monitor keys");
  bnd->add_option("--constants", constants, "Constants file");
  bnd->add_option("--out", out, "Output file or directory (default: stdout)");

  auto* swp = app.add_subcommand("sweep", "Simulate and diagnose over sweep.amplitudes x sweep.widths");
  swp->add_option("--config", config, "Run configuration with sweep keys")->required();
  swp->add_option("--out", out, "Sweep root directory (default: output.dir)");
  swp->add_option("--jobs", jobs, "Worker threads (default: sweep.jobs)")->check(CLI::PositiveNumber);
  swp->add_option("--constants", constants, "Constants file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) {
      const RunConfig cfg = load_run_config(config, constants);
      const fs::path dir = out.empty() ? fs::path(cfg.output_dir) : fs::path(out);
      const auto res = simulate(cfg, dir, {.resume = resume});
      const auto& t = res.trajectory;
      std::cerr << to_string(t.status) << ": " << t.size() << " frames to t = " << t.t_end() << " in " << dir.string()
                << "\n";
      if (!t.diagnostic.empty()) std::cerr << t.diagnostic << "\n";
      if (t.boundary_breach) std::cerr << "boundary-mass breach at t = " << t.boundary_breach_time << "\n";
      return res.exit_code;
    }
    if (*diag) {
      std::optional<KeyValueFile> overrides;
      if (!config.empty()) overrides = KeyValueFile::load(config_path(config).string());
      std::optional<ProofConstants> k;
      if (!constants.empty()) {
        ProofConstants base;
        if (fs::exists(fs::path(out) / "config.txt"))
          base = parse_config(read_file(fs::path(out) / "config.txt")).constants;
        if (overrides) base = apply_analysis_overrides(*overrides, RunConfig{.constants = base}).constants;
        k = load_constants(config_path(constants), base);
      }
      const auto res = diagnose_run(out, overrides ? &*overrides : nullptr, k);
      const auto& r = res.report;
      std::cerr << "J = " << r["decomposition"]["J"] << ", B = " << r["ceilings"]["B"] << ", G = " << r["ceilings"]["G"]
                << (r["no_unexceptional"].get<bool>() ? ", no unexceptional intervals" : "") << "; wrote "
                << (fs::path(out) / "diagnose.json").string() << "\n";
      return kExitOk;
    }
    if (*sel) {
      std::ifstream is(config_path(config));
      if (!is) throw RunIoError("cannot read '" + config_path(config).string() + "'");
      json j;
      try {
        j = json::parse(is);
      } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("instance: ") + e.what());
      }
      SelectInstance inst = parse_select_instance(j);
      if (!constants.empty()) inst.constants = load_constants(config_path(constants), inst.constants);
      emit(select_report(inst).dump(2) + "\n", out, "select.json");
      return kExitOk;
    }
    if (*bnd) {
      const RunConfig cfg = load_run_config(config, constants);
      const bool run_dir = !out.empty() && fs::exists(fs::path(out) / "trajectory.bin");
      emit(bounds_report(cfg).dump(2) + "\n", out, "bounds.json");
      if (run_dir) {
        const Trajectory traj = load_trajectory(fs::path(out) / "trajectory.bin");
        const auto trail = bootstrap_monitor(traj, monitor_params(cfg, &traj), cfg.constants);
        write_atomic(fs::path(out) / "monitor.jsonl", monitor_jsonl(trail));
        std::cerr << "monitor: " << (trail.passed() ? "passed" : "violated at step " + std::to_string(*trail.first_violation))
                  << "\n";
      }
      return kExitOk;
    }
    if (*swp) {
      const RunConfig cfg = load_run_config(config, constants);
      const fs::path root = out.empty() ? fs::path(cfg.output_dir) : fs::path(out);
      const auto rows = sweep(cfg, root, jobs > 0 ? jobs : cfg.sweep.jobs);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.exit_code != kExitOk;
      std::cerr << rows.size() << " cells, " << failed << " not clean; wrote " << (root / "sweep.csv").string() << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingNormError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const IncompleteRunError& e) {
    std::cerr << "diagnose: " << e.what() << "\n";
    return kExitIo;
  } catch (const RunIoError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}
