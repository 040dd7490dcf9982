#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "snls/harness.hpp"
#include "snls/synthetic.hpp"

using namespace snls;

namespace {

// Fresh scratch directory per test.
fs::path scratch() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "snls_harness" / (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_config() {
  RunConfig c;
  c.n = 256;
  c.r_max = 20.0;
  c.controller.snapshot_stride = 0.01;
  c.t_end = 0.1;
  c.checkpoint_every = 3;
  return c;
}

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

}  // namespace

TEST(Config, DefaultsRoundTripThroughText) {
  RunConfig c;
  c.sweep.amplitudes = {0.5, 1.0};
  c.diagnose.radius_factor = 3.5;
  c.monitor.R0 = 100.0;
  const std::string text = to_text(c);
  EXPECT_EQ(to_text(parse_config(text)), text);
  EXPECT_NE(text.find("diagnose.radius_factor = 3.5"), std::string::npos);
  EXPECT_EQ(text.find("diagnose.strichartz_constant"), std::string::npos);
}

TEST(Config, SectionsDottedKeysAndComments) {
  const auto c = parse_config(
      "# header\n"
      "schema = 1\n"
      "seed = 7   # trailing\n"
      "[grid]\n"
      "n = 512\n"
      "r_max = 30\n"
      "[data]\n"
      "family = ring\n"
      "ring_radius = 5\n"
      "[sweep]\n"
      "amplitudes = 0.5, 1,2\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.n, 512u);
  EXPECT_EQ(c.r_max, 30.0);
  EXPECT_EQ(c.data.family, DataFamily::ring);
  EXPECT_EQ(c.data.ring_radius, 5.0);
  EXPECT_EQ(c.sweep.amplitudes, (std::vector<double>{0.5, 1.0, 2.0}));
  EXPECT_EQ(parse_config("grid.n = 64\n").n, 64u);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of("schema = 2\n"), "schema");
  EXPECT_EQ(field_of("[grid]\nn = abc\n"), "grid.n");
  EXPECT_EQ(field_of("[grid]\nn = 100\n"), "grid.n");
  EXPECT_EQ(field_of("[grid]\nr_max = -1\n"), "grid.r_max");
  EXPECT_EQ(field_of("[data]\nwidth = 0\n"), "data.width");
  EXPECT_EQ(field_of("[data]\nfamily = sech\n"), "data.family");
  EXPECT_EQ(field_of("[controller]\ntheta = 2\n"), "controller.theta");
  EXPECT_EQ(field_of("[controller]\nabsorbing_mask = maybe\n"), "controller.absorbing_mask");
  EXPECT_EQ(field_of("[energy]\nmode = guess\n"), "energy.mode");
  EXPECT_EQ(field_of("[norms]\ndelta = 1.5\n"), "norms.delta");
  EXPECT_EQ(field_of("[constants]\nC0 = 3\n"), "constants");
  EXPECT_EQ(field_of("[sweep]\nwidths = 1, -1\n"), "sweep.widths");
  EXPECT_EQ(field_of("[grid]\nsize = 3\n"), "grid.size");
  EXPECT_EQ(field_of("a = 1\na = 2\n"), "a");
  EXPECT_EQ(field_of("[run]\nt_end = nan\n"), "run.t_end");
  EXPECT_THROW(parse_config("just words\n"), ConfigError);
  EXPECT_THROW(parse_config("[grid\n"), ConfigError);
}

TEST(Config, ConstantsFileAcceptsBareKeys) {
  const fs::path dir = scratch();
  std::ofstream(dir / "k.conf") << "C = 3\nconstants.C_tilde = 4\n";
  const auto k = load_constants(dir / "k.conf");
  EXPECT_EQ(k.C, 3.0);
  EXPECT_EQ(k.C_tilde, 4.0);
  EXPECT_EQ(k.C1, ProofConstants{}.C1);
  std::ofstream(dir / "bad.conf") << "C1 = 0.5\n";
  EXPECT_THROW(load_constants(dir / "bad.conf"), ConfigError);
}

// Shipped examples load; the constants file restates the defaults.
TEST(Config, ShippedConfigsLoad) {
  const fs::path dir = SNLS_CONFIG_DIR;
  for (const char* name : {"gaussian.conf", "sweep.conf", "monitor.conf"}) EXPECT_NO_THROW(load_config((dir / name).string())) << name;
  const auto k = load_constants(dir / "constants.conf"), d = ProofConstants{};
  EXPECT_EQ(to_json(k), to_json(d));
  std::ifstream in(dir / "select_geometric.json");
  const auto inst = parse_select_instance(json::parse(in));
  EXPECT_EQ(inst.dec.size(), 20u);
}

TEST(Config, AnalysisOverridesRejectEvolutionKeys) {
  const auto ok = apply_analysis_overrides(KeyValueFile::parse("[diagnose]\nradius_factor = 2\n"), RunConfig{});
  EXPECT_EQ(ok.diagnose.radius_factor, 2.0);
  try {
    apply_analysis_overrides(KeyValueFile::parse("[grid]\nn = 64\n"), RunConfig{});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "grid.n");
  }
}

TEST(RunIo, ExpectedTimesMatchEvolvedFrames) {
  for (double t_end : {0.1, 0.105, 0.0999999, 0.37}) {
    const RadialGrid g(128, 20.0);
    StepController ctl;
    ctl.snapshot_stride = 0.01;
    const auto traj = evolve(InitialData{}.sample(g), 0.0, t_end, ctl);
    const auto exp = expected_times(t_end, 0.01);
    ASSERT_EQ(exp.size(), traj.size()) << t_end;
    for (std::size_t m = 0; m < exp.size(); ++m) EXPECT_EQ(exp[m], traj.times()[m]);
  }
}

TEST(RunIo, TrajectoryCheckpointRoundTrip) {
  const RadialGrid g(128, 20.0);
  StepController ctl;
  ctl.snapshot_stride = 0.02;
  ctl.absorbing_mask = true;
  EvolveOptions eo;
  eo.initial_data = "gaussian";
  auto traj = evolve(InitialData{DataFamily::gaussian, 1.2, 0.8}.sample(g), 0.0, 0.1, ctl, eo);
  traj.boundary_breach = true;
  traj.boundary_breach_time = 0.04;
  traj.diagnostic = "note";
  const fs::path dir = scratch();
  save_trajectory(dir / "t.bin", traj);
  EXPECT_FALSE(fs::exists(dir / "t.bin.tmp"));
  const auto back = load_trajectory(dir / "t.bin");
  EXPECT_EQ(serialize_trajectory(back), serialize_trajectory(traj));
  EXPECT_EQ(densities_csv(back), densities_csv(traj));
  EXPECT_TRUE(back.controller.absorbing_mask);
  EXPECT_EQ(back.steps_taken, traj.steps_taken);
  EXPECT_EQ(back.initial_data, "gaussian");
  EXPECT_EQ(back.boundary_breach_time, 0.04);

  std::string bytes = serialize_trajectory(traj);
  EXPECT_THROW(deserialize_trajectory(bytes.substr(0, bytes.size() - 3)), std::runtime_error);
  EXPECT_THROW(deserialize_trajectory(bytes + "x"), std::runtime_error);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_trajectory(bytes), std::runtime_error);
  EXPECT_THROW(load_trajectory(dir / "absent.bin"), RunIoError);
}

TEST(Simulate, ZeroAmplitudeGivesZeroDensitiesAndExitZero) {
  auto c = small_config();
  c.data.amplitude = 0.0;
  const fs::path dir = scratch();
  const auto res = simulate(c, dir);
  EXPECT_EQ(res.exit_code, kExitOk);
  std::ifstream is(dir / "densities.csv");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, kDensityColumns);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.find(',')), ",0,0,0,0,0,0,0") << line;
  }
  EXPECT_EQ(rows, expected_times(c.t_end, c.controller.snapshot_stride).size());
  const auto m = json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "completed");
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_EQ(m["frames"], m["expected_frames"]);
}

TEST(Simulate, SameConfigAndSeedAreByteIdentical) {
  auto c = small_config();
  c.noise = 0.05;
  c.seed = 11;
  const fs::path dir = scratch();
  simulate(c, dir / "a");
  simulate(c, dir / "b");
  for (const char* f : {"densities.csv", "manifest.json", "config.txt", "trajectory.bin"})
    EXPECT_EQ(read_file(dir / "a" / f), read_file(dir / "b" / f)) << f;
  c.seed = 12;
  simulate(c, dir / "c");
  EXPECT_NE(read_file(dir / "a" / "densities.csv"), read_file(dir / "c" / "densities.csv"));
}

TEST(Simulate, KilledRunResumesToIdenticalOutput) {
  auto c = small_config();
  c.data.amplitude = 1.5;
  const fs::path dir = scratch();
  const auto full = simulate(c, dir / "full");
  ASSERT_TRUE(full.finished);

  const auto partial = simulate(c, dir / "killed", {.stop_after_chunks = 2});
  EXPECT_FALSE(partial.finished);
  EXPECT_FALSE(fs::exists(dir / "killed" / "densities.csv"));
  EXPECT_LT(load_trajectory(dir / "killed" / "trajectory.bin").size(), full.trajectory.size());

  const auto resumed = simulate(c, dir / "killed", {.resume = true});
  EXPECT_TRUE(resumed.finished);
  for (const char* f : {"densities.csv", "manifest.json", "trajectory.bin"})
    EXPECT_EQ(read_file(dir / "full" / f), read_file(dir / "killed" / f)) << f;

  // Extending t_end on resume matches a run configured with the longer horizon.
  auto longer = c;
  longer.t_end = 0.17;
  simulate(longer, dir / "long");
  simulate(longer, dir / "full", {.resume = true});
  EXPECT_EQ(read_file(dir / "long" / "densities.csv"), read_file(dir / "full" / "densities.csv"));
}

TEST(Simulate, ResumeRejectsDifferentEvolution) {
  auto c = small_config();
  const fs::path dir = scratch();
  simulate(c, dir, {.stop_after_chunks = 1});
  c.data.amplitude = 2.0;
  EXPECT_THROW(simulate(c, dir, {.resume = true}), ConfigError);
}

TEST(Simulate, ExitCodesForAbortAndBreach) {
  const fs::path dir = scratch();
  auto blow = small_config();
  blow.controller.blowup_ceiling = 0.5;
  const auto b = simulate(blow, dir / "blow");
  EXPECT_EQ(b.exit_code, kExitAbort);
  EXPECT_EQ(json::parse(read_file(dir / "blow" / "manifest.json"))["status"], "blowup_abort");

  auto breach = small_config();
  breach.data.family = DataFamily::ring;
  breach.data.ring_radius = 15.0;
  breach.controller.boundary_mass_tol = 1e-6;
  const auto r = simulate(breach, dir / "breach");
  EXPECT_EQ(r.exit_code, kExitBoundary);
  EXPECT_TRUE(r.trajectory.boundary_breach);
  EXPECT_EQ(json::parse(read_file(dir / "breach" / "manifest.json"))["boundary_breach"], true);
}

TEST(Simulate, UnwritableOutputIsAnIoError) {
  const fs::path dir = scratch();
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(simulate(small_config(), dir / "file" / "run"), RunIoError);
}

TEST(Diagnose, LinearRunIsAllExceptionalWithEmptyChain) {
  auto c = small_config();
  c.nonlinearity = 0.0;
  c.data.amplitude = 1.5;
  const fs::path dir = scratch();
  simulate(c, dir);
  const auto res = diagnose_run(dir);
  const auto& r = res.report;
  EXPECT_TRUE(fs::exists(dir / "diagnose.json"));
  EXPECT_TRUE(fs::exists(dir / kIntervalsFile));
  EXPECT_TRUE(fs::exists(dir / kCertificatesFile));
  EXPECT_EQ(r["ceilings"]["G"], 0);
  EXPECT_GT(r["ceilings"]["B"].get<int>(), 0);
  EXPECT_TRUE(r["no_unexceptional"].get<bool>());
  EXPECT_TRUE(r["selection"].is_null());
  EXPECT_FALSE(res.selection.has_value());
}

TEST(Diagnose, ReconstructionIdentity) {
  auto c = small_config();
  c.data.amplitude = 1.5;
  c.t_end = 0.3;
  const fs::path dir = scratch();
  const auto sim = simulate(c, dir);
  const auto res = diagnose(sim.trajectory, c);
  const auto& rec = res.report["reconstruction"];
  EXPECT_LE(rec["rel_err"].get<double>(), 1e-10);
  EXPECT_LE(rec["reintegration_rel_err"].get<double>(), 1e-10);
  EXPECT_TRUE(rec["within_two_J_eta"].get<bool>());
  double sum = 0.0;
  std::istringstream csv(intervals_csv(res.decomposition));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kIntervalColumns);
  std::size_t rows = 0;
  for (; std::getline(csv, line); ++rows) {
    std::vector<std::string> cols;
    for (std::size_t a = 0, b; a <= line.size(); a = b + 1) {
      b = std::min(line.find(',', a), line.size());
      cols.push_back(line.substr(a, b - a));
    }
    ASSERT_EQ(cols.size(), 7u);
    sum += std::stod(cols[3]);
  }
  EXPECT_EQ(rows, res.decomposition.size());
  EXPECT_NEAR(sum, sim.trajectory.s_mass().total(), 1e-10 * sim.trajectory.s_mass().total());
  EXPECT_EQ(res.report["decomposition"]["J"], res.decomposition.size());
}

TEST(Diagnose, CertificateFileMatchesSummary) {
  auto c = small_config();
  c.data.amplitude = 1.5;
  c.diagnose.radius_factor = 30.0;
  const fs::path dir = scratch();
  simulate(c, dir);
  const auto res = diagnose_run(dir);
  const auto& cert = res.report["certificates"];
  std::istringstream csv(read_file(dir / kCertificatesFile));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kCertificateColumns);
  std::size_t rows = 0, resolvable = 0;
  for (; std::getline(csv, line); ++rows) resolvable += line.find(",true,") != std::string::npos;
  EXPECT_EQ(rows, res.decomposition.count(IntervalFlag::exceptional));
  EXPECT_EQ(cert["scanned"], rows);
  EXPECT_EQ(cert["resolvable"], resolvable);
  EXPECT_GT(resolvable, 0u);
  EXPECT_GT(cert["min_ratio"].get<double>(), 0.0);
  // Vacuous without unexceptional intervals.
  EXPECT_TRUE(cert["all_unexceptional_positive"].get<bool>());

  c.diagnose.include_exceptional = false;
  EXPECT_TRUE(diagnose(load_trajectory(dir / "trajectory.bin"), c).certificates.empty());
}

TEST(Diagnose, IncompleteRunListsMissingFrames) {
  auto c = small_config();
  const fs::path dir = scratch();
  simulate(c, dir, {.stop_after_chunks = 1});
  const auto stored = load_trajectory(dir / "trajectory.bin");
  try {
    diagnose_run(dir);
    FAIL();
  } catch (const IncompleteRunError& e) {
    const auto expected = expected_times(c.t_end, c.controller.snapshot_stride);
    EXPECT_EQ(e.missing().size(), expected.size() - stored.size());
    EXPECT_EQ(e.missing().back(), c.t_end);
    EXPECT_NE(std::string(e.what()).find("missing frames"), std::string::npos);
  }
  EXPECT_THROW(diagnose_run(dir / "nowhere"), RunIoError);
}

TEST(Diagnose, ConstantsOverrideReachesReport) {
  auto c = small_config();
  const fs::path dir = scratch();
  simulate(c, dir);
  ProofConstants k;
  k.C2 = 3.0;
  const auto r = diagnose_run(dir, nullptr, k).report;
  EXPECT_EQ(r["constants"]["C2"], 3.0);
  EXPECT_EQ(r["eta"].get<double>(), k.eta(r["energy"]["E"].get<double>()));
}

TEST(Select, GeometricInstanceReachesFullChain) {
  json inst = {{"eta", 0.125}, {"constants", {{"C", 1.0}, {"C_tilde", 0.1}}}};
  std::vector<double> lengths;
  for (int i = 0; i < 20; ++i) lengths.push_back(std::ldexp(1.0, -i));
  inst["lengths"] = lengths;
  const auto r = select_report(parse_select_instance(inst));
  EXPECT_EQ(r["selection"]["K"], 20);
  EXPECT_EQ(r["K_oracle"], 20);
  EXPECT_TRUE(r["invariants"]["ok"].get<bool>());
}

TEST(Select, MatchesDirectCallsOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    SyntheticOptions so;
    so.J = 30;
    const auto dec = synthetic_decomposition(rng, so, ProofConstants{});
    json inst = {{"eta", dec.eta}, {"lengths", dec.lengths()}};
    std::vector<std::string> flags;
    for (auto f : dec.flags) flags.push_back(to_string(f));
    inst["flags"] = flags;
    const auto r = select_report(parse_select_instance(inst));
    if (dec.unexceptional().empty()) {
      EXPECT_TRUE(r["no_unexceptional"].get<bool>());
      continue;
    }
    const auto sel = recursive_select(dec, ProofConstants{});
    EXPECT_EQ(r["selection"]["chain"].get<std::vector<std::size_t>>(), sel.chain);
    EXPECT_EQ(r["K_oracle"], brute_force_chain(dec, sel.dist_cap));
  }
}

TEST(Select, InstanceErrorsNameTheField) {
  auto field = [](const json& j) {
    try {
      select_report(parse_select_instance(j));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<accepted>");
  };
  EXPECT_EQ(field({{"lengths", {1.0}}}), "eta");
  EXPECT_EQ(field({{"eta", 0.1}}), "lengths");
  EXPECT_EQ(field({{"eta", 0.1}, {"lengths", {1.0, -1.0}}}), "lengths");
  EXPECT_EQ(field({{"eta", 0.1}, {"intervals", {{0.0, 1.0}, {0.5, 2.0}}}}), "intervals");
  EXPECT_EQ(field({{"eta", 0.1}, {"lengths", {1.0}}, {"flags", {"odd"}}}), "flags[0]");
  EXPECT_EQ(field({{"eta", 0.1}, {"lengths", {1.0}}, {"constants", {{"Q", 1}}}}), "constants.Q");
  EXPECT_EQ(field({{"eta", 0.1}, {"lengths", {1.0}}, {"removal", "all"}}), "removal");
  EXPECT_EQ(field({{"eta", 0.1}, {"lengths", {1.0}}}), "<accepted>");
}

TEST(Bounds, ReportMatchesDirectCalls) {
  RunConfig c;
  c.bounds.E = 1.0;
  const auto r = bounds_report(c);
  EXPECT_EQ(r["eta"].get<double>(), eta_of(1.0, c.constants.C2));
  EXPECT_EQ(r["eta"].get<double>(), 0.125);
  EXPECT_EQ(r["scattering_bound"]["value"].get<double>(), scattering_bound(1.0, c.constants.C).value);
  EXPECT_EQ(r["B_ceiling"]["log"].get<double>(), exceptional_count_ceiling(1.0, c.constants).log_value);
  c.bounds.delta = 2.0;
  EXPECT_THROW(bounds_report(c), ConfigError);
}

TEST(Bounds, MonitorTrailOnRunDirectory) {
  auto c = small_config();
  const fs::path dir = scratch();
  const auto sim = simulate(c, dir);
  const auto trail = bootstrap_monitor(sim.trajectory, monitor_params(c, &sim.trajectory), c.constants);
  const std::string text = monitor_jsonl(trail);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  const auto head = json::parse(line);
  EXPECT_EQ(head["schema"], kMonitorSchema);
  EXPECT_EQ(head["steps"], sim.trajectory.size() - 1);
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    EXPECT_TRUE(json::parse(line).contains("violated"));
  }
  EXPECT_EQ(n, sim.trajectory.size() - 1);
}

TEST(Sweep, SixCellsSortedAndIndependentOfJobs) {
  auto c = small_config();
  c.t_end = 0.05;
  c.sweep.amplitudes = {1.5, 0.5, 1.0};
  c.sweep.widths = {1.0, 0.5};
  const fs::path dir = scratch();
  const auto rows = sweep(c, dir / "serial", 1);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_LT(std::make_pair(rows[i - 1].amplitude, rows[i - 1].width), std::make_pair(rows[i].amplitude, rows[i].width));
  for (const auto& r : rows) EXPECT_EQ(r.exit_code, kExitOk) << r.cell << " " << r.error;
  sweep(c, dir / "parallel", 4);
  EXPECT_EQ(read_file(dir / "serial" / "sweep.csv"), read_file(dir / "parallel" / "sweep.csv"));
  EXPECT_EQ(read_file(dir / "serial" / rows[3].cell / "densities.csv"),
            read_file(dir / "parallel" / rows[3].cell / "densities.csv"));
}

TEST(Sweep, FailingCellDoesNotAbortTheGrid) {
  auto c = small_config();
  c.t_end = 0.05;
  c.controller.blowup_ceiling = 1.2;
  c.sweep.amplitudes = {0.5, 2.0};
  const fs::path dir = scratch();
  const auto rows = sweep(c, dir, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].exit_code, kExitOk);
  EXPECT_EQ(rows[1].exit_code, kExitAbort);
  EXPECT_EQ(rows[1].status, "blowup_abort");
  EXPECT_GT(rows[0].J, 0u);
}
