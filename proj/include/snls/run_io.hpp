// Run-directory persistence: trajectory checkpoints, density CSV, atomic
// file replacement.
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/radial_spectral.hpp"
#include "snls/trajectory.hpp"

namespace snls {

namespace fs = std::filesystem;

class RunIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `bytes` to path through a sibling temp file and a rename.
inline void write_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw RunIoError("cannot write '" + tmp.string() + "'");
    os.write(bytes.data(), std::streamsize(bytes.size()));
    os.flush();
    if (!os) throw RunIoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw RunIoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RunIoError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Snapshot times an uninterrupted run over [0, t_end] stores.
inline std::vector<double> expected_times(double t_end, double stride) {
  std::vector<double> out{0.0};
  const double tol = 1e-12 * std::max(1.0, std::abs(t_end));
  for (std::size_t k = 1;; ++k) {
    double next = 0.0 + double(k) * stride;
    if (next > t_end - tol) {
      out.push_back(t_end);
      return out;
    }
    out.push_back(next);
  }
}

namespace detail {

inline void put_string(std::ostream& os, const std::string& s) {
  put_le<std::uint64_t>(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string get_string(std::istream& is) {
  const auto len = get_le<std::uint64_t>(is);
  if (len > (1u << 24)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(std::size_t(len), '\0');
  is.read(s.data(), std::streamsize(len));
  if (!is) throw std::runtime_error("checkpoint: truncated record");
  return s;
}

}  // namespace detail

/// Full trajectory record: grid header, evolution parameters, metadata,
/// then every frame as (t, samples). Caches are rebuilt on load.
inline std::string serialize_trajectory(const Trajectory& traj) {
  std::ostringstream os(std::ios::binary);
  write_checkpoint_header(os, traj.grid());
  detail::put_le<double>(os, traj.nonlinearity());
  detail::put_le<std::uint64_t>(os, traj.sobolev_orders().size());
  for (double s : traj.sobolev_orders()) detail::put_le<double>(os, s);
  const auto& c = traj.controller;
  for (double x : {c.dt_max, c.phase_budget, c.snapshot_stride, c.boundary_mass_tol, c.blowup_ceiling, c.dt_min})
    detail::put_le<double>(os, x);
  detail::put_le<std::uint8_t>(os, c.absorbing_mask ? 1 : 0);
  detail::put_le<std::uint32_t>(os, std::uint32_t(traj.status));
  detail::put_le<std::uint8_t>(os, traj.boundary_breach ? 1 : 0);
  detail::put_le<double>(os, traj.boundary_breach_time);
  detail::put_le<std::uint64_t>(os, traj.steps_taken);
  detail::put_le<std::uint64_t>(os, traj.steps_rejected);
  detail::put_string(os, traj.initial_data);
  detail::put_string(os, traj.diagnostic);
  detail::put_le<std::uint64_t>(os, traj.size());
  for (std::size_t m = 0; m < traj.size(); ++m) {
    detail::put_le<double>(os, traj.times()[m]);
    write_samples(os, traj.frame(m).values());
  }
  return os.str();
}

inline Trajectory deserialize_trajectory(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  const RadialGrid grid = read_checkpoint_header(is);
  const double g = detail::get_le<double>(is);
  const auto n_orders = detail::get_le<std::uint64_t>(is);
  if (n_orders > 64) throw std::runtime_error("checkpoint: implausible norm set size");
  std::vector<double> orders(n_orders);
  for (auto& s : orders) s = detail::get_le<double>(is);
  Trajectory traj(grid, g, orders);
  auto& c = traj.controller;
  for (double* x : {&c.dt_max, &c.phase_budget, &c.snapshot_stride, &c.boundary_mass_tol, &c.blowup_ceiling, &c.dt_min})
    *x = detail::get_le<double>(is);
  c.absorbing_mask = detail::get_le<std::uint8_t>(is) != 0;
  const auto status = detail::get_le<std::uint32_t>(is);
  if (status > std::uint32_t(RunStatus::dt_underflow)) throw std::runtime_error("checkpoint: bad run status");
  traj.status = RunStatus(status);
  traj.boundary_breach = detail::get_le<std::uint8_t>(is) != 0;
  traj.boundary_breach_time = detail::get_le<double>(is);
  traj.steps_taken = detail::get_le<std::uint64_t>(is);
  traj.steps_rejected = detail::get_le<std::uint64_t>(is);
  traj.initial_data = detail::get_string(is);
  traj.diagnostic = detail::get_string(is);
  const auto frames = detail::get_le<std::uint64_t>(is);
  for (std::uint64_t m = 0; m < frames; ++m) {
    const double t = detail::get_le<double>(is);
    traj.append(t, RadialField(grid, read_samples(is, grid.n())));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  return traj;
}

inline void save_trajectory(const fs::path& path, const Trajectory& traj) { write_atomic(path, serialize_trajectory(traj)); }

inline Trajectory load_trajectory(const fs::path& path) {
  try {
    return deserialize_trajectory(read_file(path));
  } catch (const RunIoError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunIoError("'" + path.string() + "': " + e.what());
  }
}

inline constexpr const char* kDensityColumns = "t,mass,energy,Hsc,Hsc_md,Hsc_p1,s_density,boundary_mass";

inline std::string format_number(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

/// One row per frame; Hsc_md and Hsc_p1 are the H^{s_c - delta} and
/// H^{s_c + 1} norms of the trajectory's norm set. Shortest round-trip
/// formatting.
inline std::string densities_csv(const Trajectory& traj) {
  const auto orders = traj.sobolev_orders();
  if (orders.size() < 3) throw std::invalid_argument("densities_csv: norm set needs s_c - delta, s_c, s_c + 1");
  const auto md = traj.sobolev(orders[0]), sc = traj.sobolev(orders[1]), p1 = traj.sobolev(orders[2]);
  std::string out = std::string(kDensityColumns) + "\n";
  for (std::size_t m = 0; m < traj.size(); ++m) {
    for (double x : {traj.times()[m], traj.mass()[m], traj.energy()[m], sc[m], md[m], p1[m], traj.s_density()[m],
                     traj.boundary_mass()[m]}) {
      out += format_number(x);
      out += ',';
    }
    out.back() = '\n';
  }
  return out;
}

}  // namespace snls
