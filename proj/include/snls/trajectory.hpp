// Stored solution u(t) on a time span, with per-frame scalar caches.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/functionals.hpp"
#include "snls/time_series.hpp"

namespace snls {

struct StepController {
  double dt_max = 1e-3;
  /// Bound on the nonlinear phase increment |u|_inf^6 dt per step.
  double phase_budget = 0.1;
  double snapshot_stride = 0.01;
  /// Mass fraction allowed beyond 0.9 r_max before a truncation warning.
  double boundary_mass_tol = 1e-3;
  /// Abort when |u|_inf exceeds this.
  double blowup_ceiling = 1e3;
  /// Steps smaller than this count as a rejection cascade.
  double dt_min = 1e-14;
  /// Optional cosine absorbing layer on the outer tenth of the domain.
  bool absorbing_mask = false;

  void validate() const {
    if (!(dt_max > 0.0)) throw std::invalid_argument("controller.dt_max must be positive");
    if (!(phase_budget > 0.0 && phase_budget <= 1.0)) throw std::invalid_argument("controller.phase_budget must lie in (0, 1]");
    if (!(snapshot_stride > 0.0)) throw std::invalid_argument("controller.snapshot_stride must be positive");
    if (!(boundary_mass_tol > 0.0)) throw std::invalid_argument("controller.boundary_mass_tol must be positive");
    if (!(blowup_ceiling > 0.0)) throw std::invalid_argument("controller.blowup_ceiling must be positive");
  }
};

enum class RunStatus { completed, blowup_abort, dt_underflow };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::blowup_abort: return "blowup_abort";
    case RunStatus::dt_underflow: return "dt_underflow";
  }
  return "?";
}

class MissingNormError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default cached Sobolev orders: s_c - delta, s_c, s_c + 1.
inline std::vector<double> default_norm_orders(double delta = 0.1) {
  return {kCriticalRegularity - delta, kCriticalRegularity, kCriticalRegularity + 1.0};
}

class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(RadialGrid grid, double nonlinearity, std::vector<double> sobolev_orders)
      : grid_(grid), nonlinearity_(nonlinearity), orders_(std::move(sobolev_orders)), sobolev_(orders_.size()) {
    for (double s : orders_) detail::check_order(s, "Trajectory norm set");
  }

  /// Appends a frame and fills its density caches. Times must increase.
  void append(double t, RadialField u) {
    if (!(u.grid() == grid_)) throw std::invalid_argument("Trajectory: frame grid mismatch");
    if (!times_.empty() && !(t > times_.back())) throw std::invalid_argument("Trajectory: times must increase strictly");
    const SpectralField spec = to_spectral(u);
    times_.push_back(t);
    mass_.push_back(snls::mass(u));
    const double grad = sobolev_norm(spec, 1.0);
    energy_.push_back(0.5 * grad * grad + 0.125 * nonlinearity_ * potential_integral(u));
    s_density_.push_back(snls::s_density(u));
    boundary_mass_.push_back(snls::boundary_mass(u));
    for (std::size_t k = 0; k < orders_.size(); ++k) sobolev_[k].push_back(sobolev_norm(spec, orders_[k]));
    frames_.push_back(std::move(u));
  }

  const RadialGrid& grid() const noexcept { return grid_; }
  double nonlinearity() const noexcept { return nonlinearity_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }

  std::span<const double> times() const noexcept { return times_; }
  std::span<const RadialField> frames() const noexcept { return frames_; }
  const RadialField& frame(std::size_t m) const { return frames_.at(m); }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }

  std::span<const double> mass() const noexcept { return mass_; }
  std::span<const double> energy() const noexcept { return energy_; }
  std::span<const double> s_density() const noexcept { return s_density_; }
  std::span<const double> boundary_mass() const noexcept { return boundary_mass_; }
  std::span<const double> sobolev_orders() const noexcept { return orders_; }

  bool has_sobolev(double s) const { return find_order(s).has_value(); }

  /// Cached H^s norms per frame; throws MissingNormError if s was not in the
  /// norm set the trajectory was evolved with.
  std::span<const double> sobolev(double s) const {
    const auto k = find_order(s);
    if (!k)
      throw MissingNormError("trajectory has no cached H^" + std::to_string(s) +
                             " norms; re-run evolve with that order in the norm set");
    return sobolev_[*k];
  }

  /// Index of the frame whose time is within tol of t, if any.
  std::optional<std::size_t> frame_at(double t, double tol = 1e-12) const {
    const double scale = std::max(1.0, std::abs(t));
    const auto it = std::lower_bound(times_.begin(), times_.end(), t - tol * scale);
    if (it != times_.end() && std::abs(*it - t) <= tol * scale) return std::size_t(it - times_.begin());
    return std::nullopt;
  }

  /// Index of the stored frame nearest to t.
  std::size_t nearest_frame(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0;
    if (it == times_.end()) return times_.size() - 1;
    const std::size_t m = std::size_t(it - times_.begin());
    return (t - times_[m - 1] <= times_[m] - t) ? m - 1 : m;
  }

  /// Running time integral of the L^15 density.
  CumulativeIntegral s_mass() const { return {times_, s_density_}; }

  // Run metadata.
  std::string initial_data;
  StepController controller;
  RunStatus status = RunStatus::completed;
  std::string diagnostic;
  bool boundary_breach = false;
  double boundary_breach_time = 0.0;
  std::size_t steps_taken = 0;
  std::size_t steps_rejected = 0;

 private:
  std::optional<std::size_t> find_order(double s) const {
    for (std::size_t k = 0; k < orders_.size(); ++k)
      if (std::abs(orders_[k] - s) <= 1e-12) return k;
    return std::nullopt;
  }

  RadialGrid grid_;
  double nonlinearity_ = 1.0;
  std::vector<double> orders_;
  std::vector<double> times_;
  std::vector<RadialField> frames_;
  std::vector<double> mass_, energy_, s_density_, boundary_mass_;
  std::vector<std::vector<double>> sobolev_;
};

}  // namespace snls
