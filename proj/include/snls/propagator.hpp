// Time evolution for i u_t + Delta u = g |u|^6 u on radial fields.
//
// The linear flow is exact in sine space (multiplier e^{-i rho^2 t}); the
// nonlinear substep is the exact pointwise phase rotation. Strang splitting
// composes them with an adaptive step dt = min(dt_max, theta / |u|_inf^6).
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/functionals.hpp"
#include "snls/radial_spectral.hpp"
#include "snls/trajectory.hpp"

namespace snls {

class StepRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void free_phase_inplace(std::vector<cplx>& coeffs, const RadialGrid& g, double t) {
  if (t == 0.0) return;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const double rho = g.rho(k);
    coeffs[k] *= std::polar(1.0, -rho * rho * t);
  }
}

inline void nonlinear_phase_inplace(std::vector<cplx>& u, double dt, double g) {
  if (dt == 0.0 || g == 0.0) return;
  for (auto& z : u) {
    const double m = std::norm(z);
    z *= std::polar(1.0, -g * m * m * m * dt);
  }
}

// u -> e^{i dt Delta} u on samples, via w = r u.
inline void free_evolve_inplace(std::vector<cplx>& u, const RadialGrid& g, double t) {
  if (t == 0.0) return;
  for (std::size_t i = 0; i < u.size(); ++i) u[i] *= g.r(i);
  dst1_inplace(u);
  free_phase_inplace(u, g, t);
  dst1_inplace(u);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] /= g.r(i);
}

inline bool all_finite(const std::vector<cplx>& u) {
  for (const auto& z : u)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

inline double max_modulus(const std::vector<cplx>& u) {
  double m = 0.0;
  for (const auto& z : u) m = std::max(m, std::norm(z));
  return std::sqrt(m);
}

inline void strang_inplace(std::vector<cplx>& u, const RadialGrid& grid, double dt, double g) {
  nonlinear_phase_inplace(u, 0.5 * dt, g);
  free_evolve_inplace(u, grid, dt);
  nonlinear_phase_inplace(u, 0.5 * dt, g);
}

// cos^{1/8} taper on r > 0.9 r_max.
inline void absorbing_mask_inplace(std::vector<cplx>& u, const RadialGrid& g) {
  const double r0 = 0.9 * g.r_max();
  const double width = g.r_max() - r0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double r = g.r(i);
    if (r <= r0) continue;
    const double c = std::cos(0.5 * std::numbers::pi * (r - r0) / width);
    u[i] *= std::pow(std::max(c, 0.0), 0.125);
  }
}

}  // namespace detail

/// e^{it Delta} applied to a spectral field.
inline SpectralField free_evolve(const SpectralField& spec, double t) {
  std::vector<cplx> c(spec.coeffs().begin(), spec.coeffs().end());
  detail::free_phase_inplace(c, spec.grid(), t);
  return {spec.grid(), std::move(c)};
}

inline RadialField free_evolve(const RadialField& field, double t) {
  if (t == 0.0) return field;
  return from_spectral(free_evolve(to_spectral(field), t));
}

/// Exact solution of i u_t = g |u|^6 u over dt: u e^{-i g |u|^6 dt}.
inline RadialField nonlinear_phase(const RadialField& field, double dt, double nonlinearity = 1.0) {
  if (!std::isfinite(dt)) throw std::invalid_argument("nonlinear_phase: dt must be finite");
  std::vector<cplx> u(field.values().begin(), field.values().end());
  detail::nonlinear_phase_inplace(u, dt, nonlinearity);
  return {field.grid(), std::move(u)};
}

/// One Strang step N(dt/2) L(dt) N(dt/2). Throws StepRejected when the result
/// is not finite; the caller is expected to retry with a smaller step.
inline RadialField strang_step(const RadialField& field, double dt, double nonlinearity = 1.0) {
  if (!std::isfinite(dt)) throw std::invalid_argument("strang_step: dt must be finite");
  std::vector<cplx> u(field.values().begin(), field.values().end());
  detail::strang_inplace(u, field.grid(), dt, nonlinearity);
  if (!detail::all_finite(u)) throw StepRejected("strang_step: non-finite output, halve dt");
  return {field.grid(), std::move(u)};
}

struct EvolveOptions {
  /// Coefficient g of the nonlinearity; 0 gives the free flow.
  double nonlinearity = 1.0;
  std::vector<double> norm_orders = default_norm_orders();
  std::string initial_data;
};

namespace detail {

// Advances `traj` from its last frame to t_end. Snapshot k lands exactly on
// t_0 + k * stride (computed from the index, not accumulated), so a run
// resumed from any stored frame reproduces the uninterrupted one bit for bit.
inline void advance(Trajectory& traj, double t_end, const StepController& ctl) {
  const RadialGrid& grid = traj.grid();
  const double g = traj.nonlinearity();
  const double t0 = traj.t_begin();
  const double m0 = traj.mass().front();
  std::vector<cplx> u(traj.frames().back().values().begin(), traj.frames().back().values().end());
  double t = traj.t_end();
  std::size_t snap = traj.size() - 1;
  const double tol = 1e-12 * std::max(1.0, std::abs(t_end));

  while (t < t_end - tol) {
    double next = t0 + double(snap + 1) * ctl.snapshot_stride;
    if (next > t_end - tol) next = t_end;

    while (t < next) {
      const double umax = max_modulus(u);
      if (umax > ctl.blowup_ceiling) {
        traj.status = RunStatus::blowup_abort;
        traj.diagnostic = "blow-up guard: |u|_inf = " + std::to_string(umax) + " exceeds ceiling at t = " + std::to_string(t);
        return;
      }
      // Nonlinear phase per step is |g| |u|_inf^6 dt.
      const double u6 = std::abs(g) * std::pow(umax, 6.0);
      double dt = std::min(ctl.dt_max, ctl.phase_budget / std::max(1e-12, u6));
      bool lands = false;
      if (dt >= next - t) {
        dt = next - t;
        lands = true;
      }
      std::vector<cplx> trial;
      for (;;) {
        trial = u;
        strang_inplace(trial, grid, dt, g);
        if (all_finite(trial)) break;
        ++traj.steps_rejected;
        dt *= 0.5;
        lands = false;
        if (dt < ctl.dt_min) {
          traj.status = RunStatus::dt_underflow;
          traj.diagnostic = "step rejection cascade: dt underflow at t = " + std::to_string(t);
          return;
        }
      }
      if (ctl.absorbing_mask) absorbing_mask_inplace(trial, grid);
      u = std::move(trial);
      t = lands ? next : t + dt;
      ++traj.steps_taken;
    }

    traj.append(t, RadialField(grid, u));
    ++snap;
    if (m0 > 0.0 && !traj.boundary_breach && traj.boundary_mass().back() > ctl.boundary_mass_tol * m0) {
      traj.boundary_breach = true;
      traj.boundary_breach_time = t;
    }
  }
}

}  // namespace detail

/// Evolves u0 over [t_a, t_b], storing frames every snapshot_stride.
/// Aborts (returning the partial trajectory with status and diagnostic set)
/// on the blow-up guard or a step-rejection cascade. A boundary-mass breach
/// only sets the flag.
inline Trajectory evolve(const RadialField& u0, double t_a, double t_b, const StepController& ctl,
                         const EvolveOptions& opts = {}) {
  ctl.validate();
  if (!(t_a < t_b)) throw std::invalid_argument("evolve: need t_a < t_b");
  Trajectory traj(u0.grid(), opts.nonlinearity, opts.norm_orders);
  traj.initial_data = opts.initial_data;
  traj.controller = ctl;
  traj.append(t_a, u0);
  detail::advance(traj, t_b, ctl);
  return traj;
}

/// Continues a stored trajectory to t_end with its own controller.
inline Trajectory resume(Trajectory traj, double t_end) {
  if (traj.empty()) throw std::invalid_argument("resume: empty trajectory");
  if (traj.status != RunStatus::completed) throw std::invalid_argument("resume: trajectory was aborted");
  if (t_end > traj.t_end()) detail::advance(traj, t_end, traj.controller);
  return traj;
}

namespace detail {

inline std::size_t require_frame(const Trajectory& traj, double t, const char* what) {
  const auto m = traj.frame_at(t, 1e-9);
  if (!m) throw std::invalid_argument(std::string(what) + ": time " + std::to_string(t) + " is not a stored frame");
  return *m;
}

// Sine coefficients of g |u|^6 u at frame m.
inline std::vector<cplx> nonlinearity_coeffs(const Trajectory& traj, std::size_t m) {
  const auto& f = traj.frame(m);
  const auto& grid = traj.grid();
  std::vector<cplx> c(f.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double a = std::norm(f[i]);
    c[i] = traj.nonlinearity() * a * a * a * f[i] * grid.r(i);
  }
  dst1_inplace(c);
  return c;
}

// sum_m w_m e^{i(t - t_m) Delta} F(t_m) over frames lo..hi (trapezoid in t),
// returned as sine coefficients.
inline std::vector<cplx> duhamel_sum(const Trajectory& traj, std::size_t lo, std::size_t hi, double t) {
  const auto& grid = traj.grid();
  const auto times = traj.times();
  std::vector<cplx> acc(grid.n());
  if (traj.nonlinearity() == 0.0 || lo == hi) return acc;
  for (std::size_t m = lo; m <= hi; ++m) {
    double w = 0.0;
    if (m > lo) w += 0.5 * (times[m] - times[m - 1]);
    if (m < hi) w += 0.5 * (times[m + 1] - times[m]);
    auto c = nonlinearity_coeffs(traj, m);
    free_phase_inplace(c, grid, t - times[m]);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * c[k];
  }
  return acc;
}

}  // namespace detail

/// L^2 norm of u(t) - [e^{i(t-t0)Delta} u(t0) - i int_{t0}^t e^{i(t-s)Delta} F(s) ds],
/// the integral taken by the trapezoid rule over stored frames. t0 defaults
/// to the first frame; it may also lie after t (backward Duhamel formula).
inline double duhamel_residual(const Trajectory& traj, double t, std::optional<double> base = std::nullopt) {
  const std::size_t mt = detail::require_frame(traj, t, "duhamel_residual");
  const std::size_t mb = detail::require_frame(traj, base.value_or(traj.t_begin()), "duhamel_residual");
  const std::size_t lo = std::min(mt, mb), hi = std::max(mt, mb);
  if (hi - lo + 1 < 8) throw std::invalid_argument("duhamel_residual: need at least 8 frames between base and t");
  const auto& grid = traj.grid();
  const auto times = traj.times();

  auto rhs = to_spectral(traj.frame(mb)).take_coeffs();
  detail::free_phase_inplace(rhs, grid, times[mt] - times[mb]);
  const auto duh = detail::duhamel_sum(traj, lo, hi, times[mt]);
  // Forward: -i int_{t0}^{t}; backward (t0 > t): +i int_{t}^{t0}.
  const cplx factor = (mb <= mt) ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
  const auto ut = to_spectral(traj.frame(mt));
  double acc = 0.0;
  for (std::size_t k = 0; k < grid.n(); ++k) acc += std::norm(ut[k] - rhs[k] - factor * duh[k]);
  return std::sqrt(4.0 * std::numbers::pi * grid.dr() * acc);
}

/// v(t) = int_a^b e^{i(t-s)Delta} F(s) ds over stored frames in [a, b];
/// t must lie outside the open window.
inline RadialField duhamel_tail(const Trajectory& traj, double a, double b, double t) {
  if (!(a < b)) throw std::invalid_argument("duhamel_tail: need a < b");
  if (t > a && t < b) throw std::invalid_argument("duhamel_tail: evaluation time lies inside the window");
  const std::size_t ma = detail::require_frame(traj, a, "duhamel_tail");
  const std::size_t mb = detail::require_frame(traj, b, "duhamel_tail");
  return from_spectral(SpectralField(traj.grid(), detail::duhamel_sum(traj, ma, mb, t)));
}

/// chi_r * u for the normalized mollifier chi_r(x) = chi(x/r) / (r^3 ||chi||_1),
/// via the radial convolution kernel
///   (f * g)(r) = (2 pi / r) int f(s) s [G(r + s) - G(|r - s|)] ds,
///   G(x) = int_0^x g(rho) rho d rho.
inline RadialField average_translate(const RadialField& field, double r_avg) {
  const auto& grid = field.grid();
  if (!(r_avg > 0.0)) throw std::invalid_argument("average_translate: r_avg must be positive");
  if (!(r_avg < grid.r_max() / 4.0)) throw std::invalid_argument("average_translate: r_avg must be below r_max/4");
  const double norm = Cutoff::l1_norm();
  auto G = [&](double x) { return Cutoff::radial_moment1(x / r_avg) / (r_avg * norm); };
  const auto v = field.values();
  const long n = long(grid.n());
  const double dr = grid.dr();
  const long reach = long(std::ceil(r_avg / dr)) + 1;
  std::vector<cplx> out(grid.n());
  for (long i = 0; i < n; ++i) {
    const double r = grid.r(std::size_t(i));
    cplx acc = 0.0;
    for (long j = std::max(0L, i - reach); j <= std::min(n - 1, i + reach); ++j) {
      const double s = grid.r(std::size_t(j));
      const double k = G(r + s) - G(std::abs(r - s));
      if (k != 0.0) acc += v[std::size_t(j)] * (s * k);
    }
    out[std::size_t(i)] = acc * (2.0 * std::numbers::pi * dr / r);
  }
  return {grid, std::move(out)};
}

/// (int_{-T}^{T} ||e^{it Delta} f||_15^15 dt)^{1/15} by composite Simpson
/// with 2 * half_steps panels.
inline double free_l15_norm(const RadialField& f, double T, std::size_t half_steps = 200) {
  if (!(T > 0.0) || half_steps == 0) throw std::invalid_argument("free_l15_norm: need T > 0 and half_steps > 0");
  const SpectralField spec = to_spectral(f);
  const std::size_t panels = 2 * half_steps;
  const double h = 2.0 * T / double(panels);
  double acc = 0.0;
  for (std::size_t i = 0; i <= panels; ++i) {
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * s_density(from_spectral(free_evolve(spec, -T + double(i) * h)));
  }
  return std::pow(acc * h / 3.0, 1.0 / 15.0);
}

}  // namespace snls
