// Functionals of a trajectory over a time window: localized-mass rate,
// localized Morawetz flux and the S / W / N space-time norms.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "snls/functionals.hpp"
#include "snls/time_series.hpp"
#include "snls/trajectory.hpp"

namespace snls {

/// Exponent pair (q, r) with 2/q + 3/r = 3/2.
constexpr bool schrodinger_admissible(double q, double r) {
  const double d = 2.0 / q + 3.0 / r - 1.5;
  return d < 1e-15 && d > -1e-15;
}

inline constexpr double kWExponentA = 10.0 / 3.0;  // L^{10/3}_{t,x}
inline constexpr double kWTimeB = 15.0;            // L^15_t L^{90/41}_x
inline constexpr double kWSpaceB = 90.0 / 41.0;
inline constexpr double kNExponent = 10.0 / 7.0;   // L^{10/7}_{t,x}

struct MassRate {
  double rate = 0.0;
  bool one_sided = false;
};

/// d/dt M(u(t); 0, R) by centered difference at the frame nearest t;
/// one-sided at the trajectory ends.
inline MassRate localized_mass_rate(const Trajectory& traj, double t, double R) {
  if (traj.size() < 2) throw std::invalid_argument("localized_mass_rate: need at least two frames");
  const auto times = traj.times();
  const std::size_t m = traj.nearest_frame(t);
  std::size_t lo = m == 0 ? 0 : m - 1;
  std::size_t hi = m + 1 == traj.size() ? m : m + 1;
  const double dm = localized_mass(traj.frame(hi), R) - localized_mass(traj.frame(lo), R);
  return {dm / (times[hi] - times[lo]), m == 0 || m + 1 == traj.size()};
}

namespace detail {

inline std::vector<std::size_t> frames_in(const Trajectory& traj, double a, double b) {
  std::vector<std::size_t> out;
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
  const auto times = traj.times();
  for (std::size_t m = 0; m < times.size(); ++m)
    if (times[m] >= a - tol && times[m] <= b + tol) out.push_back(m);
  return out;
}

inline void check_window(const Trajectory& traj, double a, double b, const char* what) {
  if (traj.empty()) throw std::invalid_argument(std::string(what) + ": empty trajectory");
  if (!(a < b)) throw std::invalid_argument(std::string(what) + ": need t_a < t_b");
  const double tol = 1e-12 * std::max(1.0, std::abs(b));
  if (a < traj.t_begin() - tol || b > traj.t_end() + tol)
    throw std::invalid_argument(std::string(what) + ": window outside the trajectory");
}

// Sup of the cached H^s norm over frames in [a, b]; computed on the fly when
// the order was not cached.
inline double sup_sobolev(const Trajectory& traj, double a, double b, double s) {
  double sup = 0.0;
  const auto idx = frames_in(traj, a, b);
  if (traj.has_sobolev(s)) {
    const auto h = traj.sobolev(s);
    for (auto m : idx) sup = std::max(sup, h[m]);
  } else {
    for (auto m : idx) sup = std::max(sup, sobolev_norm(traj.frame(m), s));
  }
  return sup;
}

}  // namespace detail

struct MorawetzReport {
  double t_a = 0.0, t_b = 0.0, r_cut = 0.0;
  /// int_I 4 pi int_0^{R_cut} |u|^8 r dr dt
  double flux = 0.0;
  /// |I|^{2/3} sup_I ||u||_{H^{7/6}}
  double bound = 0.0;
  double ratio() const { return bound > 0.0 ? flux / bound : 0.0; }
};

/// Localized Morawetz quantity int_I int_{|x| < R_cut} |u|^8 / |x| over [t_a, t_b].
inline MorawetzReport morawetz_flux(const Trajectory& traj, double t_a, double t_b, double r_cut) {
  detail::check_window(traj, t_a, t_b, "morawetz_flux");
  const auto& g = traj.grid();
  if (!(r_cut > 0.0) || r_cut > g.r_max() * (1.0 + 1e-12))
    throw std::invalid_argument("morawetz_flux: R_cut must lie in (0, r_max]");
  std::vector<double> density(traj.size());
  for (std::size_t m = 0; m < traj.size(); ++m) {
    const auto v = traj.frame(m).values();
    density[m] = radial_integral(g, [&](std::size_t i) {
      const double r = g.r(i);
      if (r > r_cut) return 0.0;
      const double a = std::norm(v[i]);
      return a * a * a * a / r;
    });
  }
  MorawetzReport rep{t_a, t_b, r_cut};
  rep.flux = CumulativeIntegral(traj.times(), density).between(t_a, t_b);
  rep.bound = std::pow(t_b - t_a, 2.0 / 3.0) * detail::sup_sobolev(traj, t_a, t_b, kCriticalRegularity);
  return rep;
}

/// Per-frame integrands of the space-time norms, computed once per trajectory.
struct SpaceTimeProfile {
  std::vector<double> times;
  std::vector<double> s15;       // ||u||_15^15
  std::vector<double> w_a;       // || |grad|^{7/6} u ||_{10/3}^{10/3}
  std::vector<double> w_b;       // || |grad|^{7/6} u ||_{90/41}^15
  std::vector<double> n_term;    // || |grad|^{7/6} (|u|^6 u) ||_{10/7}^{10/7}
};

inline SpaceTimeProfile space_time_profile(const Trajectory& traj) {
  SpaceTimeProfile p;
  p.times.assign(traj.times().begin(), traj.times().end());
  p.s15.assign(traj.s_density().begin(), traj.s_density().end());
  for (std::size_t m = 0; m < traj.size(); ++m) {
    const auto& u = traj.frame(m);
    const auto du = fractional_apply(u, kCriticalRegularity);
    p.w_a.push_back(std::pow(lebesgue_norm(du, kWExponentA), kWExponentA));
    p.w_b.push_back(std::pow(lebesgue_norm(du, kWSpaceB), kWTimeB));
    std::vector<cplx> f(u.values().begin(), u.values().end());
    for (auto& z : f) {
      const double a = std::norm(z);
      z *= a * a * a;
    }
    const auto dn = fractional_apply(RadialField(u.grid(), std::move(f)), kCriticalRegularity);
    p.n_term.push_back(std::pow(lebesgue_norm(dn, kNExponent), kNExponent));
  }
  return p;
}

struct NormReport {
  double t_a = 0.0, t_b = 0.0;
  double S = 0.0;
  double W = 0.0;
  double W_a = 0.0;  // L^{10/3}_{t,x} part
  double W_b = 0.0;  // L^15_t L^{90/41}_x part
  double N = 0.0;
  std::map<double, double> linf_sobolev;
  double mass = 0.0;
  double energy = 0.0;
};

/// S, W, N over [t_a, t_b], trapezoid in t through the cumulative rule.
inline NormReport space_time_norms(const Trajectory& traj, const SpaceTimeProfile& prof, double t_a, double t_b) {
  detail::check_window(traj, t_a, t_b, "space_time_norms");
  const auto idx = detail::frames_in(traj, t_a, t_b);
  if (idx.size() < 2) throw std::invalid_argument("space_time_norms: window holds fewer than two frames");
  auto integral = [&](const std::vector<double>& v) {
    return std::max(0.0, CumulativeIntegral(prof.times, v).between(t_a, t_b));
  };
  NormReport rep;
  rep.t_a = t_a;
  rep.t_b = t_b;
  rep.S = std::pow(integral(prof.s15), 1.0 / 15.0);
  rep.W_a = std::pow(integral(prof.w_a), 1.0 / kWExponentA);
  rep.W_b = std::pow(integral(prof.w_b), 1.0 / kWTimeB);
  rep.W = std::max(rep.W_a, rep.W_b);
  rep.N = std::pow(integral(prof.n_term), 1.0 / kNExponent);
  for (double s : traj.sobolev_orders()) rep.linf_sobolev[s] = detail::sup_sobolev(traj, t_a, t_b, s);
  rep.mass = traj.mass()[idx.front()];
  rep.energy = traj.energy()[idx.front()];
  return rep;
}

inline NormReport space_time_norms(const Trajectory& traj, double t_a, double t_b) {
  return space_time_norms(traj, space_time_profile(traj), t_a, t_b);
}

}  // namespace snls
