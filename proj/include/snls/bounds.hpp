// Explicit quantitative formulas: eta, the absorption inequalities, the
// scattering ceiling, the continuity-argument plans and the slow-growth
// function, plus a monitor that replays the bootstrap on a trajectory.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/constants.hpp"
#include "snls/functionals.hpp"
#include "snls/interval_engine.hpp"
#include "snls/space_time.hpp"
#include "snls/time_series.hpp"
#include "snls/trajectory.hpp"

namespace snls {

/// A positive quantity carried in log space; value saturates at DBL_MAX.
struct Saturating {
  double value = 0.0;
  double log_value = -std::numeric_limits<double>::infinity();
  bool saturated = false;

  static Saturating from_log(double lg) {
    Saturating s;
    s.log_value = lg;
    if (lg >= std::log(std::numeric_limits<double>::max())) {
      s.value = std::numeric_limits<double>::max();
      s.saturated = true;
    } else {
      s.value = std::exp(lg);
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Absorption

struct AbsorbCheck {
  double E = 0.0, C2 = 0.0, p = 0.0, eps = 0.0, C = 0.0;
  double eta = 0.0;

  /// E eta^p < eps; sufficient C2 > max(1/p, eps^{-1/p}).
  double small_lhs = 0.0;
  bool small_holds = false;
  double small_c2_threshold = 0.0;
  bool small_holds_at_threshold = false;

  /// eta^C E^{-p} >= eta^{C'} with C' = C + p/C2.
  double C_prime = 0.0;
  bool lower_holds = false;

  /// E^p eta^{-C} <= eta^{-C-eps}; sufficient C2 > max(1, p/eps).
  bool upper_holds = false;
  double upper_c2_threshold = 0.0;
  bool upper_holds_at_threshold = false;
};

namespace detail {

// Strict thresholds are probed just above their infimum.
inline double above(double threshold) { return threshold * (1.0 + 1e-6) + 1e-12; }

inline bool small_ineq(double E, double C2, double p, double eps) {
  return E * std::pow(eta_of(E, C2), p) < eps;
}

inline bool upper_ineq(double E, double C2, double p, double C, double eps) {
  // Compared in logs: p log E - C log eta <= -(C + eps) log eta.
  const double le = std::log(eta_of(E, C2));
  if (E == 0.0) return true;
  return p * std::log(E) - C * le <= -(C + eps) * le * (1.0 + 1e-14) + 1e-14;
}

}  // namespace detail

inline AbsorbCheck absorb_check(double E, double C2, double p, double eps, double C = 2.0) {
  if (!(p > 0.0) || !(eps > 0.0)) throw std::invalid_argument("absorb_check: p and eps must be positive");
  if (!(C > 0.0)) throw std::invalid_argument("absorb_check: C must be positive");
  AbsorbCheck r;
  r.E = E, r.C2 = C2, r.p = p, r.eps = eps, r.C = C;
  r.eta = eta_of(E, C2);

  r.small_lhs = E * std::pow(r.eta, p);
  r.small_holds = r.small_lhs < eps;
  r.small_c2_threshold = std::max({1.0, 1.0 / p, std::isinf(eps) ? 0.0 : std::pow(eps, -1.0 / p)});
  r.small_holds_at_threshold = detail::small_ineq(E, detail::above(r.small_c2_threshold), p, eps);

  r.C_prime = C + p / C2;
  r.lower_holds = E == 0.0 || C * std::log(r.eta) - p * std::log(E) >= r.C_prime * std::log(r.eta) - 1e-14 * r.C_prime * std::abs(std::log(r.eta));

  r.upper_holds = std::isinf(eps) || detail::upper_ineq(E, C2, p, C, eps);
  r.upper_c2_threshold = std::isinf(eps) ? 1.0 : std::max(1.0, p / eps);
  r.upper_holds_at_threshold = std::isinf(eps) || detail::upper_ineq(E, detail::above(r.upper_c2_threshold), p, C, eps);
  return r;
}

// ---------------------------------------------------------------------------
// Ceilings

/// C exp(C E^C).
inline Saturating scattering_bound(double E, double C) {
  if (!(E >= 0.0)) throw std::invalid_argument("scattering_bound: E must be nonnegative");
  if (!(C >= 1.0)) throw std::invalid_argument("scattering_bound: C must be at least 1");
  return Saturating::from_log(std::log(C) + C * std::pow(E, C));
}

/// Remark ceiling C E^15 / eta^{C1}.
inline Saturating exceptional_count_ceiling(double E, const ProofConstants& k) {
  const double eta = k.eta(E);
  if (E == 0.0) return {};
  return Saturating::from_log(std::log(k.C) + 15.0 * std::log(E) - k.C1 * std::log(eta));
}

/// log(2 J eta) for J = exp(C eta^{-C}), together with a constant C_hat such
/// that log(2 J eta) <= log 2 + C_hat E^{C_hat} for every E >= 1.
struct CountShape {
  double log_two_J_eta = 0.0;
  double C_hat = 0.0;
  double log_shape = 0.0;  // log 2 + C_hat E^{C_hat}
  bool within_shape = false;
};

inline CountShape count_shape(double E, const ProofConstants& k) {
  if (!(E >= 1.0)) throw std::invalid_argument("count_shape: E must be at least 1");
  const double eta = k.eta(E);
  CountShape s;
  s.log_two_J_eta = std::log(2.0 * eta) + k.C * std::pow(eta, -k.C);
  // eta^{-C} = C2^C (1 + E)^{C C2} <= C2^C 2^{C C2} E^{C C2} for E >= 1.
  s.C_hat = std::max(k.C * std::pow(k.C2, k.C) * std::pow(2.0, k.C * k.C2), k.C * k.C2);
  s.log_shape = std::log(2.0) + s.C_hat * std::pow(E, s.C_hat);
  s.within_shape = s.log_two_J_eta <= s.log_shape;
  return s;
}

// ---------------------------------------------------------------------------
// Continuity-argument plans

struct BootstrapPlan {
  double M = 0.0, E0 = 0.0, delta = 0.0;
  /// Interpolation exponent: delta for the s_c + 1 plan, delta / eps_reg when relaxed.
  double theta = 0.0;
  double eps_reg = 1.0;
  /// (4 C~)^{-1}
  double eps = 0.0;
  Saturating R0;
  double delta0 = 0.0;
  /// (C/eps) exp(C E0^C (2 R0)^{C theta})
  Saturating m_ceiling;
  /// 4 C' (2 C~)^{m} M with m the ceiling
  Saturating S_ceiling;
  /// C exp(C E0^C (2 R0)^{C theta}), the L^15 ceiling along the argument
  Saturating bound;
  /// C exp(C (E M^delta)^C)
  Saturating theorem_shape;
  bool closes = false;
  std::string failure;
};

namespace detail {

inline BootstrapPlan plan(double M, double E0, double delta, double eps_reg, const ProofConstants& k) {
  k.validate();
  if (!(M > 0.0)) throw std::invalid_argument("bootstrap plan: M must be positive");
  if (!(E0 >= 1.0)) throw std::invalid_argument("bootstrap plan: E0 must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bootstrap plan: delta must lie in (0, 1)");
  if (!(eps_reg > 0.0 && eps_reg <= 1.0)) throw std::invalid_argument("bootstrap plan: eps_reg must lie in (0, 1]");
  BootstrapPlan p;
  p.M = M, p.E0 = E0, p.delta = delta, p.eps_reg = eps_reg;
  p.theta = delta / eps_reg;
  p.eps = 1.0 / (4.0 * k.C_tilde);
  const double CE = k.C * std::pow(E0, k.C);
  const double log_2Ct = std::log(2.0 * k.C_tilde);

  p.R0 = Saturating::from_log(std::log(4.0 * k.C_prime * M) + (k.C / p.eps) * std::exp(2.0 * CE) * log_2Ct);
  const double log_2R0 = std::log(2.0) + p.R0.log_value;
  p.delta0 = std::log(2.0) / (k.C * log_2R0);
  p.theorem_shape = Saturating::from_log(std::log(k.C) + k.C * std::pow(E0 * std::pow(M, delta), k.C));

  if (!(p.theta < 1.0)) {
    p.failure = "interpolation exponent delta/eps_reg = " + std::to_string(p.theta) + " is not below 1";
    return p;
  }
  const double growth = std::exp(k.C * p.theta * log_2R0);  // (2 R0)^{C theta}
  p.m_ceiling = Saturating::from_log(std::log(k.C / p.eps) + CE * growth);
  p.S_ceiling = Saturating::from_log(std::log(4.0 * k.C_prime * M) + p.m_ceiling.value * log_2Ct);
  if (p.m_ceiling.saturated) p.S_ceiling = Saturating::from_log(std::numeric_limits<double>::infinity());
  p.bound = Saturating::from_log(std::log(k.C) + CE * growth);
  p.closes = p.S_ceiling.log_value <= p.R0.log_value * (1.0 + 1e-15);
  if (!p.closes)
    p.failure = "bootstrap does not close: (2 R0)^{C theta} = " + std::to_string(growth) + " exceeds 2 (theta >= delta0)";
  return p;
}

}  // namespace detail

/// R0 from the displayed choice, delta0 from (2 R0)^{C delta0} = 2, the m
/// ceiling and the closure test 4 C' (2 C~)^m M <= R0.
inline BootstrapPlan theorem1_plan(double M, double E0, double delta, const ProofConstants& k) {
  return detail::plan(M, E0, delta, 1.0, k);
}

/// Same pipeline with the interpolation exponent theta = delta / eps_reg.
inline BootstrapPlan relaxed_regularity_plan(double M, double E, double delta, double eps_reg, const ProofConstants& k) {
  return detail::plan(M, E, delta, eps_reg, k);
}

/// theta solving s_c = (1 - theta)(s_c - delta) + theta (s_c + eps_reg - delta).
inline double interpolation_theta(double delta, double eps_reg) { return delta / eps_reg; }

/// g(t) = [C^{-1} log(log^{1/2} t)]^{1/C}, t > e.
inline double slow_growth_g(double t, double C) {
  if (!(t > std::numbers::e)) throw std::invalid_argument("slow_growth_g: t must exceed e");
  if (!(C > 0.0)) throw std::invalid_argument("slow_growth_g: C must be positive");
  return std::pow(std::log(std::sqrt(std::log(t))) / C, 1.0 / C);
}

struct M0Solution {
  Saturating M0;
  /// The domain floor max(2 u0, 1/2) already satisfies the inequality.
  bool at_floor = false;
  /// RHS - LHS of 2 C C~ log^{1/2}(2 M0) <= log(M0 / (3 C' u0)) / log(2C) at M0.
  double slack = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

// Slack of the M0 inequality at x = log M0.
inline double m0_slack(double x, double log_u0, const ProofConstants& k) {
  const double lhs = 2.0 * k.C * k.C_tilde * std::sqrt(std::max(0.0, std::log(2.0) + x));
  const double rhs = (x - std::log(3.0 * k.C_prime) - log_u0) / std::log(2.0 * k.C);
  return rhs - lhs;
}

}  // namespace detail

/// Smallest M0 >= max(2 u0, 1/2) with 2 C C~ log^{1/2}(2 M0) <= log(M0 / (3 C' u0)) / log(2C),
/// by bisection on log M0 to width 1e-10. The floor 1/2 keeps log(2 M0) >= 0.
inline M0Solution m0_solve(double u0_norm, const ProofConstants& k) {
  k.validate();
  if (!(u0_norm > 0.0)) throw std::invalid_argument("m0_solve: u0_norm must be positive");
  if (!(2.0 * k.C > 1.0)) throw std::invalid_argument("m0_solve: need 2C > 1");
  const double lu = std::log(u0_norm);
  double lo = std::max(std::log(2.0) + lu, std::log(0.5));
  M0Solution s;
  if (detail::m0_slack(lo, lu, k) >= 0.0) {
    s.M0 = Saturating::from_log(lo);
    s.slack = detail::m0_slack(lo, lu, k);
    s.at_floor = true;
    return s;
  }
  double step = 1.0, hi = lo + step;
  while (detail::m0_slack(hi, lu, k) < 0.0) {
    lo = hi;
    step *= 2.0;
    hi = lo + step;
    if (step > 1e300) throw std::runtime_error("m0_solve: bracket expansion failed");
  }
  while (hi - lo > std::max(1e-10, 8.0 * std::numeric_limits<double>::epsilon() * std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    (detail::m0_slack(mid, lu, k) >= 0.0 ? hi : lo) = mid;
    ++s.iterations;
  }
  s.M0 = Saturating::from_log(hi);
  s.slack = detail::m0_slack(hi, lu, k);
  return s;
}

// ---------------------------------------------------------------------------
// Aggregate report

struct BoundReport {
  double E = 0.0, M = 0.0, delta = 0.0, u0_norm = 0.0;
  ProofConstants constants;
  double eta = 0.0;
  Saturating B_ceiling;
  Saturating scattering;
  CountShape count;
  BootstrapPlan plan;
  M0Solution m0;
  /// g at 2 M0 and the composition C exp(C g^C) against C log^{1/2}(2 M0)
  double g_at_2M0 = 0.0;
  double g_composition_log_rel_err = 0.0;
};

inline BoundReport bound_report(double E, double M, double delta, double u0_norm, const ProofConstants& k) {
  BoundReport r;
  r.E = E, r.M = M, r.delta = delta, r.u0_norm = u0_norm, r.constants = k;
  r.eta = k.eta(E);
  r.B_ceiling = exceptional_count_ceiling(E, k);
  r.scattering = scattering_bound(E, k.C);
  r.count = count_shape(std::max(E, 1.0), k);
  r.plan = theorem1_plan(M, std::max(E, 1.0), delta, k);
  r.m0 = m0_solve(u0_norm, k);
  // g(2 M0) from log(2 M0) directly so saturated M0 still evaluates.
  const double log_2M0 = std::log(2.0) + r.m0.M0.log_value;
  if (log_2M0 > 1.0) {
    r.g_at_2M0 = std::pow(std::log(std::sqrt(log_2M0)) / k.C, 1.0 / k.C);
    const double lhs = std::log(k.C) + k.C * std::pow(r.g_at_2M0, k.C);
    const double rhs = std::log(k.C) + std::log(std::sqrt(log_2M0));
    r.g_composition_log_rel_err = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bootstrap monitor

enum class BootstrapMode { theorem1, corollary };

struct MonitorParams {
  BootstrapMode mode = BootstrapMode::theorem1;
  /// theorem1: ceiling R0, regularity gap delta, a-priori E0.
  double R0 = 0.0, delta = 0.1, E0 = 1.0;
  /// corollary: ceiling M0.
  double M0 = 0.0;
};

struct MonitorStep {
  double T = 0.0;
  /// S(u, [0, T]) or T(u, [0, T])
  double norm = 0.0;
  double ceiling = 0.0;
  /// theorem1: sup ||u||_{H^{s_c}} against the interpolation bound E0^{1-delta} (2R0)^delta
  /// corollary: sup ||u||_{H^{s_c}} against g(||u||_{L^15}) (NaN when the L^15 norm is at most e)
  double interp_lhs = 0.0, interp_rhs = 0.0;
  /// pointwise Hoelder ratio ||u||_{s_c} / (||u||_{s_c-delta}^{1-delta} ||u||_{s_c+1-delta}^delta) (theorem1)
  double holder_ratio = 0.0;
  double apriori = 0.0;  // sup ||u||_{H^{s_c - delta}} (theorem1)
  std::size_t m = 0;
  double m_ceiling = 0.0;
  /// max over completed intervals of S(u, I_j) / S(u, I_{j-1})
  double max_doubling = 0.0;
  std::string violated;  // first violated link at this step, empty if none
};

struct MonitorTrail {
  MonitorParams params;
  ProofConstants constants;
  double eps = 0.0;
  std::vector<MonitorStep> steps;
  std::vector<double> doubling_ratios;
  std::optional<std::size_t> first_violation;
  bool passed() const { return !first_violation.has_value(); }
};

/// Replays the continuity argument over the frame times of a trajectory.
inline MonitorTrail bootstrap_monitor(const Trajectory& traj, const MonitorParams& params, const ProofConstants& k) {
  k.validate();
  if (traj.size() < 2) throw std::invalid_argument("bootstrap_monitor: need at least two frames");
  const double s1 = kCriticalRegularity + 1.0;
  const bool thm = params.mode == BootstrapMode::theorem1;
  if (thm && !traj.has_sobolev(s1))
    throw MissingNormError("bootstrap_monitor: H^{s_c+1} norms are not cached; re-run evolve with norm order " +
                           std::to_string(s1) + " in the norm set");
  if (thm && !(params.R0 > 0.0 && params.delta > 0.0 && params.delta < 1.0 && params.E0 > 0.0))
    throw std::invalid_argument("bootstrap_monitor: theorem1 needs R0 > 0, delta in (0, 1), E0 > 0");
  if (!thm && !(params.M0 > 0.0)) throw std::invalid_argument("bootstrap_monitor: corollary needs M0 > 0");

  MonitorTrail trail;
  trail.params = params;
  trail.constants = k;
  trail.eps = thm ? 1.0 / (4.0 * k.C_tilde) : 1.0 / (2.0 * k.C_tilde);

  const std::size_t F = traj.size();
  const auto times = traj.times();
  std::vector<double> h(F), h1(F, 0.0), hm(F, 0.0), hp(F, 0.0), w(F), w1(F, 0.0);
  const auto s15 = traj.s_density();
  for (std::size_t m = 0; m < F; ++m) {
    const auto& u = traj.frame(m);
    const auto spec = to_spectral(u);
    h[m] = sobolev_norm(spec, kCriticalRegularity);
    w[m] = std::pow(lebesgue_norm(from_spectral(fractional_apply(spec, kCriticalRegularity)), kWExponentA), kWExponentA);
    if (thm) {
      h1[m] = traj.sobolev(s1)[m];
      hm[m] = sobolev_norm(spec, kCriticalRegularity - params.delta);
      hp[m] = sobolev_norm(spec, s1 - params.delta);
      w1[m] = std::pow(lebesgue_norm(from_spectral(fractional_apply(spec, s1)), kWExponentA), kWExponentA);
    }
  }
  const CumulativeIntegral c15(times, std::vector<double>(s15.begin(), s15.end())), cw(times, w), cw1(times, w1);

  auto sup_on = [&](const std::vector<double>& v, double a, double b) {
    auto idx = detail::frames_in(traj, a, b);
    idx.push_back(traj.nearest_frame(a));
    idx.push_back(traj.nearest_frame(b));
    double s = 0.0;
    for (auto m : idx) s = std::max(s, v[m]);
    return s;
  };
  auto norm_on = [&](double a, double b) {
    double S = sup_on(h, a, b) + std::pow(std::max(0.0, c15.between(a, b)), 1.0 / 15.0) +
               std::pow(std::max(0.0, cw.between(a, b)), 0.3);
    if (thm) S += sup_on(h1, a, b) + std::pow(std::max(0.0, cw1.between(a, b)), 0.3);
    return S;
  };

  // Intervals with ||u||_{L^15}^6 = eps, cut once; prefixes give the partition of [0, T].
  const double cut_mass = std::pow(trail.eps, 15.0 / 6.0);
  const auto cuts = partition_by_eta(times, std::vector<double>(s15.begin(), s15.end()), cut_mass);
  std::vector<double> ends;
  for (std::size_t j = 0; j < cuts.size(); ++j)
    if (cuts.flags[j] != IntervalFlag::tail) ends.push_back(cuts.intervals[j].t1);
  std::vector<double> piece_norm;
  for (std::size_t j = 0; j < ends.size(); ++j) piece_norm.push_back(norm_on(j == 0 ? times[0] : ends[j - 1], ends[j]));
  for (std::size_t j = 1; j < piece_norm.size(); ++j)
    trail.doubling_ratios.push_back(piece_norm[j - 1] > 0.0 ? piece_norm[j] / piece_norm[j - 1] : 0.0);

  const double m_ceiling =
      thm ? (k.C / trail.eps) * std::exp(k.C * std::pow(params.E0, k.C) * std::pow(2.0 * params.R0, k.C * params.delta))
          : (k.C / trail.eps) * std::sqrt(std::log(2.0 * params.M0));

  double sup_h = 0.0, sup_hm = 0.0, sup_hp = 0.0, worst_holder = 0.0;
  std::size_t completed = 0;
  double max_doubling = 0.0;
  for (std::size_t m = 1; m < F; ++m) {
    MonitorStep st;
    st.T = times[m];
    st.norm = norm_on(times[0], st.T);
    st.ceiling = thm ? params.R0 : params.M0;
    for (std::size_t q = (m == 1 ? 0 : m); q <= m; ++q) {
      sup_h = std::max(sup_h, h[q]);
      if (thm) {
        sup_hm = std::max(sup_hm, hm[q]);
        sup_hp = std::max(sup_hp, hp[q]);
        const double den = std::pow(hm[q], 1.0 - params.delta) * std::pow(hp[q], params.delta);
        if (den > 0.0) worst_holder = std::max(worst_holder, h[q] / den);
      }
    }
    while (completed < ends.size() && ends[completed] <= st.T + 1e-12) {
      if (completed > 0) max_doubling = std::max(max_doubling, trail.doubling_ratios[completed - 1]);
      ++completed;
    }
    const double last_end = completed ? ends[completed - 1] : times[0];
    st.m = completed + (last_end < st.T - 1e-12 ? 1 : 0);
    st.m_ceiling = m_ceiling;
    st.max_doubling = max_doubling;
    st.interp_lhs = sup_h;
    if (thm) {
      st.apriori = sup_hm;
      st.holder_ratio = worst_holder;
      st.interp_rhs = std::pow(params.E0, 1.0 - params.delta) * std::pow(2.0 * params.R0, params.delta);
    } else {
      const double l15 = std::pow(std::max(0.0, c15.between(times[0], st.T)), 1.0 / 15.0);
      st.interp_rhs = l15 > std::numbers::e ? slow_growth_g(l15, k.C) : std::numeric_limits<double>::quiet_NaN();
    }

    if (thm && st.apriori > params.E0) st.violated = "apriori";
    else if (st.norm > st.ceiling) st.violated = "ceiling";
    else if (thm && st.holder_ratio > 1.0 + 1e-12) st.violated = "holder";
    else if (thm && st.interp_lhs > st.interp_rhs) st.violated = "interpolation";
    else if (!thm && !std::isnan(st.interp_rhs) && st.interp_lhs > st.interp_rhs) st.violated = "growth";
    else if (double(st.m) > st.m_ceiling) st.violated = "partition_count";
    else if (st.max_doubling > 2.0 * k.C_tilde) st.violated = "doubling";
    if (!st.violated.empty() && !trail.first_violation) trail.first_violation = trail.steps.size();
    trail.steps.push_back(st);
  }
  return trail;
}

}  // namespace snls
