// Interval combinatorics over the L^15 space-time mass: eta-partition,
// exceptional classification, concentration certificates, the recursive
// dyadic-chain selection and its brute-force oracle, and the mass
// bracketing audit at the selected time.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snls/constants.hpp"
#include "snls/functionals.hpp"
#include "snls/propagator.hpp"
#include "snls/space_time.hpp"
#include "snls/time_series.hpp"
#include "snls/trajectory.hpp"

namespace snls {

enum class IntervalFlag { unexceptional, exceptional, tail };

inline std::string to_string(IntervalFlag f) {
  switch (f) {
    case IntervalFlag::unexceptional: return "unexceptional";
    case IntervalFlag::exceptional: return "exceptional";
    case IntervalFlag::tail: return "tail";
  }
  return "?";
}

struct TimeInterval {
  double t0 = 0.0, t1 = 0.0;
  double length() const { return t1 - t0; }
  double midpoint() const { return 0.5 * (t0 + t1); }
  /// Distance from t to the closed interval.
  double distance(double t) const { return t < t0 ? t0 - t : (t > t1 ? t - t1 : 0.0); }
};

struct IntervalDecomposition {
  double eta = 0.0;
  double total_mass = 0.0;
  std::vector<TimeInterval> intervals;
  std::vector<double> masses;
  std::vector<IntervalFlag> flags;
  /// L^15 masses of the endpoint free flows per interval (filled by classify).
  std::vector<double> minus_masses, plus_masses;
  double threshold = 0.0;  // eta^{C1} used by classify

  std::size_t size() const { return intervals.size(); }
  bool has_tail() const { return !flags.empty() && flags.back() == IntervalFlag::tail; }
  std::size_t count(IntervalFlag f) const { return std::size_t(std::count(flags.begin(), flags.end(), f)); }
  std::vector<double> lengths() const {
    std::vector<double> out;
    for (const auto& I : intervals) out.push_back(I.length());
    return out;
  }
  std::vector<std::size_t> unexceptional() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < flags.size(); ++j)
      if (flags[j] == IntervalFlag::unexceptional) out.push_back(j);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Partition

/// Greedy left-to-right cuts where the running integral of the density
/// reaches multiples of eta. Every full interval carries mass eta (to
/// roundoff); a remainder below eta becomes one flagged tail interval.
inline IntervalDecomposition partition_by_eta(std::span<const double> times, std::span<const double> density,
                                              double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("partition_by_eta: eta must be positive");
  if (times.size() < 2) throw std::invalid_argument("partition_by_eta: need at least two samples");
  for (double d : density)
    if (!(d >= 0.0)) throw std::invalid_argument("partition_by_eta: density must be nonnegative");
  const CumulativeIntegral cum(times, density);
  IntervalDecomposition dec;
  dec.eta = eta;
  dec.total_mass = cum.total();

  double start = cum.t_begin();
  std::size_t k = 0;
  while (cum.total() - double(k) * eta >= eta * (1.0 - 1e-12)) {
    ++k;
    double end = cum.first_reaching(double(k) * eta);
    // Mass exhausted up to roundoff: the last full interval runs to the end.
    if (cum.total() - double(k) * eta <= 1e-12 * eta) end = cum.t_end();
    if (!(end > start)) continue;
    dec.intervals.push_back({start, end});
    dec.masses.push_back(cum.between(start, end));
    dec.flags.push_back(IntervalFlag::unexceptional);
    start = end;
  }
  if (start < cum.t_end()) {
    dec.intervals.push_back({start, cum.t_end()});
    dec.masses.push_back(cum.between(start, cum.t_end()));
    dec.flags.push_back(IntervalFlag::tail);
  }
  return dec;
}

inline IntervalDecomposition partition_by_eta(const Trajectory& traj, double eta) {
  return partition_by_eta(traj.times(), traj.s_density(), eta);
}

// ---------------------------------------------------------------------------
// Classification

/// Flags interval j exceptional when either endpoint free flow
/// u_-(t) = e^{i(t - t_-)Delta} u(t_-), u_+(t) = e^{i(t - t_+)Delta} u(t_+)
/// carries more than eta^{C1} of L^15 mass on it. The tail keeps its flag.
inline IntervalDecomposition classify(IntervalDecomposition dec, const Trajectory& traj, const ProofConstants& k) {
  k.validate();
  if (dec.intervals.empty()) throw std::invalid_argument("classify: empty decomposition");
  const double t_minus = dec.intervals.front().t0, t_plus = dec.intervals.back().t1;
  const auto m_minus = traj.frame_at(t_minus, 1e-9);
  const auto m_plus = traj.frame_at(t_plus, 1e-9);
  if (!m_minus || !m_plus) {
    std::string missing;
    if (!m_minus) missing += " t_- = " + std::to_string(t_minus);
    if (!m_plus) missing += " t_+ = " + std::to_string(t_plus);
    throw std::invalid_argument("classify: endpoint frames missing:" + missing);
  }
  const auto times = traj.times();
  const auto spec_minus = to_spectral(traj.frame(*m_minus));
  const auto spec_plus = to_spectral(traj.frame(*m_plus));
  std::vector<double> d_minus(times.size()), d_plus(times.size());
  for (std::size_t m = 0; m < times.size(); ++m) {
    d_minus[m] = s_density(from_spectral(free_evolve(spec_minus, times[m] - times[*m_minus])));
    d_plus[m] = s_density(from_spectral(free_evolve(spec_plus, times[m] - times[*m_plus])));
  }
  const CumulativeIntegral c_minus(times, d_minus), c_plus(times, d_plus);
  dec.threshold = std::pow(dec.eta, k.C1);
  dec.minus_masses.assign(dec.size(), 0.0);
  dec.plus_masses.assign(dec.size(), 0.0);
  for (std::size_t j = 0; j < dec.size(); ++j) {
    const auto& I = dec.intervals[j];
    dec.minus_masses[j] = c_minus.between(I.t0, I.t1);
    dec.plus_masses[j] = c_plus.between(I.t0, I.t1);
    if (dec.flags[j] == IntervalFlag::tail) continue;
    dec.flags[j] = std::max(dec.minus_masses[j], dec.plus_masses[j]) > dec.threshold ? IntervalFlag::exceptional
                                                                                     : IntervalFlag::unexceptional;
  }
  return dec;
}

// ---------------------------------------------------------------------------
// Concentration certificates

struct ConcentrationCertificate {
  std::size_t index = 0;
  double radius = 0.0;
  double min_ratio = 0.0;
  double min_ratio_time = 0.0;
  std::size_t samples = 0;
  bool resolvable = true;
};

struct ScanOptions {
  /// Radius R_j = radius_factor |I_j|^{1/2}; defaults to C eta^{-C}.
  std::optional<double> radius_factor;
  /// Also certify exceptional intervals (the tail is never scanned).
  bool include_exceptional = false;
};

/// For each unexceptional interval j: min over stored frames in I_j of
/// M(u(t); 0, R_j) / (eta^C |I_j|^{7/12}). Radii beyond r_max or below two
/// grid spacings are reported unresolvable.
inline std::vector<ConcentrationCertificate> concentration_scan(const Trajectory& traj, const IntervalDecomposition& dec,
                                                                 const ProofConstants& k, const ScanOptions& opts = {}) {
  const double eta = dec.eta;
  const double factor = opts.radius_factor.value_or(k.C * std::pow(eta, -k.C));
  std::vector<std::size_t> scanned;
  for (std::size_t j = 0; j < dec.size(); ++j)
    if (dec.flags[j] == IntervalFlag::unexceptional || (opts.include_exceptional && dec.flags[j] == IntervalFlag::exceptional))
      scanned.push_back(j);
  std::vector<ConcentrationCertificate> out;
  for (std::size_t j : scanned) {
    const auto& I = dec.intervals[j];
    ConcentrationCertificate cert;
    cert.index = j;
    cert.radius = factor * std::sqrt(I.length());
    if (cert.radius > traj.grid().r_max() || cert.radius < 2.0 * traj.grid().dr()) {
      cert.resolvable = false;
      out.push_back(cert);
      continue;
    }
    const double scale = std::pow(eta, k.C) * std::pow(I.length(), 7.0 / 12.0);
    std::vector<std::size_t> frames = detail::frames_in(traj, I.t0, I.t1);
    if (frames.empty()) frames.push_back(traj.nearest_frame(I.midpoint()));
    cert.min_ratio = std::numeric_limits<double>::infinity();
    for (auto m : frames) {
      const double ratio = localized_mass(traj.frame(m), cert.radius) / scale;
      if (ratio < cert.min_ratio) {
        cert.min_ratio = ratio;
        cert.min_ratio_time = traj.times()[m];
      }
    }
    cert.samples = frames.size();
    out.push_back(cert);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Selection

struct LongInterval {
  std::size_t index = 0;
  double length = 0.0;
  double span = 0.0;
  /// |I_{j*}| / span
  double ratio = 0.0;
  /// |I_{j*}| >= c eta^{3 C1 / 2} span
  bool meets_bound = false;
};

/// argmax of |I_j| over j in [j_a, j_b] (leftmost on ties).
inline LongInterval select_long_interval(std::span<const TimeInterval> intervals, std::size_t j_a, std::size_t j_b,
                                         double eta, const ProofConstants& k) {
  if (j_a > j_b || j_b >= intervals.size()) throw std::invalid_argument("select_long_interval: empty or invalid range");
  LongInterval r;
  r.index = j_a;
  for (std::size_t j = j_a; j <= j_b; ++j)
    if (intervals[j].length() > intervals[r.index].length()) r.index = j;
  r.length = intervals[r.index].length();
  r.span = intervals[j_b].t1 - intervals[j_a].t0;
  r.ratio = r.span > 0.0 ? r.length / r.span : 1.0;
  r.meets_bound = r.length >= k.c * std::pow(eta, 1.5 * k.C1) * r.span;
  return r;
}

enum class RemovalRange {
  /// Remove j_k and every longer-than-half interval across the whole current window.
  whole_window,
  /// Remove them only from the window start up to j_k; runs that still hold a
  /// longer-than-half interval are then ineligible.
  left_of_pick,
};

struct SelectionOptions {
  RemovalRange removal = RemovalRange::whole_window;
};

struct SelectionResult {
  double t_star = 0.0;
  std::vector<std::size_t> chain;
  std::size_t K = 0;
  std::vector<double> dist_ratios;
  double dist_cap = 0.0;
  /// The first run held at least (4C)^{-1} eta^{C1/2} J' elements.
  bool first_run_meets_threshold = false;
  /// K >= c eta^C log J'.
  bool meets_log_bound = false;
  /// Chain links dropped to respect the distance cap.
  std::size_t truncated_links = 0;
  std::size_t iterations = 0;
};

namespace detail {

struct Run {
  std::size_t first = 0, last = 0;  // indices into the decomposition
  std::size_t count = 0;
};

// Maximal runs of consecutive decomposition indices that are present in `alive`.
inline std::vector<Run> runs_of(const std::vector<char>& alive) {
  std::vector<Run> out;
  for (std::size_t j = 0; j < alive.size();) {
    if (!alive[j]) {
      ++j;
      continue;
    }
    Run r{j, j, 0};
    while (j < alive.size() && alive[j]) r.last = j++, ++r.count;
    out.push_back(r);
  }
  return out;
}

inline std::vector<double> chain_ratios(std::span<const TimeInterval> I, std::span<const std::size_t> chain, double t) {
  std::vector<double> out;
  for (auto j : chain) out.push_back(I[j].distance(t) / I[j].length());
  return out;
}

}  // namespace detail

/// Iterative dyadic-chain selection over the unexceptional intervals.
///
/// Step 0 takes the longest maximal run of consecutive unexceptional
/// intervals and its longest member j_1. While the current run spans more
/// than C~ eta^{-C} indices, j_k and every interval longer than |I_{j_k}|/2
/// are removed, and the longest remaining run inside the current one
/// supplies j_{k+1}. t_* is the
/// midpoint of the last pick; the chain is cut to its longest prefix whose
/// distance ratios all stay within C eta^{-C} of that prefix's t_*.
inline SelectionResult recursive_select(const IntervalDecomposition& dec, const ProofConstants& k,
                                        const SelectionOptions& opts = {}) {
  k.validate();
  const auto G = dec.unexceptional();
  if (G.empty()) throw std::invalid_argument("recursive_select: no unexceptional intervals");
  const double eta = dec.eta;
  const std::span<const TimeInterval> I(dec.intervals);
  const double window_cap = k.C_tilde * std::pow(eta, -k.C);
  SelectionResult res;
  res.dist_cap = k.C * std::pow(eta, -k.C);

  std::vector<char> alive(dec.size(), 0);
  for (auto j : G) alive[j] = 1;
  // Later runs are drawn from inside the previous run only.
  std::size_t lo = 0, hi = dec.size() - 1;

  std::vector<std::size_t> picks;
  std::optional<double> half_cap;  // lengths above this are ineligible (left_of_pick reading)
  for (bool first = true;; first = false) {
    auto runs = detail::runs_of(alive);
    std::erase_if(runs, [&](const detail::Run& r) { return r.first < lo || r.last > hi; });
    if (half_cap) {
      std::erase_if(runs, [&](const detail::Run& r) {
        for (std::size_t j = r.first; j <= r.last; ++j)
          if (I[j].length() > *half_cap) return true;
        return false;
      });
    }
    if (runs.empty()) break;
    const auto best = std::max_element(runs.begin(), runs.end(),
                                       [](const detail::Run& a, const detail::Run& b) { return a.count < b.count; });
    if (first) res.first_run_meets_threshold = double(best->count) >= std::pow(eta, 0.5 * k.C1) * double(G.size()) / (4.0 * k.C);
    const auto pick = select_long_interval(I, best->first, best->last, eta, k);
    picks.push_back(pick.index);
    ++res.iterations;
    if (double(best->last - best->first) <= window_cap) break;

    const double half = 0.5 * I[pick.index].length();
    lo = best->first;
    hi = best->last;
    const std::size_t upto = opts.removal == RemovalRange::whole_window ? hi : pick.index;
    for (std::size_t j = lo; j <= upto; ++j)
      if (j == pick.index || I[j].length() > half) alive[j] = 0;
    if (opts.removal == RemovalRange::left_of_pick) half_cap = half;
  }

  // Longest prefix whose distance ratios fit under the cap at its own t_*.
  std::size_t keep = picks.size();
  for (; keep > 1; --keep) {
    const auto prefix = std::span<const std::size_t>(picks).first(keep);
    const auto ratios = detail::chain_ratios(I, prefix, I[prefix.back()].midpoint());
    if (std::all_of(ratios.begin(), ratios.end(), [&](double r) { return r <= res.dist_cap; })) break;
  }
  res.truncated_links = picks.size() - keep;
  res.chain.assign(picks.begin(), picks.begin() + std::ptrdiff_t(keep));
  res.K = res.chain.size();
  res.t_star = I[res.chain.back()].midpoint();
  res.dist_ratios = detail::chain_ratios(I, res.chain, res.t_star);
  res.meets_log_bound = double(res.K) >= k.c * std::pow(eta, k.C) * std::log(double(G.size()));
  return res;
}

struct ChainCheck {
  bool dyadic = true;
  bool unexceptional = true;
  bool within_cap = true;
  bool ok() const { return dyadic && unexceptional && within_cap; }
};

/// Checks the selection invariants on stored lengths.
inline ChainCheck check_selection(const IntervalDecomposition& dec, const SelectionResult& sel) {
  ChainCheck c;
  for (std::size_t i = 0; i + 1 < sel.chain.size(); ++i)
    if (!(dec.intervals[sel.chain[i]].length() >= 2.0 * dec.intervals[sel.chain[i + 1]].length())) c.dyadic = false;
  for (auto j : sel.chain)
    if (dec.flags.at(j) != IntervalFlag::unexceptional) c.unexceptional = false;
  for (auto j : sel.chain)
    if (dec.intervals[j].distance(sel.t_star) > sel.dist_cap * dec.intervals[j].length()) c.within_cap = false;
  return c;
}

/// Longest chain of eligible intervals with |next| <= |prev| / 2, where
/// eligible means not in `excluded` (exceptional) and
/// dist(t, I) <= dist_cap |I|, maximized over candidate times t. Default
/// candidates are the endpoints and midpoint plus a - cap |I| and
/// b + cap |I| of each eligible interval; the last two make the maximum
/// exact over real t. Cost O(G^3) in the eligible count G.
inline std::size_t brute_force_chain(std::span<const TimeInterval> intervals, std::span<const char> excluded,
                                     double dist_cap, std::span<const double> t_candidates = {}) {
  if (!excluded.empty() && excluded.size() != intervals.size())
    throw std::invalid_argument("brute_force_chain: flag count mismatch");
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < intervals.size(); ++j)
    if (excluded.empty() || !excluded[j]) order.push_back(j);
  std::vector<double> cands(t_candidates.begin(), t_candidates.end());
  if (cands.empty()) {
    for (std::size_t j : order) {
      const auto& I = intervals[j];
      cands.insert(cands.end(), {I.t0, I.t1, I.midpoint(), I.t0 - dist_cap * I.length(), I.t1 + dist_cap * I.length()});
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return intervals[a].length() > intervals[b].length(); });
  std::size_t best = 0;
  std::vector<std::size_t> len(intervals.size());
  for (double t : cands) {
    std::size_t local = 0;
    for (std::size_t p = 0; p < order.size(); ++p) {
      const std::size_t i = order[p];
      len[p] = 0;
      if (!excluded.empty() && excluded[i]) continue;
      if (intervals[i].distance(t) > dist_cap * intervals[i].length()) continue;
      std::size_t l = 1;
      for (std::size_t q = 0; q < p; ++q)
        if (len[q] > 0 && intervals[i].length() * 2.0 <= intervals[order[q]].length()) l = std::max(l, len[q] + 1);
      len[p] = l;
      local = std::max(local, l);
    }
    best = std::max(best, local);
  }
  return best;
}

inline std::size_t brute_force_chain(const IntervalDecomposition& dec, double dist_cap) {
  std::vector<char> excluded(dec.size());
  for (std::size_t j = 0; j < dec.size(); ++j) excluded[j] = dec.flags[j] != IntervalFlag::unexceptional;
  return brute_force_chain(dec.intervals, excluded, dist_cap);
}

/// Exhaustive search over subsets (J <= 20): the largest set of eligible
/// intervals that forms a dyadic chain and shares a time t_* within the cap.
inline std::size_t exhaustive_chain(std::span<const TimeInterval> intervals, std::span<const char> excluded,
                                    double dist_cap) {
  const std::size_t J = intervals.size();
  if (J > 20) throw std::invalid_argument("exhaustive_chain: J too large");
  std::size_t best = 0;
  std::vector<double> lens;
  for (std::uint32_t mask = 1; mask < (1u << J); ++mask) {
    const std::size_t pc = std::size_t(std::popcount(mask));
    if (pc <= best) continue;
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    lens.clear();
    bool ok = true;
    for (std::size_t j = 0; j < J && ok; ++j) {
      if (!(mask >> j & 1u)) continue;
      if (!excluded.empty() && excluded[j]) ok = false;
      const auto& I = intervals[j];
      lo = std::max(lo, I.t0 - dist_cap * I.length());
      hi = std::min(hi, I.t1 + dist_cap * I.length());
      lens.push_back(I.length());
    }
    if (!ok || lo > hi) continue;
    std::sort(lens.rbegin(), lens.rend());
    for (std::size_t i = 0; i + 1 < lens.size() && ok; ++i) ok = lens[i] >= 2.0 * lens[i + 1];
    if (ok) best = pc;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Audit at t_*

struct ChainAuditRow {
  std::size_t index = 0;
  double length = 0.0;
  double radius = 0.0;
  bool resolvable = true;
  double localized_mass = 0.0;
  /// M / (eta^C |I|^{7/12})
  double lower_ratio = 0.0;
  /// M / (eta^{-C} |I|^{7/12})
  double upper_ratio = 0.0;
  /// sum_{l >= k+N} |I_l|^{7/6} / (2^{-7N/12} |I_k|^{7/6}); 0 when the tail is empty.
  double dyadic_tail_ratio = 0.0;
};

struct MassBracketingAudit {
  double t_star = 0.0;
  double t_frame = 0.0;
  bool substituted_frame = false;
  std::size_t K = 0;
  std::size_t N = 0;
  std::vector<ChainAuditRow> rows;
  /// int |u(t_*)|^2 / |x|^{7/3} and ||u(t_*)||_{H^{7/6}}^2
  double hardy_lhs = 0.0, sobolev_sq = 0.0;
  double hardy_ratio = 0.0;
  /// c eta^C (K/N) against eta^{-7C/3} int |u(t_*)|^2/|x|^{7/3}
  double hardy_summation_ratio = 0.0;
  /// K against C eta^{-C}
  double K_ceiling = 0.0;
  double K_ratio = 0.0;
  /// log of the implied J' ceiling exp(C eta^{-C}), and the actual J'.
  double log_J_ceiling = 0.0;
  std::size_t J_prime = 0;
  /// Least-squares slope of log M against log |I| over the resolvable chain
  /// (7/12 in the scaling picture); NaN with fewer than two points.
  double mass_length_exponent = std::numeric_limits<double>::quiet_NaN();
};

/// Dyadic tail sum over a chain of lengths: sum_{l >= k+N} L_l^{7/6}.
inline double dyadic_tail_sum(std::span<const double> lengths, std::size_t k, std::size_t N) {
  double s = 0.0;
  for (std::size_t l = k + N; l < lengths.size(); ++l) s += std::pow(lengths[l], 7.0 / 6.0);
  return s;
}

inline MassBracketingAudit mass_bracketing_audit(const Trajectory& traj, const IntervalDecomposition& dec,
                                                 const SelectionResult& sel, const ProofConstants& k,
                                                 std::optional<double> radius_factor = std::nullopt) {
  if (sel.chain.empty()) throw std::invalid_argument("mass_bracketing_audit: empty chain");
  const double eta = dec.eta;
  MassBracketingAudit a;
  a.t_star = sel.t_star;
  const auto exact = traj.frame_at(sel.t_star, 1e-9);
  const std::size_t m = exact ? *exact : traj.nearest_frame(sel.t_star);
  a.substituted_frame = !exact;
  a.t_frame = traj.times()[m];
  const auto& u = traj.frame(m);
  a.K = sel.K;
  a.N = std::size_t(std::ceil(k.C * std::log(1.0 / eta)));
  const double factor = radius_factor.value_or(k.C * std::pow(eta, -k.C));

  std::vector<double> chain_lengths;
  for (auto j : sel.chain) chain_lengths.push_back(dec.intervals[j].length());
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < sel.chain.size(); ++i) {
    ChainAuditRow row;
    row.index = sel.chain[i];
    row.length = chain_lengths[i];
    row.radius = factor * std::sqrt(row.length);
    row.resolvable = row.radius <= traj.grid().r_max();
    if (row.resolvable) {
      row.localized_mass = localized_mass(u, row.radius);
      row.lower_ratio = row.localized_mass / (std::pow(eta, k.C) * std::pow(row.length, 7.0 / 12.0));
      row.upper_ratio = row.localized_mass / (std::pow(eta, -k.C) * std::pow(row.length, 7.0 / 12.0));
      if (row.localized_mass > 0.0) {
        xs.push_back(std::log(row.length));
        ys.push_back(std::log(row.localized_mass));
      }
    }
    const double tail = dyadic_tail_sum(chain_lengths, i, a.N);
    row.dyadic_tail_ratio = tail / (std::pow(2.0, -7.0 * double(a.N) / 12.0) * std::pow(row.length, 7.0 / 6.0));
    a.rows.push_back(row);
  }
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / double(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx > 0.0) a.mass_length_exponent = sxy / sxx;
  }
  const double h = sobolev_norm(u, kCriticalRegularity);
  a.sobolev_sq = h * h;
  if (a.sobolev_sq > 0.0) {
    const double r = snls::hardy_ratio(u, kCriticalRegularity);
    a.hardy_ratio = r;
    a.hardy_lhs = r * r * a.sobolev_sq;
  }
  const double rhs = std::pow(eta, -7.0 * k.C / 3.0) * a.hardy_lhs;
  a.hardy_summation_ratio = rhs > 0.0 ? k.c * std::pow(eta, k.C) * double(a.K) / double(std::max<std::size_t>(a.N, 1)) / rhs
                                      : std::numeric_limits<double>::infinity();
  a.K_ceiling = k.C * std::pow(eta, -k.C);
  a.K_ratio = double(a.K) / a.K_ceiling;
  a.log_J_ceiling = k.C * std::pow(eta, -k.C);
  a.J_prime = dec.count(IntervalFlag::unexceptional);
  return a;
}

// ---------------------------------------------------------------------------
// Linear flow floor

struct LinearFlowFloor {
  double t_left = 0.0, t_right = 0.0;
  /// int_{I_j} ||e^{i(t - t_i) Delta} u(t_i)||_15^15 dt / eta for t_i the left and right endpoint frames.
  double left_ratio = 0.0, right_ratio = 0.0;
};

/// Endpoint free flows integrated over I_j with the trajectory's own time
/// rule; t_i are the stored frames nearest the interval ends.
inline LinearFlowFloor linear_flow_floor(const Trajectory& traj, const IntervalDecomposition& dec, std::size_t j) {
  if (j >= dec.size()) throw std::invalid_argument("linear_flow_floor: index out of range");
  if (!(dec.masses[j] >= 0.5 * dec.eta)) throw std::invalid_argument("linear_flow_floor: interval mass below eta/2");
  const auto& I = dec.intervals[j];
  const auto times = traj.times();
  LinearFlowFloor out;
  const std::size_t ml = traj.nearest_frame(I.t0), mr = traj.nearest_frame(I.t1);
  out.t_left = times[ml];
  out.t_right = times[mr];
  auto ratio = [&](std::size_t base) {
    const auto spec = to_spectral(traj.frame(base));
    std::vector<double> d(times.size(), 0.0);
    // Only frames that touch [t0, t1] enter the cumulative rule there.
    const std::size_t lo = traj.nearest_frame(I.t0) > 0 ? traj.nearest_frame(I.t0) - 1 : 0;
    const std::size_t hi = std::min(times.size() - 1, traj.nearest_frame(I.t1) + 1);
    for (std::size_t m = lo; m <= hi; ++m) d[m] = s_density(from_spectral(free_evolve(spec, times[m] - times[base])));
    return CumulativeIntegral(times, d).between(I.t0, I.t1) / dec.eta;
  };
  out.left_ratio = ratio(ml);
  out.right_ratio = ratio(mr);
  return out;
}

}  // namespace snls
