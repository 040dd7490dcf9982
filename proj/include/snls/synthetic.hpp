// Synthetic interval decompositions for exercising the selection
// combinatorics without a simulation.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>

#include "snls/constants.hpp"
#include "snls/interval_engine.hpp"

namespace snls {

/// True when every window [j_a, j_b] has max |I_j| >= c eta^{3 C1 / 2} span.
inline bool morawetz_admissible(std::span<const TimeInterval> intervals, double eta, const ProofConstants& k) {
  const double factor = k.c * std::pow(eta, 1.5 * k.C1);
  for (std::size_t a = 0; a < intervals.size(); ++a) {
    double longest = 0.0;
    for (std::size_t b = a; b < intervals.size(); ++b) {
      longest = std::max(longest, intervals[b].length());
      if (longest < factor * (intervals[b].t1 - intervals[a].t0)) return false;
    }
  }
  return true;
}

struct SyntheticOptions {
  std::size_t J = 50;
  double eta = 0.125;
  /// Probability that an interval is flagged exceptional.
  double exceptional_fraction = 0.2;
  /// Lengths are drawn as exp(U(-spread, 0)) before repair.
  double log_spread = 8.0;
};

/// Lengthens the longest member of each failing window until every window
/// satisfies morawetz_admissible; returns the number of repairs.
inline std::size_t repair_admissible(std::vector<double>& lengths, double eta, const ProofConstants& k) {
  const double factor = k.c * std::pow(eta, 1.5 * k.C1);
  if (!(factor < 1.0)) throw std::invalid_argument("repair_admissible: need c eta^{3 C1/2} < 1");
  std::size_t repairs = 0;
  for (bool clean = false; !clean;) {
    clean = true;
    for (std::size_t a = 0; a < lengths.size() && clean; ++a) {
      std::size_t arg = a;
      double span = 0.0;
      for (std::size_t b = a; b < lengths.size(); ++b) {
        span += lengths[b];
        if (lengths[b] > lengths[arg]) arg = b;
        if (lengths[arg] < factor * span) {
          lengths[arg] += (factor * span - lengths[arg]) / (1.0 - factor) * (1.0 + 1e-12);
          ++repairs;
          clean = false;
          break;
        }
      }
    }
  }
  return repairs;
}

/// Contiguous intervals from t = 0, each carrying mass eta, log-uniform
/// lengths repaired to the admissibility contract, Bernoulli flags.
template <class Rng>
IntervalDecomposition synthetic_decomposition(Rng& rng, const SyntheticOptions& opts, const ProofConstants& k) {
  if (opts.J == 0) throw std::invalid_argument("synthetic_decomposition: J must be positive");
  std::uniform_real_distribution<double> loglen(-opts.log_spread, 0.0);
  std::bernoulli_distribution exceptional(opts.exceptional_fraction);
  std::vector<double> lengths(opts.J);
  for (auto& len : lengths) len = std::exp(loglen(rng));
  repair_admissible(lengths, opts.eta, k);
  IntervalDecomposition dec;
  dec.eta = opts.eta;
  double t = 0.0;
  for (double len : lengths) {
    dec.intervals.push_back({t, t + len});
    dec.masses.push_back(opts.eta);
    dec.flags.push_back(exceptional(rng) ? IntervalFlag::exceptional : IntervalFlag::unexceptional);
    t += len;
  }
  dec.total_mass = opts.eta * double(opts.J);
  dec.threshold = std::pow(opts.eta, k.C1);
  return dec;
}

/// Contiguous intervals with the given lengths, all unexceptional.
inline IntervalDecomposition decomposition_from_lengths(std::span<const double> lengths, double eta) {
  IntervalDecomposition dec;
  dec.eta = eta;
  double t = 0.0;
  for (double len : lengths) {
    if (!(len > 0.0)) throw std::invalid_argument("decomposition_from_lengths: lengths must be positive");
    dec.intervals.push_back({t, t + len});
    dec.masses.push_back(eta);
    dec.flags.push_back(IntervalFlag::unexceptional);
    t += len;
  }
  dec.total_mass = eta * double(lengths.size());
  return dec;
}

}  // namespace snls
