// Time integration over sampled scalar densities.
//
// Every L^q_t integral in the library goes through one rule: the cumulative
// trapezoid integral at the samples, linearly interpolated in between. It is
// additive over adjacent windows and exact at sample times, which keeps
// partition masses, per-interval norms and totals mutually consistent.
#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace snls {

class CumulativeIntegral {
 public:
  CumulativeIntegral() = default;

  CumulativeIntegral(std::span<const double> times, std::span<const double> values)
      : times_(times.begin(), times.end()), cumulative_(times.size(), 0.0) {
    if (times.size() != values.size()) throw std::invalid_argument("CumulativeIntegral: size mismatch");
    if (times.empty()) throw std::invalid_argument("CumulativeIntegral: no samples");
    for (std::size_t m = 1; m < times.size(); ++m) {
      const double h = times[m] - times[m - 1];
      if (!(h > 0.0)) throw std::invalid_argument("CumulativeIntegral: times must increase strictly");
      cumulative_[m] = cumulative_[m - 1] + 0.5 * h * (values[m] + values[m - 1]);
    }
  }

  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }
  double total() const { return cumulative_.back(); }
  std::span<const double> times() const { return times_; }
  std::span<const double> cumulative() const { return cumulative_; }

  /// Running integral from t_begin to t (clamped to the sampled range).
  double at(double t) const {
    if (t <= times_.front()) return 0.0;
    if (t >= times_.back()) return cumulative_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t m = std::size_t(it - times_.begin());  // times_[m-1] <= t < times_[m]
    const double f = (t - times_[m - 1]) / (times_[m] - times_[m - 1]);
    return cumulative_[m - 1] + f * (cumulative_[m] - cumulative_[m - 1]);
  }

  double between(double a, double b) const { return at(b) - at(a); }

  /// First time the running integral reaches `target` (leftmost on flat
  /// stretches); t_end if it never does.
  double first_reaching(double target) const {
    if (target <= 0.0) return times_.front();
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) return times_.back();
    const std::size_t m = std::size_t(it - cumulative_.begin());
    if (m == 0) return times_.front();
    const double c0 = cumulative_[m - 1], c1 = cumulative_[m];
    const double f = (target - c0) / (c1 - c0);
    return times_[m - 1] + std::clamp(f, 0.0, 1.0) * (times_[m] - times_[m - 1]);
  }

 private:
  std::vector<double> times_;
  std::vector<double> cumulative_;
};

/// Integral of a sampled density over [a, b] under the cumulative rule.
inline double integrate_window(std::span<const double> times, std::span<const double> values, double a, double b) {
  return CumulativeIntegral(times, values).between(a, b);
}

}  // namespace snls
