// Scalar functionals of a single radial field: mass, energy, the L^15
// density, and the cutoff-localized mass.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "snls/radial_spectral.hpp"

namespace snls {

/// The fixed radial bump: 1 on [0, 1/2], cos^2(pi(x - 1/2)) on [1/2, 1],
/// 0 beyond.
struct Cutoff {
  static double profile(double x) {
    x = std::abs(x);
    if (x <= 0.5) return 1.0;
    if (x >= 1.0) return 0.0;
    const double c = std::cos(std::numbers::pi * (x - 0.5));
    return c * c;
  }

  /// chi(r/R).
  static double scaled(double r, double R) { return profile(r / R); }

  /// int_0^y chi(s) s ds, closed form. On [1/2, 1], chi(s) = (1 - cos 2 pi s)/2.
  static double radial_moment1(double y) {
    constexpr double pi = std::numbers::pi;
    y = std::min(std::max(y, 0.0), 1.0);
    if (y <= 0.5) return 0.5 * y * y;
    auto anti = [&](double s) {
      return s * s / 4.0 - 0.5 * (s * std::sin(2.0 * pi * s) / (2.0 * pi) + std::cos(2.0 * pi * s) / (4.0 * pi * pi));
    };
    return 0.125 + anti(y) - anti(0.5);
  }

  /// ||chi||_{L^1(R^3)} = 4 pi int_0^1 chi(s) s^2 ds, closed form.
  static double l1_norm() {
    constexpr double pi = std::numbers::pi;
    constexpr double a = 2.0 * pi;
    // int s^2 cos(a s) ds = s^2 sin(as)/a + 2 s cos(as)/a^2 - 2 sin(as)/a^3
    auto anti_cos = [&](double s) {
      return s * s * std::sin(a * s) / a + 2.0 * s * std::cos(a * s) / (a * a) - 2.0 * std::sin(a * s) / (a * a * a);
    };
    const double inner = 1.0 / 24.0 + 0.5 * (1.0 / 3.0 - 1.0 / 24.0) - 0.5 * (anti_cos(1.0) - anti_cos(0.5));
    return 4.0 * pi * inner;
  }
};

/// M[u] = int |u|^2 dx.
inline double mass(const RadialField& u) {
  const auto v = u.values();
  return radial_integral(u.grid(), [&](std::size_t i) { return std::norm(v[i]); });
}

/// int |u|^8 dx.
inline double potential_integral(const RadialField& u) {
  const auto v = u.values();
  return radial_integral(u.grid(), [&](std::size_t i) {
    const double m = std::norm(v[i]);
    return m * m * m * m;
  });
}

/// E[u] = 1/2 int |grad u|^2 + (g/8) int |u|^8, g the nonlinearity
/// coefficient (1 for the defocusing equation, 0 for the free flow). The
/// gradient term is the spectral H^1 seminorm.
inline double energy(const RadialField& u, double nonlinearity = 1.0) {
  const double grad = sobolev_norm(u, 1.0);
  return 0.5 * grad * grad + 0.125 * nonlinearity * potential_integral(u);
}

inline double energy(const SpectralField& spec, const RadialField& u, double nonlinearity = 1.0) {
  const double grad = sobolev_norm(spec, 1.0);
  return 0.5 * grad * grad + 0.125 * nonlinearity * potential_integral(u);
}

/// ||u||_{L^15_x}^15, the integrand of the space-time partition.
inline double s_density(const RadialField& u) {
  const auto v = u.values();
  return radial_integral(u.grid(), [&](std::size_t i) { return std::pow(std::abs(v[i]), 15.0); });
}

/// M(u; 0, R) = (int |chi(x/R) u(x)|^2 dx)^{1/2}.
inline double localized_mass(const RadialField& u, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("localized_mass: R must be positive");
  if (R > u.grid().r_max() * (1.0 + 1e-12))
    throw std::invalid_argument("localized_mass: R exceeds r_max");
  const auto v = u.values();
  const auto& g = u.grid();
  return std::sqrt(radial_integral(g, [&](std::size_t i) {
    const double c = Cutoff::scaled(g.r(i), R);
    return c * c * std::norm(v[i]);
  }));
}

/// Mass outside fraction * r_max.
inline double boundary_mass(const RadialField& u, double fraction = 0.9) {
  const auto v = u.values();
  const auto& g = u.grid();
  const double r0 = fraction * g.r_max();
  return radial_integral(g, [&](std::size_t i) { return g.r(i) > r0 ? std::norm(v[i]) : 0.0; });
}

}  // namespace snls
