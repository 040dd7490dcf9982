// Shared generators and independent quadrature oracles for the test suites.
#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "snls/radial_spectral.hpp"

namespace snls::testing {

inline constexpr double pi = std::numbers::pi;

/// Adaptive Gauss-Kronrod on [a, b].
template <class F>
double quad(F&& f, double a, double b, double tol = 1e-14) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 10, tol);
}

/// Oscillatory integrand on [0, upper]: split into panels of width ~ one period.
template <class F>
double quad_panels(F&& f, double upper, double panel) {
  double acc = 0.0;
  for (double a = 0.0; a < upper; a += panel) acc += quad(f, a, std::min(a + panel, upper), 1e-13);
  return acc;
}

/// Random field of white-noise samples (for transform identities).
inline RadialField random_noise_field(const RadialGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<cplx> v(g.n());
  for (auto& z : v) z = cplx(nd(rng), nd(rng));
  return {g, std::move(v)};
}

/// Random smooth field: a sum of 1-3 chirped Gaussian shells.
inline RadialField random_smooth_field(const RadialGrid& g, std::mt19937_64& rng, double max_center = 4.0) {
  std::uniform_real_distribution<double> amp(0.2, 1.5), width(0.5, 2.0), center(0.0, max_center),
      phase(0.0, 2.0 * pi), chirp(-0.3, 0.3);
  std::uniform_int_distribution<int> count(1, 3);
  struct Bump { double a, w, c, ph, ch; };
  std::vector<Bump> bumps(std::size_t(count(rng)));
  for (auto& b : bumps) b = {amp(rng), width(rng), center(rng), phase(rng), chirp(rng)};
  return RadialField::sample(g, [&](double r) {
    cplx acc = 0.0;
    for (const auto& b : bumps) {
      // Even in r so the profile is smooth at the origin.
      const double e = std::exp(-(r - b.c) * (r - b.c) / (2 * b.w * b.w)) + std::exp(-(r + b.c) * (r + b.c) / (2 * b.w * b.w));
      acc += b.a * e * std::polar(1.0, b.ph + b.ch * r * r);
    }
    return acc;
  });
}

/// Compactly supported C-infinity bump a exp(1 - 1/(1 - (r/w)^2)).
inline RadialField smooth_bump(const RadialGrid& g, double a, double w) {
  return RadialField::sample(g, [&](double r) {
    const double x = r / w;
    return x >= 1.0 ? 0.0 : a * std::exp(1.0 - 1.0 / (1.0 - x * x));
  });
}

inline RadialField gaussian(const RadialGrid& g, double a = 1.0, double w = 1.0) {
  return RadialField::sample(g, [&](double r) { return a * std::exp(-r * r / (2 * w * w)); });
}

inline double rel_l2_diff(const RadialField& a, const RadialField& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r2 = a.grid().r(i) * a.grid().r(i);
    num += std::norm(a[i] - b[i]) * r2;
    den += std::norm(b[i]) * r2;
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Absolute L^2(R^3) distance on the grid.
inline double l2_diff(const RadialField& a, const RadialField& b) {
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += std::norm(a[i] - b[i]) * a.grid().r(i) * a.grid().r(i);
  return std::sqrt(4 * pi * a.grid().dr() * num);
}

}  // namespace snls::testing
