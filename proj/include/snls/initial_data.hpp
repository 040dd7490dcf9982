#pragma once

#include <complex>
#include <cmath>
#include <stdexcept>
#include <string>

#include "snls/radial_spectral.hpp"

namespace snls {

enum class DataFamily { gaussian, bump, ring };

inline std::string to_string(DataFamily f) {
  switch (f) {
    case DataFamily::gaussian: return "gaussian";
    case DataFamily::bump: return "bump";
    case DataFamily::ring: return "ring";
  }
  return "?";
}

inline DataFamily parse_family(const std::string& s) {
  if (s == "gaussian") return DataFamily::gaussian;
  if (s == "bump") return DataFamily::bump;
  if (s == "ring") return DataFamily::ring;
  throw std::invalid_argument("unknown data family '" + s + "' (expected gaussian, bump or ring)");
}

/// Radial profile times a quadratic phase e^{i chirp r^2}.
///   gaussian: a exp(-r^2 / (2 w^2))
///   bump:     a exp(1 - 1/(1 - (r/w)^2)) for r < w, else 0
///   ring:     a exp(-(r - r0)^2 / (2 w^2)), r0 = ring_radius (default 3 w)
struct InitialData {
  DataFamily family = DataFamily::gaussian;
  double amplitude = 1.0;
  double width = 1.0;
  double chirp = 0.0;
  double ring_radius = 0.0;  // 0 means 3 * width

  double profile(double r) const {
    switch (family) {
      case DataFamily::gaussian: return amplitude * std::exp(-r * r / (2.0 * width * width));
      case DataFamily::bump: {
        const double x = r / width;
        if (x >= 1.0) return 0.0;
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - x * x));
      }
      case DataFamily::ring: {
        const double r0 = ring_radius > 0.0 ? ring_radius : 3.0 * width;
        const double d = r - r0;
        return amplitude * std::exp(-d * d / (2.0 * width * width));
      }
    }
    return 0.0;
  }

  RadialField sample(const RadialGrid& grid) const {
    if (!(width > 0.0)) throw std::invalid_argument("InitialData: width must be positive");
    return RadialField::sample(grid, [&](double r) { return profile(r) * std::polar(1.0, chirp * r * r); });
  }

  std::string describe() const {
    std::string s = to_string(family) + "(amplitude=" + std::to_string(amplitude) + ", width=" + std::to_string(width) +
                    ", chirp=" + std::to_string(chirp);
    if (family == DataFamily::ring) s += ", ring_radius=" + std::to_string(ring_radius > 0.0 ? ring_radius : 3.0 * width);
    return s + ")";
  }
};

}  // namespace snls
