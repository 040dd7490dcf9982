// Constant hierarchy shared by the interval machinery and the bound formulas.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace snls {

/// eta = (1/C2) (1 + E)^{-C2}.
inline double eta_of(double E, double C2) {
  if (!(E >= 0.0)) throw std::invalid_argument("eta_of: E must be nonnegative");
  if (!(C2 >= 1.0)) throw std::invalid_argument("eta_of: C2 must be at least 1");
  return std::pow(1.0 + E, -C2) / C2;
}

/// C0 <= C1 <= C2 and the auxiliary constants c, C, C~ (C_tilde), C' (C_prime).
struct ProofConstants {
  double C0 = 1.0;
  double C1 = 2.0;
  double C2 = 2.0;
  double c = 0.25;
  double C = 2.0;
  double C_tilde = 8.0;
  double C_prime = 1.0;

  void validate() const {
    if (!(1.0 <= C0 && C0 <= C1 && C1 <= C2))
      throw std::invalid_argument("constants: need 1 <= C0 <= C1 <= C2 (got " + std::to_string(C0) + ", " +
                                  std::to_string(C1) + ", " + std::to_string(C2) + ")");
    if (!(c > 0.0)) throw std::invalid_argument("constants.c must be positive");
    if (!(C >= 1.0)) throw std::invalid_argument("constants.C must be at least 1");
    if (!(C_tilde > 0.0)) throw std::invalid_argument("constants.C_tilde must be positive");
    if (!(C_prime > 0.0)) throw std::invalid_argument("constants.C_prime must be positive");
  }

  double eta(double E) const { return eta_of(E, C2); }
};

}  // namespace snls
