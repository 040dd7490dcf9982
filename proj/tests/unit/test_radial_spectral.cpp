#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "snls/radial_spectral.hpp"
#include "test_support.hpp"

using namespace snls;
using namespace snls::testing;

namespace {

const RadialGrid kDesk(4096, 40.0);

TEST(RadialGrid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(RadialGrid(100, 10.0), std::invalid_argument);
  EXPECT_THROW(RadialGrid(4, 10.0), std::invalid_argument);
  EXPECT_THROW(RadialGrid(64, -1.0), std::invalid_argument);
  RadialGrid g(64, 10.0);
  EXPECT_NEAR(g.dr() * 65.0, 10.0, 1e-15);
  EXPECT_DOUBLE_EQ(g.rho(0), pi / 10.0);
}

TEST(RadialField, RejectsNonFiniteWithIndex) {
  std::vector<cplx> v(64, 1.0);
  v[17] = cplx(std::nan(""), 0.0);
  try {
    RadialField f(RadialGrid(64, 10.0), v);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.index(), 17u);
  }
  EXPECT_THROW(RadialField(RadialGrid(64, 10.0), std::vector<cplx>(63)), std::invalid_argument);
}

TEST(ToSpectral, ZeroFieldGivesZeroCoefficients) {
  const auto s = to_spectral(RadialField::zero(kDesk));
  for (const auto& c : s.coeffs()) EXPECT_EQ(c, cplx(0.0));
}

TEST(ToSpectral, FirstEigenfunctionHasOneCoefficient) {
  const RadialGrid g(256, 10.0);
  const auto f = RadialField::sample(g, [&](double r) { return std::sin(pi * r / g.r_max()) / r; });
  const auto s = to_spectral(f);
  EXPECT_GT(std::abs(s[0]), 1.0);
  for (std::size_t k = 1; k < g.n(); ++k) EXPECT_LT(std::abs(s[k]), 1e-12) << k;
}

TEST(ToSpectral, GaussianMatchesQuadratureOfSineIntegral) {
  // w_hat_k = sqrt(2/(n+1)) sum_i w_i sin(rho_k r_i) ~ sqrt(2/(n+1))/dr * int_0^inf r e^{-r^2/2} sin(rho_k r) dr
  const RadialGrid g(4096, 30.0);
  const auto s = to_spectral(gaussian(g));
  const double scale = std::sqrt(2.0 / double(g.n() + 1)) / g.dr();
  for (std::size_t k = 0; k < g.n(); k += (k < 300 ? 7 : 211)) {
    const double rho = g.rho(k);
    const double oracle = rho > 40.0 ? 0.0
        : quad_panels([&](double r) { return r * std::exp(-r * r / 2) * std::sin(rho * r); }, 14.0, 0.5);
    EXPECT_NEAR(s[k].real(), scale * oracle, 1e-8) << "k=" << k;
    EXPECT_NEAR(s[k].imag(), 0.0, 1e-14);
  }
}

TEST(FromSpectral, ZeroAndSingleMode) {
  const RadialGrid g(512, 20.0);
  const auto zero = from_spectral(SpectralField(g, std::vector<cplx>(g.n())));
  for (const auto& z : zero.values()) EXPECT_EQ(z, cplx(0.0));
  std::vector<cplx> c(g.n());
  c[2] = 1.0;  // k = 3
  const auto f = from_spectral(SpectralField(g, c));
  const double norm = std::sqrt(2.0 / double(g.n() + 1));
  for (std::size_t i = 0; i < g.n(); i += 13)
    EXPECT_NEAR(f[i].real(), norm * std::sin(3 * pi * g.r(i) / g.r_max()) / g.r(i), 1e-13);
}

TEST(FromSpectral, RoundTripOnRandomFields) {
  std::mt19937_64 rng(7);
  const RadialGrid g(1024, 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_noise_field(g, rng);
    EXPECT_LT(rel_l2_diff(from_spectral(to_spectral(f)), f), 1e-12);
  }
}

TEST(FractionalApply, IdentityAndEigenvalue) {
  const RadialGrid g(256, 10.0);
  const auto gauss = gaussian(g);
  const auto same = fractional_apply(gauss, 0.0);
  for (std::size_t i = 0; i < g.n(); ++i) EXPECT_EQ(same[i], gauss[i]);

  std::vector<cplx> unit(g.n());
  unit[0] = 1.0;
  const SpectralField mode(g, unit);
  const auto lap = fractional_apply(mode, 2.0);
  EXPECT_DOUBLE_EQ(lap[0].real(), std::pow(pi / g.r_max(), 2));
  for (std::size_t k = 1; k < g.n(); ++k) EXPECT_EQ(lap[k], cplx(0.0));
  const auto eig = from_spectral(mode);
  EXPECT_THROW(fractional_apply(eig, 4.5), std::invalid_argument);
  EXPECT_THROW(fractional_apply(eig, -0.1), std::invalid_argument);
}

TEST(FractionalApply, CriticalOrderOnGaussianMatchesQuadrature) {
  // |grad|^s e^{-r^2/2} = (1/r) sqrt(2/pi) int_0^inf rho^{s+1} e^{-rho^2/2} sin(rho r) d rho
  // The spectral sum near rho = 0 carries an O(d_rho^{s+2}) error; r_max = 80 keeps it below 1e-7.
  const double s = 7.0 / 6.0;
  const RadialGrid g(8192, 80.0);
  const auto d = fractional_apply(gaussian(g), s);
  for (double r_target : {0.05, 0.5, 1.0, 2.0, 3.5, 6.0}) {
    const std::size_t i = std::size_t(std::lround(r_target / g.dr())) - 1;
    const double r = g.r(i);
    const double oracle = std::sqrt(2.0 / pi) / r *
        quad_panels([&](double p) { return std::pow(p, s + 1) * std::exp(-p * p / 2) * std::sin(p * r); }, 12.0, 0.25);
    EXPECT_NEAR(d[i].real(), oracle, 1e-7) << "r=" << r;
  }
}

TEST(SobolevNorm, ZeroPlancherelAndGaussianOracle) {
  EXPECT_EQ(sobolev_norm(RadialField::zero(kDesk), 7.0 / 6.0), 0.0);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_noise_field(RadialGrid(512, 15.0), rng);
    EXPECT_NEAR(sobolev_norm(f, 0.0), lebesgue_norm(f, 2.0), 1e-12 * lebesgue_norm(f, 2.0));
  }
  // int rho^{2s} |f_hat|^2 4 pi rho^2 d rho with f_hat = e^{-rho^2/2}.
  const double s = 7.0 / 6.0;
  const double oracle = std::sqrt(quad([&](double p) { return 4 * pi * std::pow(p, 2 * s + 2) * std::exp(-p * p); }, 0.0, 14.0));
  EXPECT_NEAR(sobolev_norm(gaussian(kDesk), s), oracle, 1e-7 * oracle);
}

TEST(LebesgueNorm, ZeroHomogeneityAndGaussian) {
  EXPECT_EQ(lebesgue_norm(RadialField::zero(kDesk), 3.0), 0.0);
  const auto b = smooth_bump(kDesk, 1.0, 2.0);
  const auto b3 = smooth_bump(kDesk, 3.0, 2.0);
  for (double p : {1.0, 2.0, 9.0, 15.0, kInfNorm}) EXPECT_NEAR(lebesgue_norm(b3, p), 3.0 * lebesgue_norm(b, p), 1e-12);
  EXPECT_NEAR(lebesgue_norm(gaussian(kDesk), 2.0), std::pow(pi, 0.75), 1e-8);
  EXPECT_DOUBLE_EQ(lebesgue_norm(gaussian(kDesk, 2.5), kInfNorm), std::abs(gaussian(kDesk, 2.5)[0]));
}

TEST(Rescale, IdentityAndCriticalInvariance) {
  const auto f = gaussian(kDesk);
  const auto same = rescale(f, 1.0);
  EXPECT_FALSE(same.truncation_warning);
  EXPECT_EQ(same.field[10], f[10]);
  const double h = sobolev_norm(f, 7.0 / 6.0), l9 = lebesgue_norm(f, 9.0);
  for (double lambda : {0.5, 0.7, 1.3, 2.0}) {
    const auto res = rescale(f, lambda);
    EXPECT_FALSE(res.truncation_warning);
    EXPECT_NEAR(sobolev_norm(res.field, 7.0 / 6.0) / h, 1.0, 1e-4) << lambda;
    EXPECT_NEAR(lebesgue_norm(res.field, 9.0) / l9, 1.0, 1e-4) << lambda;
  }
  const auto wide = rescale(gaussian(kDesk, 1.0, 4.0), 20.0);
  EXPECT_TRUE(wide.truncation_warning);
  EXPECT_GT(wide.lost_mass_fraction, 0.01);
  EXPECT_THROW(rescale(f, 0.0), std::invalid_argument);
}

TEST(HardyRatio, IdentityAtZeroAndGaussianOracle) {
  EXPECT_NEAR(hardy_ratio(gaussian(kDesk), 0.0), 1.0, 1e-12);
  EXPECT_THROW(hardy_ratio(RadialField::zero(kDesk), 0.5), std::invalid_argument);
  EXPECT_THROW(hardy_ratio(gaussian(kDesk), 1.5), std::invalid_argument);
  const double a = 7.0 / 6.0;
  const double lhs = std::sqrt(quad([&](double r) { return 4 * pi * std::exp(-r * r) * std::pow(r, 2 - 2 * a); }, 0.0, 12.0));
  const double rhs = std::sqrt(quad([&](double p) { return 4 * pi * std::pow(p, 2 * a + 2) * std::exp(-p * p); }, 0.0, 14.0));
  const double coarse = hardy_ratio(gaussian(RadialGrid(4096, 40.0)), a);
  const double fine = hardy_ratio(gaussian(RadialGrid(8192, 40.0)), a);
  EXPECT_NEAR(coarse / (lhs / rhs), 1.0, 0.01);
  EXPECT_NEAR(fine / coarse, 1.0, 0.01);
}

TEST(HardyRatio, RandomBumpsStayBelowSharpConstant) {
  // Sharp constant of ||u/|x|^a||_2 <= C ||u||_{H^a} on R^3:
  // C = Gamma((3-2a)/4) / (2^a Gamma((3+2a)/4)).
  const double a = 7.0 / 6.0;
  const double sharp = std::tgamma((3 - 2 * a) / 4) / (std::pow(2.0, a) * std::tgamma((3 + 2 * a) / 4));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> w(0.5, 4.0), amp(0.1, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) worst = std::max(worst, hardy_ratio(smooth_bump(kDesk, amp(rng), w(rng)), a));
  EXPECT_GT(worst, 0.0);
  EXPECT_LT(worst, sharp);
}

TEST(SpectralInvariants, MultiplierComposition) {
  std::mt19937_64 rng(5);
  const RadialGrid g(1024, 20.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_smooth_field(g, rng);
    const auto spec = to_spectral(f);
    for (auto [s, t] : {std::pair{0.5, 0.7}, {7.0 / 6.0, 1.0}, {2.0, 2.0}}) {
      const auto two = fractional_apply(fractional_apply(spec, s), t);
      const auto one = fractional_apply(spec, s + t);
      double num = 0, den = 0;
      for (std::size_t k = 0; k < g.n(); ++k) {
        num += std::norm(two[k] - one[k]);
        den += std::norm(one[k]);
      }
      EXPECT_LT(std::sqrt(num / den), 1e-10);
    }
  }
}

TEST(SpectralInvariants, DiscreteInterpolationHoldsWithConstantOne) {
  std::mt19937_64 rng(9);
  const RadialGrid g(1024, 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = to_spectral(random_smooth_field(g, rng));
    for (double d : {0.05, 0.1}) {
      const double sc = 7.0 / 6.0;
      const double lhs = sobolev_norm(spec, sc);
      const double rhs = std::pow(sobolev_norm(spec, sc - d), 1 - d) * std::pow(sobolev_norm(spec, sc + 1 - d), d);
      EXPECT_LE(lhs, rhs * (1 + 1e-12));
    }
  }
}

TEST(SpectralInvariants, SobolevEmbeddingRatioBelowSharpConstant) {
  // ||u||_{2n/(n-2s)}^2 <= S ||u||_{H^s}^2 with
  // S = 2^{-2s} pi^{-s} Gamma((n-2s)/2) / Gamma((n+2s)/2) (Gamma(n)/Gamma(n/2))^{2s/n}, n = 3.
  const double s = 7.0 / 6.0;
  const double sharp = std::sqrt(std::pow(2.0, -2 * s) * std::pow(pi, -s) * std::tgamma((3 - 2 * s) / 2) /
                                 std::tgamma((3 + 2 * s) / 2) * std::pow(std::tgamma(3.0) / std::tgamma(1.5), 2 * s / 3));
  std::mt19937_64 rng(13);
  double lo = 1e300, hi = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_smooth_field(kDesk, rng);
    const double ratio = lebesgue_norm(f, 9.0) / sobolev_norm(f, s);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, sharp);
}

TEST(Checkpoint, FieldRoundTripIsBitExact) {
  std::mt19937_64 rng(21);
  const auto f = random_noise_field(RadialGrid(64, 5.0), rng);
  std::stringstream ss;
  write_field(ss, f);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4 + 4 + 8 + 8 + 64 * 16u);
  EXPECT_EQ(bytes.substr(0, 4), "SNLS");
  const auto back = read_field(ss);
  EXPECT_EQ(back.grid(), f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(back[i], f[i]);

  std::stringstream bad("XXXX0000");
  EXPECT_THROW(read_field(bad), std::runtime_error);
  std::stringstream csv;
  write_field_csv(csv, f);
  EXPECT_EQ(csv.str().substr(0, 12), "r,re_u,im_u\n");
}

}  // namespace
