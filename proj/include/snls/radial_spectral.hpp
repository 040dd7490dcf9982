// Radial grid, sine-transform machinery and norms for radial fields on R^3.
//
// A radial function u(|x|) is stored through w(r) = r u(r) on the uniform
// interior nodes r_i = i dr, i = 1..n, dr = r_max/(n+1), with w = 0 at r = 0
// and r = r_max. The discrete sine transform (DST-I) diagonalizes the radial
// Laplacian: -Delta u <-> rho_k^2 with rho_k = k pi / r_max.
//
// Normalization: the transform is the orthonormal DST-I,
//
//   w_hat_k = sqrt(2/(n+1)) sum_i w_i sin(pi i k/(n+1)),
//
// which is its own inverse. Norms carry the factor 4 pi dr so that
//
//   ||u||_{L^2}^2 = 4 pi dr sum_i |w_i|^2 = 4 pi dr sum_k |w_hat_k|^2,
//   ||u||_{H^s}^2 = 4 pi dr sum_k rho_k^{2s} |w_hat_k|^2.
#pragma once

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace snls {

using cplx = std::complex<double>;

inline constexpr double kCriticalRegularity = 7.0 / 6.0;
inline constexpr double kMaxSobolevOrder = 4.0;
inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

/// Raised when a sample is NaN or infinite; carries the offending index.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class RadialGrid {
 public:
  RadialGrid() = default;

  /// n must be a power of two, n >= 8; r_max > 0.
  RadialGrid(std::size_t n, double r_max) : n_(n), r_max_(r_max), dr_(r_max / double(n + 1)) {
    if (n < 8 || (n & (n - 1)) != 0)
      throw std::invalid_argument("RadialGrid: n must be a power of two >= 8, got " + std::to_string(n));
    if (!(r_max > 0.0) || !std::isfinite(r_max))
      throw std::invalid_argument("RadialGrid: r_max must be positive and finite");
    if (std::abs(dr_ * double(n + 1) - r_max) > 4.0 * std::numeric_limits<double>::epsilon() * r_max)
      throw std::logic_error("RadialGrid: dr*(n+1) != r_max at working precision");
  }

  std::size_t n() const noexcept { return n_; }
  double r_max() const noexcept { return r_max_; }
  double dr() const noexcept { return dr_; }
  /// i is zero-based: node r_{i+1}.
  double r(std::size_t i) const noexcept { return double(i + 1) * dr_; }
  /// k is zero-based: frequency rho_{k+1}.
  double rho(std::size_t k) const noexcept { return double(k + 1) * std::numbers::pi / r_max_; }
  double rho_max() const noexcept { return rho(n_ - 1); }

  std::vector<double> nodes() const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = r(i);
    return out;
  }

  friend bool operator==(const RadialGrid& a, const RadialGrid& b) {
    return a.n_ == b.n_ && a.r_max_ == b.r_max_;
  }

 private:
  std::size_t n_ = 0;
  double r_max_ = 0.0;
  double dr_ = 0.0;
};

namespace detail {

inline void check_finite(std::span<const cplx> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag()))
      throw NonFiniteError(std::string(what) + ": non-finite sample", i);
}

// One in-place DST-I plan per size, shared across threads. Plan creation is
// serialized; execution through fftw_execute_r2r on caller buffers is
// re-entrant. FFTW_ESTIMATE keeps the chosen algorithm (and so the rounding)
// independent of timing.
class DstPlanCache {
 public:
  static fftw_plan get(std::size_t n) {
    static DstPlanCache cache;
    std::lock_guard<std::mutex> lock(cache.mutex_);
    auto it = cache.plans_.find(n);
    if (it != cache.plans_.end()) return it->second;
    // Real and imaginary parts of interleaved complex data: two transforms of
    // length n, stride 2, distance 1.
    std::vector<double> scratch(2 * n);
    int len = int(n);
    fftw_r2r_kind kind = FFTW_RODFT00;
    fftw_plan p = fftw_plan_many_r2r(1, &len, 2, scratch.data(), nullptr, 2, 1, scratch.data(), nullptr,
                                     2, 1, &kind, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fftw: failed to create DST-I plan");
    cache.plans_.emplace(n, p);
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

/// Orthonormal DST-I applied in place to both components.
inline void dst1_inplace(std::vector<cplx>& data) {
  const std::size_t n = data.size();
  fftw_plan p = DstPlanCache::get(n);
  double* raw = reinterpret_cast<double*>(data.data());
  fftw_execute_r2r(p, raw, raw);
  const double scale = 1.0 / std::sqrt(2.0 * double(n + 1));
  for (auto& z : data) z *= scale;
}

}  // namespace detail

/// Samples u(r_i) of a radial complex field.
class RadialField {
 public:
  RadialField() = default;
  RadialField(RadialGrid grid, std::vector<cplx> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.n())
      throw std::invalid_argument("RadialField: values length " + std::to_string(values_.size()) +
                                  " != grid.n " + std::to_string(grid_.n()));
    detail::check_finite(values_, "RadialField");
  }

  static RadialField zero(const RadialGrid& grid) { return {grid, std::vector<cplx>(grid.n())}; }

  /// Samples an analytic profile f(r) on the grid.
  template <class F>
  static RadialField sample(const RadialGrid& grid, F&& f) {
    std::vector<cplx> v(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) v[i] = cplx(f(grid.r(i)));
    return {grid, std::move(v)};
  }

  const RadialGrid& grid() const noexcept { return grid_; }
  std::span<const cplx> values() const noexcept { return values_; }
  const cplx& operator[](std::size_t i) const noexcept { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

  /// Moves the samples out; used by kernels that transform in place.
  std::vector<cplx> take_values() && { return std::move(values_); }

 private:
  RadialGrid grid_;
  std::vector<cplx> values_;
};

/// Orthonormal sine coefficients of w = r u.
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(RadialGrid grid, std::vector<cplx> coeffs) : grid_(grid), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != grid_.n()) throw std::invalid_argument("SpectralField: size mismatch");
    detail::check_finite(coeffs_, "SpectralField");
  }

  const RadialGrid& grid() const noexcept { return grid_; }
  std::span<const cplx> coeffs() const noexcept { return coeffs_; }
  const cplx& operator[](std::size_t k) const noexcept { return coeffs_[k]; }
  std::vector<cplx> take_coeffs() && { return std::move(coeffs_); }

 private:
  RadialGrid grid_;
  std::vector<cplx> coeffs_;
};

inline SpectralField to_spectral(const RadialField& field) {
  const auto& g = field.grid();
  std::vector<cplx> w(field.values().begin(), field.values().end());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= g.r(i);
  detail::dst1_inplace(w);
  return {g, std::move(w)};
}

inline RadialField from_spectral(const SpectralField& spec) {
  const auto& g = spec.grid();
  std::vector<cplx> w(spec.coeffs().begin(), spec.coeffs().end());
  detail::dst1_inplace(w);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] /= g.r(i);
  return {g, std::move(w)};
}

namespace detail {

inline void check_order(double s, const char* what) {
  if (!(s >= 0.0 && s <= kMaxSobolevOrder))
    throw std::invalid_argument(std::string(what) + ": order s=" + std::to_string(s) + " outside [0, 4]");
}

}  // namespace detail

/// |nabla|^s as the multiplier rho_k^s on the sine coefficients.
inline SpectralField fractional_apply(const SpectralField& spec, double s) {
  detail::check_order(s, "fractional_apply");
  std::vector<cplx> c(spec.coeffs().begin(), spec.coeffs().end());
  if (s != 0.0)
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= std::pow(spec.grid().rho(k), s);
  return {spec.grid(), std::move(c)};
}

inline RadialField fractional_apply(const RadialField& field, double s) {
  detail::check_order(s, "fractional_apply");
  if (s == 0.0) return field;
  return from_spectral(fractional_apply(to_spectral(field), s));
}

inline double sobolev_norm(const SpectralField& spec, double s) {
  detail::check_order(s, "sobolev_norm");
  const auto& g = spec.grid();
  double acc = 0.0;
  for (std::size_t k = 0; k < g.n(); ++k) {
    const double m = std::norm(spec[k]);
    acc += (s == 0.0 ? m : std::pow(g.rho(k), 2.0 * s) * m);
  }
  return std::sqrt(4.0 * std::numbers::pi * g.dr() * acc);
}

inline double sobolev_norm(const RadialField& field, double s) { return sobolev_norm(to_spectral(field), s); }

/// Radial integral 4 pi int_0^{r_max} f(r) r^2 dr of a per-node integrand.
/// Nodes are the interior points; the integrand vanishes at both ends, so the
/// composite rule is the trapezoid rule with weight dr at every node.
template <class F>
double radial_integral(const RadialGrid& g, F&& integrand_at_node) {
  double acc = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) {
    const double r = g.r(i);
    acc += integrand_at_node(i) * r * r;
  }
  return 4.0 * std::numbers::pi * g.dr() * acc;
}

/// L^p norm on R^3; p = kInfNorm returns the grid maximum (a lower bound of
/// the true supremum).
inline double lebesgue_norm(const RadialField& field, double p) {
  if (p == kInfNorm) {
    double m = 0.0;
    for (const auto& z : field.values()) m = std::max(m, std::abs(z));
    return m;
  }
  if (!(p >= 1.0)) throw std::invalid_argument("lebesgue_norm: p must be >= 1");
  const auto v = field.values();
  if (p == 2.0) return std::sqrt(radial_integral(field.grid(), [&](std::size_t i) { return std::norm(v[i]); }));
  const double total = radial_integral(field.grid(), [&](std::size_t i) { return std::pow(std::abs(v[i]), p); });
  return std::pow(total, 1.0 / p);
}

struct RescaleResult {
  RadialField field;
  /// Fraction of the original L^2 mass mapped beyond r_max.
  double lost_mass_fraction = 0.0;
  bool truncation_warning = false;
};

namespace detail {

// u(0) from the even quartic fit through r_1, r_2, r_3.
inline cplx origin_value(std::span<const cplx> v) { return (15.0 * v[0] - 6.0 * v[1] + v[2]) / 10.0; }

// Cubic (Catmull-Rom) interpolation of samples u(r_i) at radius x, using the
// even extension u(-r) = u(r) at the origin and u = 0 at and beyond r_max.
inline cplx interp_cubic_even(std::span<const cplx> v, const RadialGrid& g, double x) {
  const long n = long(g.n());
  auto at = [&](long j) -> cplx {  // node j corresponds to r = j dr, j in Z
    if (j < 0) j = -j;
    if (j == 0) return origin_value(v);
    if (j > n) return cplx(0.0);
    return v[std::size_t(j - 1)];
  };
  const double s = x / g.dr();
  const long j = long(std::floor(s));
  if (j > n) return cplx(0.0);
  const double t = s - double(j);
  const cplx p0 = at(j - 1), p1 = at(j), p2 = at(j + 1), p3 = at(j + 2);
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

}  // namespace detail

/// u_lambda(r) = lambda^{-1/3} u(r/lambda), resampled by cubic interpolation.
/// Warns when more than 1% of the L^2 mass would leave the grid.
inline RescaleResult rescale(const RadialField& field, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("rescale: lambda must be positive");
  const auto& g = field.grid();
  if (lambda == 1.0) return {field, 0.0, false};
  const auto v = field.values();
  const double amp = std::pow(lambda, -1.0 / 3.0);
  std::vector<cplx> out(g.n());
  for (std::size_t i = 0; i < g.n(); ++i) out[i] = amp * detail::interp_cubic_even(v, g, g.r(i) / lambda);

  double lost = 0.0;
  const double total = radial_integral(g, [&](std::size_t i) { return std::norm(v[i]); });
  if (lambda > 1.0 && total > 0.0) {
    const double r_cut = g.r_max() / lambda;
    lost = radial_integral(g, [&](std::size_t i) { return g.r(i) > r_cut ? std::norm(v[i]) : 0.0; }) / total;
  }
  return {RadialField(g, std::move(out)), lost, lost > 0.01};
}

/// ||u/|x|^alpha||_{L^2} / ||u||_{H^alpha}, alpha in [0, 3/2).
/// The weighted sum carries the endpoint correction for the r^{2-2 alpha}
/// singularity: sum_i h f(r_i) r_i^b = int + zeta(-b) h^{1+b} f(0) + O(h^{3+b}).
inline double hardy_ratio(const RadialField& field, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.5)) throw std::invalid_argument("hardy_ratio: alpha must lie in [0, 3/2)");
  const auto v = field.values();
  const auto& g = field.grid();
  const double denom = sobolev_norm(field, alpha);
  if (!(denom > 0.0)) throw std::invalid_argument("hardy_ratio: zero field");
  const double b = 2.0 - 2.0 * alpha;
  const double sum = radial_integral(g, [&](std::size_t i) { return std::norm(v[i]) * std::pow(g.r(i), -2.0 * alpha); });
  const double origin = 4.0 * std::numbers::pi * std::norm(detail::origin_value(v));
  const double num = sum - std::riemann_zeta(-b) * std::pow(g.dr(), 1.0 + b) * origin;
  return std::sqrt(num) / denom;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr char kCheckpointMagic[4] = {'S', 'N', 'L', 'S'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated record");
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_checkpoint_header(std::ostream& os, const RadialGrid& g) {
  os.write(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint64_t>(os, g.n());
  detail::put_le<double>(os, g.r_max());
}

inline RadialGrid read_checkpoint_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto n = detail::get_le<std::uint64_t>(is);
  const auto r_max = detail::get_le<double>(is);
  return RadialGrid(std::size_t(n), r_max);
}

inline void write_samples(std::ostream& os, std::span<const cplx> v) {
  for (const auto& z : v) {
    detail::put_le<double>(os, z.real());
    detail::put_le<double>(os, z.imag());
  }
}

inline std::vector<cplx> read_samples(std::istream& is, std::size_t n) {
  std::vector<cplx> v(n);
  for (auto& z : v) {
    const double re = detail::get_le<double>(is);
    const double im = detail::get_le<double>(is);
    z = cplx(re, im);
  }
  return v;
}

/// Single-field record: header, then n (re, im) pairs.
inline void write_field(std::ostream& os, const RadialField& f) {
  write_checkpoint_header(os, f.grid());
  write_samples(os, f.values());
}

inline RadialField read_field(std::istream& is) {
  const RadialGrid g = read_checkpoint_header(is);
  return {g, read_samples(is, g.n())};
}

inline void write_field_csv(std::ostream& os, const RadialField& f) {
  os << "r,re_u,im_u\n";
  os.precision(17);
  for (std::size_t i = 0; i < f.size(); ++i) os << f.grid().r(i) << ',' << f[i].real() << ',' << f[i].imag() << '\n';
}

}  // namespace snls
