#include "ees/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "ees/rng.hpp"

namespace ees::stability {

std::complex<double> stability_function(const ButcherTableau& t, std::complex<double> rho) {
  const std::vector<double> coeffs = stability_polynomial(t);
  std::complex<double> acc(0.0, 0.0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * rho + *it;
  return acc;
}

DeterministicResult deterministic_stable(const ButcherTableau& t, std::complex<double> rho) {
  const double magnitude = std::abs(stability_function(t, rho));
  return {magnitude < 1.0, magnitude};
}

double real_stability_boundary(const ButcherTableau& t) {
  // |R| < 1 just right of the boundary, >= 1 at and beyond it. Bracket
  // outward from -1e-3 until |R| >= 1, then bisect.
  double inside = -1e-3;
  double outside = -1.0;
  while (std::abs(stability_function(t, outside)) < 1.0) {
    inside = outside;
    outside *= 2.0;
    if (outside < -1e6) throw std::runtime_error("real_stability_boundary: no boundary found");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (inside + outside);
    if (std::abs(stability_function(t, mid)) < 1.0) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return 0.5 * (inside + outside);
}

namespace {

double double_factorial_odd(int n) {
  // (n-1)!! for even n; n <= ~32 in practice.
  double acc = 1.0;
  for (int k = n - 1; k >= 1; k -= 2) acc *= k;
  return acc;
}

// Coefficients p_j of R(a + sigma Z) = sum_j p_j Z^j.
std::vector<std::complex<double>> gaussian_polynomial(const ButcherTableau& t,
                                                      std::complex<double> a, double sigma) {
  const std::vector<double> r = stability_polynomial(t);
  const int degree = static_cast<int>(r.size()) - 1;

  std::vector<std::vector<double>> binom(degree + 1);
  binom[0] = {1.0};
  for (int k = 1; k <= degree; ++k) {
    binom[k].assign(k + 1, 1.0);
    for (int j = 1; j < k; ++j) {
      binom[k][j] =
          binom[k - 1][j - 1] +
          binom[k - 1][j];
    }
  }

  std::vector<std::complex<double>> p(degree + 1, 0.0);
  for (int k = 0; k <= degree; ++k) {
    std::complex<double> a_pow(1.0, 0.0);
    std::vector<std::complex<double>> a_powers(k + 1);
    for (int j = 0; j <= k; ++j) {
      a_powers[j] = a_pow;
      a_pow *= a;
    }
    double sigma_pow = 1.0;
    for (int j = 0; j <= k; ++j) {
      // term C(k, j) a^{k-j} (sigma Z)^j
      p[j] += r[k] *
                                        binom[k][j] *
                                        a_powers[k - j] * sigma_pow;
      sigma_pow *= sigma;
    }
  }
  return p;
}

}  // namespace

double mean_square_expectation(const ButcherTableau& t, std::complex<double> lambda_h,
                               double mu2_h) {
  if (mu2_h < 0.0) throw std::invalid_argument("mean_square_expectation: negative variance");
  const double sigma = std::sqrt(mu2_h);
  const auto p = gaussian_polynomial(t, lambda_h, sigma);
  const int degree = static_cast<int>(p.size()) - 1;
  double acc = 0.0;
  for (int j = 0; j <= degree; ++j) {
    for (int l = 0; l <= degree; ++l) {
      if ((j + l) % 2 != 0) continue;  // odd Gaussian moments vanish
      const double moment = double_factorial_odd(j + l);
      acc += (p[j] * std::conj(p[l])).real() *
             moment;
    }
  }
  return acc;
}

std::complex<double> expected_stability_function(const ButcherTableau& t,
                                                 std::complex<double> lambda_h, double mu2_h) {
  if (mu2_h < 0.0) throw std::invalid_argument("expected_stability_function: negative variance");
  const auto p = gaussian_polynomial(t, lambda_h, std::sqrt(mu2_h));
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j % 2 != 0) continue;
    acc += p[j] * double_factorial_odd(static_cast<int>(j));
  }
  return acc;
}

MonteCarloEstimate mean_square_mc(const ButcherTableau& t, std::complex<double> lambda_h,
                                  double mu2_h, std::int64_t samples, std::uint64_t seed) {
  const std::vector<double> coeffs = stability_polynomial(t);
  const double sigma = std::sqrt(mu2_h);
  rng::NormalStream gauss(seed, 0x4d43ULL);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::int64_t i = 0; i < samples; ++i) {
    const std::complex<double> rho = lambda_h + sigma * gauss.next();
    std::complex<double> r(0.0, 0.0);
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) r = r * rho + *it;
    const double value = std::norm(r);
    sum += value;
    sum_sq += value * value;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double variance = std::max(0.0, sum_sq / n - mean * mean);
  return {mean, std::sqrt(variance / n)};
}

double StabilityRaster::x_at(int i) const {
  return spec.x_min + (spec.x_max - spec.x_min) * (i + 0.5) / spec.nx;
}

double StabilityRaster::y_at(int j) const {
  return spec.y_min + (spec.y_max - spec.y_min) * (j + 0.5) / spec.ny;
}

StabilityRaster ms_raster(const ButcherTableau& t, const RasterSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1) throw std::invalid_argument("ms_raster: empty axes");
  StabilityRaster raster;
  raster.spec = spec;
  raster.values.resize(spec.nx * spec.ny);
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      const double x = raster.x_at(i);
      const double y = raster.y_at(j);
      double value = 0.0;
      if (spec.mode == RasterSpec::Mode::real_lambda_vs_mu) {
        value = mean_square_expectation(t, {x, spec.fixed}, y * y);
      } else {
        value = mean_square_expectation(t, {x, y}, spec.fixed);
      }
      raster.values[j * spec.nx + i] = value;
    }
  }
  return raster;
}

void write_raster_csv(std::ostream& os, const StabilityRaster& raster) {
  os << "x,y,value\n";
  os.precision(12);
  for (int j = 0; j < raster.spec.ny; ++j) {
    for (int i = 0; i < raster.spec.nx; ++i) {
      os << raster.x_at(i) << ',' << raster.y_at(j) << ',' << raster.value(i, j) << "\n";
    }
  }
}

namespace {

constexpr std::uint64_t kRasterMagic = 0x4545535241535452ULL;  // "EESRASTR"
constexpr std::uint64_t kRasterVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("read_raster_binary: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void write_raster_binary(std::ostream& os, const StabilityRaster& raster) {
  put_u64(os, kRasterMagic);
  put_u64(os, kRasterVersion);
  put_u64(os, static_cast<std::uint64_t>(raster.spec.nx));
  put_u64(os, static_cast<std::uint64_t>(raster.spec.ny));
  put_f64(os, raster.spec.x_min);
  put_f64(os, raster.spec.x_max);
  put_f64(os, raster.spec.y_min);
  put_f64(os, raster.spec.y_max);
  for (double v : raster.values) put_f64(os, v);
}

StabilityRaster read_raster_binary(std::istream& is) {
  if (get_u64(is) != kRasterMagic) throw std::runtime_error("read_raster_binary: bad magic");
  if (get_u64(is) != kRasterVersion) {
    throw std::runtime_error("read_raster_binary: unsupported version");
  }
  StabilityRaster raster;
  raster.spec.nx = static_cast<int>(get_u64(is));
  raster.spec.ny = static_cast<int>(get_u64(is));
  raster.spec.x_min = get_f64(is);
  raster.spec.x_max = get_f64(is);
  raster.spec.y_min = get_f64(is);
  raster.spec.y_max = get_f64(is);
  raster.values.resize(raster.spec.nx * raster.spec.ny);
  for (double& v : raster.values) v = get_f64(is);
  return raster;
}

std::array<std::complex<double>, 4> two_state_update_matrix(TwoStateScheme scheme,
                                                            std::complex<double> rho,
                                                            double coupling) {
  using C = std::complex<double>;
  switch (scheme) {
    case TwoStateScheme::reversible_heun:
      // y' = (1 + rho) y + (rho^2 / 2) v;  v' = 2 y + (rho - 1) v
      return {C(1.0) + rho, rho * rho * 0.5, C(2.0), rho - C(1.0)};
    case TwoStateScheme::alf:
      // in coordinates (y, h v): y' = (1 + rho) y + (rho / 2) w;
      // w' = 2 rho y + (rho - 1) w
      return {C(1.0) + rho, rho * 0.5, 2.0 * rho, rho - C(1.0)};
    case TwoStateScheme::coupled: {
      // base method explicit Euler: Psi_h = rho * state
      const C c(coupling);
      const C top_right = C(1.0) - c + rho;
      return {c, top_right, rho * c, C(1.0) + rho * top_right};
    }
  }
  throw std::invalid_argument("two_state_update_matrix: unknown scheme");
}

bool two_state_bounded(TwoStateScheme scheme, std::complex<double> lambda_h, double coupling) {
  const auto m = two_state_update_matrix(scheme, lambda_h, coupling);
  const std::complex<double> trace = m[0] + m[3];
  const std::complex<double> det = m[0] * m[3] - m[1] * m[2];
  const std::complex<double> disc = std::sqrt(trace * trace - 4.0 * det);
  const std::complex<double> z1 = 0.5 * (trace + disc);
  const std::complex<double> z2 = 0.5 * (trace - disc);
  const double radius = std::max(std::abs(z1), std::abs(z2));

  constexpr double kTol = 1e-10;
  if (radius > 1.0 + kTol) return false;
  if (radius < 1.0 - kTol) return true;
  // on the unit circle: bounded iff the matrix is not defective
  return std::abs(z1 - z2) > 1e-8 * (1.0 + radius);
}

double two_state_growth(TwoStateScheme scheme, std::complex<double> lambda_h, int steps,
                        double coupling) {
  const auto m = two_state_update_matrix(scheme, lambda_h, coupling);
  std::complex<double> y(1.0, 0.0), v(1.0, 0.0);
  double sup = std::max(std::abs(y), std::abs(v));
  for (int n = 0; n < steps; ++n) {
    const std::complex<double> y_next = m[0] * y + m[1] * v;
    const std::complex<double> v_next = m[2] * y + m[3] * v;
    y = y_next;
    v = v_next;
    sup = std::max({sup, std::abs(y), std::abs(v)});
    if (sup > 1e300) break;
  }
  return sup;
}

}  // namespace ees::stability
