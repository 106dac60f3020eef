#include "ees/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ees/rng.hpp"

namespace ees {

namespace {

// Stream tags keep the per-purpose counter streams disjoint.
constexpr std::uint64_t kBrownianStream = 0x42570000ULL;
constexpr std::uint64_t kFbmStream = 0x46420000ULL;
constexpr std::uint64_t kBridgeStream = 0x42520000ULL;

}  // namespace

TimeGrid::TimeGrid(double t0, double t_end, int steps) : t0(t0), t_end(t_end), steps(steps) {
  if (steps < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
  if (!(t_end > t0)) throw std::invalid_argument("TimeGrid: need t_end > t0");
}

DriverPath::DriverPath(TimeGrid grid, int noise_channels, std::vector<double> increments,
                       std::uint64_t seed, double hurst)
    : grid_(grid), noise_channels_(noise_channels), seed_(seed), hurst_(hurst),
      increments_(std::move(increments)) {
  if (noise_channels < 0) throw std::invalid_argument("DriverPath: need d >= 0");
  const std::size_t expected =
      grid_.steps * static_cast<std::size_t>(channels());
  if (increments_.size() != expected) {
    throw std::invalid_argument("DriverPath: increment array does not match grid");
  }
}

std::span<const double> DriverPath::increment(int n) const {
  return {increments_.data() + n * channels(),
          static_cast<std::size_t>(channels())};
}

double DriverPath::at(int n, int channel) const {
  return increments_[n * channels() + channel];
}

DriverPath DriverPath::negated() const {
  std::vector<double> flipped(increments_.size());
  for (std::size_t i = 0; i < increments_.size(); ++i) flipped[i] = -increments_[i];
  return DriverPath(grid_, noise_channels_, std::move(flipped), seed_, hurst_);
}

DriverPath DriverPath::coarsen(int factor) const {
  if (factor < 1 || grid_.steps % factor != 0) {
    throw std::invalid_argument("DriverPath::coarsen: factor must divide the step count");
  }
  const int coarse_steps = grid_.steps / factor;
  const int ch = channels();
  std::vector<double> coarse(coarse_steps * ch, 0.0);
  for (int n = 0; n < grid_.steps; ++n) {
    const int cn = n / factor;
    for (int m = 0; m < ch; ++m) {
      coarse[cn * ch + m] += at(n, m);
    }
  }
  return DriverPath(TimeGrid(grid_.t0, grid_.t_end, coarse_steps), noise_channels_,
                    std::move(coarse), seed_, hurst_);
}

DriverPath brownian_path(const TimeGrid& grid, int d, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("brownian_path: need d >= 1");
  const int ch = d + 1;
  const double h = grid.h();
  const double scale = std::sqrt(h);
  std::vector<double> inc(grid.steps * ch);
  for (int m = 1; m <= d; ++m) {
    rng::NormalStream stream(seed, kBrownianStream + static_cast<std::uint64_t>(m));
    for (int n = 0; n < grid.steps; ++n) {
      inc[n * ch + m] = scale * stream.next();
    }
  }
  for (int n = 0; n < grid.steps; ++n) inc[n * ch] = h;
  return DriverPath(grid, d, std::move(inc), seed, 0.5);
}

double fgn_autocovariance(double hurst, double h, int lag) {
  const double two_h = 2.0 * hurst;
  const double k = static_cast<double>(std::abs(lag));
  const double cov =
      0.5 * (std::pow(k + 1.0, two_h) - 2.0 * std::pow(k, two_h) +
             std::pow(std::abs(k - 1.0), two_h));
  return cov * std::pow(h, two_h);
}

namespace {

// In-place iterative radix-2 FFT; n must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Davies-Harte: exact fGn sampling through the circulant embedding of the
// increment covariance. Returns false if an eigenvalue is materially
// negative (caller falls back to Cholesky).
bool sample_fgn_circulant(double hurst, double h, int n, std::uint64_t seed,
                          std::uint64_t stream, std::vector<double>& out) {
  const std::size_t m = next_pow2(2 * static_cast<std::size_t>(n));
  std::vector<std::complex<double>> row(m);
  for (std::size_t j = 0; j <= m / 2; ++j) {
    row[j] = fgn_autocovariance(hurst, h, static_cast<int>(j));
  }
  for (std::size_t j = m / 2 + 1; j < m; ++j) row[j] = row[m - j];
  fft(row, false);

  double max_eig = 0.0;
  for (const auto& lambda : row) max_eig = std::max(max_eig, lambda.real());
  for (auto& lambda : row) {
    double value = lambda.real();
    if (value < 0.0) {
      if (value < -1e-9 * max_eig) return false;
      value = 0.0;
    }
    lambda = value;
  }

  rng::NormalStream gauss(seed, stream);
  std::vector<std::complex<double>> spectrum(m);
  spectrum[0] = std::sqrt(row[0].real()) * gauss.next();
  spectrum[m / 2] = std::sqrt(row[m / 2].real()) * gauss.next();
  for (std::size_t k = 1; k < m / 2; ++k) {
    const double amp = std::sqrt(0.5 * row[k].real());
    const std::complex<double> z(amp * gauss.next(), amp * gauss.next());
    spectrum[k] = z;
    spectrum[m - k] = std::conj(z);
  }
  fft(spectrum, false);

  out.resize(n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(m));
  for (int j = 0; j < n; ++j) out[j] = spectrum[j].real() * norm;
  return true;
}

void sample_fgn_cholesky(double hurst, double h, int n, std::uint64_t seed,
                         std::uint64_t stream, std::vector<double>& out) {
  if (n > 4096) {
    throw std::runtime_error("fbm_path: covariance factorization limited to 4096 steps");
  }
  const std::size_t sz = static_cast<std::size_t>(n);
  std::vector<double> chol(sz * sz, 0.0);
  for (std::size_t i = 0; i < sz; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double value = fgn_autocovariance(hurst, h, static_cast<int>(i - j));
      for (std::size_t k = 0; k < j; ++k) value -= chol[i * sz + k] * chol[j * sz + k];
      if (i == j) {
        if (value <= 0.0) throw std::runtime_error("fbm_path: covariance not positive definite");
        chol[i * sz + i] = std::sqrt(value);
      } else {
        chol[i * sz + j] = value / chol[j * sz + j];
      }
    }
  }
  rng::NormalStream gauss(seed, stream);
  std::vector<double> z(sz);
  for (auto& v : z) v = gauss.next();
  out.assign(sz, 0.0);
  for (std::size_t i = 0; i < sz; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += chol[i * sz + j] * z[j];
    out[i] = acc;
  }
}

}  // namespace

DriverPath fbm_path(const TimeGrid& grid, int d, double hurst, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("fbm_path: need d >= 1");
  if (!(hurst > 0.25 && hurst < 1.0)) {
    throw std::invalid_argument("fbm_path: hurst index must lie in (1/4, 1)");
  }
  const int ch = d + 1;
  const double h = grid.h();
  std::vector<double> inc(grid.steps * ch);
  std::vector<double> channel;
  for (int m = 1; m <= d; ++m) {
    const std::uint64_t stream = kFbmStream + static_cast<std::uint64_t>(m);
    if (!sample_fgn_circulant(hurst, h, grid.steps, seed, stream, channel)) {
      sample_fgn_cholesky(hurst, h, grid.steps, seed, stream, channel);
    }
    for (int n = 0; n < grid.steps; ++n) {
      inc[n * ch + m] = channel[n];
    }
  }
  for (int n = 0; n < grid.steps; ++n) inc[n * ch] = h;
  return DriverPath(grid, d, std::move(inc), seed, hurst);
}

DriverPath zero_path(const TimeGrid& grid, int d) {
  return DriverPath(grid, d,
                    std::vector<double>(static_cast<std::size_t>(grid.steps) * (d + 1), 0.0));
}

DriverPath refine(const DriverPath& path, int factor) {
  if (factor < 1) throw std::invalid_argument("refine: factor must be >= 1");
  if (factor == 1) return path;
  if (path.hurst() != 0.5) {
    throw std::invalid_argument(
        "refine: fBm paths are not conditionally refinable; generate at the finest grid "
        "and coarsen");
  }

  const int fine_steps = path.steps() * factor;
  const int ch = path.channels();
  const double h_fine = path.grid().h() / factor;
  std::vector<double> inc(fine_steps * ch, 0.0);

  // Brownian bridge: split each coarse increment recursively in halves would
  // restrict factor to powers of two; instead condition sequentially. Given
  // remaining sum S over r sub-steps, the first sub-step is
  // N(S/r, h*(r-1)/r), and the residual stays exact by subtraction.
  for (int m = 1; m < ch; ++m) {
    rng::NormalStream gauss(path.seed() ^ (0x9e37ULL * static_cast<std::uint64_t>(factor)),
                            kBridgeStream + static_cast<std::uint64_t>(m));
    for (int n = 0; n < path.steps(); ++n) {
      double remaining = path.at(n, m);
      for (int k = 0; k < factor; ++k) {
        const int r = factor - k;
        const std::size_t idx =
            static_cast<std::size_t>(n * factor + k) * ch + static_cast<std::size_t>(m);
        if (r == 1) {
          inc[idx] = remaining;
          break;
        }
        const double mean = remaining / r;
        const double sd = std::sqrt(h_fine * (r - 1) / static_cast<double>(r));
        const double value = mean + sd * gauss.next();
        inc[idx] = value;
        remaining -= value;
      }
    }
  }
  for (int n = 0; n < fine_steps; ++n) inc[n * ch] = h_fine;
  return DriverPath(TimeGrid(path.grid().t0, path.grid().t_end, fine_steps),
                    path.noise_channels(), std::move(inc), path.seed(), path.hurst());
}

namespace {

constexpr std::uint64_t kPathMagic = 0x4545535044524956ULL;  // "EESPDRIV"
constexpr std::uint64_t kPathVersion = 1;

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
  if (!is) throw std::runtime_error("read_path: truncated stream");
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

void write_path(std::ostream& os, const DriverPath& path) {
  put_u64(os, kPathMagic);
  put_u64(os, kPathVersion);
  put_u64(os, static_cast<std::uint64_t>(path.steps()));
  put_u64(os, static_cast<std::uint64_t>(path.noise_channels()));
  put_u64(os, static_cast<std::uint64_t>(std::llround(path.hurst() * 1e6)));
  put_u64(os, path.seed());
  put_f64(os, path.grid().t0);
  put_f64(os, path.grid().t_end);
  for (int n = 0; n < path.steps(); ++n) {
    for (int m = 0; m < path.channels(); ++m) put_f64(os, path.at(n, m));
  }
}

DriverPath read_path(std::istream& is) {
  if (get_u64(is) != kPathMagic) throw std::runtime_error("read_path: bad magic");
  if (get_u64(is) != kPathVersion) throw std::runtime_error("read_path: unsupported version");
  const auto steps = static_cast<int>(get_u64(is));
  const auto d = static_cast<int>(get_u64(is));
  const double hurst = static_cast<double>(get_u64(is)) / 1e6;
  const std::uint64_t seed = get_u64(is);
  const double t0 = get_f64(is);
  const double t_end = get_f64(is);
  std::vector<double> inc(static_cast<std::size_t>(steps) * (d + 1));
  for (auto& v : inc) v = get_f64(is);
  return DriverPath(TimeGrid(t0, t_end, steps), d, std::move(inc), seed, hurst);
}

}  // namespace ees
