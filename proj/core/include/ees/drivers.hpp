#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace ees {

/// Equidistant grid of `steps` intervals on [t0, t_end].
struct TimeGrid {
  double t0 = 0.0;
  double t_end = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double t0, double t_end, int steps);

  double h() const { return (t_end - t0) / steps; }
  double time_at(int n) const { return t0 + n * h(); }
};

/// Per-step increments of a driving path over a time grid. Channel 0 is the
/// time channel (value h each step for generated paths); channels 1..d carry
/// the noise increments. Immutable after creation; safe to share.
class DriverPath {
 public:
  DriverPath(TimeGrid grid, int noise_channels, std::vector<double> increments,
             std::uint64_t seed = 0, double hurst = 0.5);

  const TimeGrid& grid() const { return grid_; }
  int noise_channels() const { return noise_channels_; }
  int channels() const { return noise_channels_ + 1; }
  int steps() const { return grid_.steps; }
  std::uint64_t seed() const { return seed_; }
  double hurst() const { return hurst_; }

  /// Row of d+1 increments for step n.
  std::span<const double> increment(int n) const;
  double at(int n, int channel) const;

  /// Path with all increment signs flipped (drives the reverse-time scheme).
  DriverPath negated() const;

  /// Exact coarse path: increment n is the sum of `factor` consecutive fine
  /// increments. Requires factor to divide the step count.
  DriverPath coarsen(int factor) const;

 private:
  TimeGrid grid_;
  int noise_channels_;
  std::uint64_t seed_;
  double hurst_;
  std::vector<double> increments_;  // steps x (d+1), row-major
};

/// d channels of i.i.d. N(0, h) increments; fully determined by the seed.
DriverPath brownian_path(const TimeGrid& grid, int d, std::uint64_t seed);

/// d independent fractional Brownian motion increment channels with Hurst
/// index H in (1/4, 1). Exact sampling: circulant embedding (Davies-Harte)
/// with a covariance-factorization fallback.
DriverPath fbm_path(const TimeGrid& grid, int d, double hurst, std::uint64_t seed);

/// All-zero increments (including the time channel); test/diagnostic driver.
DriverPath zero_path(const TimeGrid& grid, int d);

/// Conditionally refines a Brownian path by `factor` using bridge fill-in;
/// summing each group of fine increments recovers the coarse increment
/// exactly. fBm paths are not conditionally refinable here: generate at the
/// finest grid and coarsen instead (throws std::invalid_argument).
DriverPath refine(const DriverPath& path, int factor);

/// Autocovariance of fBm increments at lag k for step h (variance at k = 0).
double fgn_autocovariance(double hurst, double h, int lag);

// Binary dump: an 8-field little-endian header (magic, version, N, d,
// H*1e6 as integer, seed, t0, t_end) followed by N x (d+1) float64
// increments, row-major.
void write_path(std::ostream& os, const DriverPath& path);
DriverPath read_path(std::istream& is);

}  // namespace ees
