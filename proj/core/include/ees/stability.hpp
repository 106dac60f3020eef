#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ees/tableau.hpp"

namespace ees::stability {

/// R(rho) = sum_k r_k rho^k from the tableau's stability polynomial.
std::complex<double> stability_function(const ButcherTableau& t, std::complex<double> rho);

struct DeterministicResult {
  bool stable = false;
  double magnitude = 0.0;
};

/// |R(rho)| < 1 test for the deterministic linear test equation.
DeterministicResult deterministic_stable(const ButcherTableau& t, std::complex<double> rho);

/// Left endpoint of the real-axis stability interval (the negative root of
/// |R(rho)| = 1), located by bisection.
double real_stability_boundary(const ButcherTableau& t);

/// Closed-form E[|R(rho)|^2] for rho ~ N(lambda_h, mu2_h) (real Gaussian
/// spread around a possibly complex mean): the polynomial in the Gaussian is
/// expanded and even moments (k-1)!! are applied. Exact to rounding.
double mean_square_expectation(const ButcherTableau& t, std::complex<double> lambda_h,
                               double mu2_h);

/// E[R(rho)] under the same law (for Jensen-type checks).
std::complex<double> expected_stability_function(const ButcherTableau& t,
                                                 std::complex<double> lambda_h, double mu2_h);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of E[|R(rho)|^2]; the sampling path is independent
/// of the moment expansion above.
MonteCarloEstimate mean_square_mc(const ButcherTableau& t, std::complex<double> lambda_h,
                                  double mu2_h, std::int64_t samples, std::uint64_t seed);

/// Raster cross-sections of the mean-square stability domain.
struct RasterSpec {
  enum class Mode {
    real_lambda_vs_mu,   // x = Re(lambda h), y = mu sqrt(h); Im(lambda h) fixed
    complex_lambda_at_mu // x = Re(lambda h), y = Im(lambda h); mu^2 h fixed
  };
  Mode mode = Mode::real_lambda_vs_mu;
  double x_min = -4.0, x_max = 1.0;
  double y_min = -3.0, y_max = 3.0;
  int nx = 400, ny = 400;
  double fixed = 0.0;  // fixed Im(lambda h) or fixed mu^2 h, by mode
  std::string name = "cross-section";
};

struct StabilityRaster {
  RasterSpec spec;
  std::vector<double> values;  // ny x nx row-major, E[|R|^2]

  double x_at(int i) const;
  double y_at(int j) const;
  double value(int i, int j) const { return values[j * spec.nx + i]; }
  bool stable_at(int i, int j) const { return value(i, j) < 1.0; }
};

StabilityRaster ms_raster(const ButcherTableau& t, const RasterSpec& spec);

/// CSV rows "x,y,value"; binary: header (magic, version, nx, ny) then axis
/// bounds and the value grid as little-endian float64.
void write_raster_csv(std::ostream& os, const StabilityRaster& raster);
void write_raster_binary(std::ostream& os, const StabilityRaster& raster);
StabilityRaster read_raster_binary(std::istream& is);

enum class TwoStateScheme { reversible_heun, alf, coupled };

/// Exact 2x2 update matrix of the scheme's two-state recurrence on the
/// linear test equation, in the scaled coordinates (y, h v) where needed.
/// `coupling` applies to the coupled wrapper (base method: explicit Euler).
std::array<std::complex<double>, 4> two_state_update_matrix(TwoStateScheme scheme,
                                                            std::complex<double> rho,
                                                            double coupling = 1.0);

/// Spectral-radius boundedness test of the two-state recurrence; the
/// boundary case |z| = 1 is bounded only when the eigenvalues are distinct.
bool two_state_bounded(TwoStateScheme scheme, std::complex<double> lambda_h,
                       double coupling = 1.0);

/// Direct iteration cross-check: sup-norm of (y_n, v_n) over `steps` steps
/// starting from y_0 = v_0 = 1.
double two_state_growth(TwoStateScheme scheme, std::complex<double> lambda_h, int steps,
                        double coupling = 1.0);

}  // namespace ees::stability
