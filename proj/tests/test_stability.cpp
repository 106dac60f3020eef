#include <doctest.h>

#include <cmath>
#include <complex>
#include <sstream>

#include "ees/rng.hpp"
#include "ees/stability.hpp"
#include "ees/tableau.hpp"

using namespace ees;
using namespace ees::stability;

TEST_CASE("deterministic stability of the EES polynomial") {
  const ButcherTableau tab = ees25(0.1);

  // R(-2) = 1 - 2 + 2 - 1 = 0
  const auto at_minus2 = deterministic_stable(tab, {-2.0, 0.0});
  CHECK(at_minus2.stable);
  CHECK(at_minus2.magnitude == doctest::Approx(0.0).epsilon(1e-14));

  CHECK_FALSE(deterministic_stable(tab, {0.1, 0.0}).stable);
  CHECK_FALSE(deterministic_stable(tab, {-3.2, 0.0}).stable);
  CHECK(deterministic_stable(tab, {-3.0, 0.0}).stable);
}

TEST_CASE("real-axis boundary sits near -3.0877") {
  const double boundary = real_stability_boundary(ees25(0.1));
  CHECK(boundary == doctest::Approx(-3.0877).epsilon(1e-3));
  // independent check: |R| straddles 1 across the boundary
  CHECK(std::abs(stability_function(ees25(0.1), {boundary + 1e-6, 0.0})) < 1.0);
  CHECK(std::abs(stability_function(ees25(0.1), {boundary - 1e-6, 0.0})) > 1.0);
}

TEST_CASE("mean-square expectation: degenerate variance reduces to |R|^2") {
  const ButcherTableau tab = ees25(0.1);
  CHECK(mean_square_expectation(tab, {-1.0, 0.0}, 0.0) ==
        doctest::Approx(0.140625).epsilon(1e-14));
  for (double lh : {-2.5, -1.5, -0.3, 0.2}) {
    const double direct = std::norm(stability_function(tab, {lh, 0.0}));
    CHECK(mean_square_expectation(tab, {lh, 0.0}, 0.0) ==
          doctest::Approx(direct).epsilon(1e-13));
  }
}

TEST_CASE("euler mean-square expectation has the classical closed form") {
  const ButcherTableau euler = classical_tableau("euler");
  for (double lh : {-1.5, -1.0, -0.25, 0.5}) {
    for (double mu2h : {0.0, 0.3, 1.0, 2.5}) {
      CHECK(mean_square_expectation(euler, {lh, 0.0}, mu2h) ==
            doctest::Approx((1.0 + lh) * (1.0 + lh) + mu2h).epsilon(1e-12));
    }
  }
}

TEST_CASE("mean-square expectation matches Monte Carlo") {
  const ButcherTableau tab = ees25(0.1);
  const std::int64_t samples = 1000000;
  int idx = 0;
  for (auto [lh, mu2h] : {std::pair{-1.0, 0.5}, std::pair{-2.0, 1.0}, std::pair{-0.5, 0.25}}) {
    const double exact = mean_square_expectation(tab, {lh, 0.0}, mu2h);
    const auto mc = mean_square_mc(tab, {lh, 0.0}, mu2h, samples, 900 + idx++);
    CHECK(std::abs(exact - mc.mean) < 3.0 * mc.standard_error);
  }
}

TEST_CASE("mean-square expectation with complex mean") {
  // MC cross-check with an imaginary part in lambda h
  const ButcherTableau rk3 = classical_tableau("kutta_rk3");
  const std::complex<double> lh(-0.8, 0.6);
  const double mu2h = 0.4;
  const double exact = mean_square_expectation(rk3, lh, mu2h);
  const auto mc = mean_square_mc(rk3, lh, mu2h, 2000000, 1234);
  CHECK(std::abs(exact - mc.mean) < 3.0 * mc.standard_error);
}

TEST_CASE("jensen inequality holds pointwise") {
  const ButcherTableau tab = ees25(0.1);
  for (double lh = -3.0; lh <= 0.5; lh += 0.35) {
    for (double mu2h : {0.1, 0.5, 1.5}) {
      const double ms = mean_square_expectation(tab, {lh, 0.0}, mu2h);
      const std::complex<double> mean_r = expected_stability_function(tab, {lh, 0.0}, mu2h);
      CHECK(ms >= std::norm(mean_r) - 1e-12);
    }
  }
}

TEST_CASE("negative variance is rejected") {
  CHECK_THROWS_AS(mean_square_expectation(ees25(0.1), {0.0, 0.0}, -1.0), std::invalid_argument);
}

TEST_CASE("raster cross-sections") {
  const ButcherTableau tab = ees25(0.1);
  RasterSpec spec;
  spec.mode = RasterSpec::Mode::real_lambda_vs_mu;
  spec.x_min = -4.0;
  spec.x_max = 0.5;
  spec.nx = 64;
  spec.y_min = -2.0;
  spec.y_max = 2.0;
  spec.ny = 33;  // odd: includes a row at mu = 0
  const StabilityRaster raster = ms_raster(tab, spec);

  // the mu ~ 0 row agrees with the deterministic test along the real axis
  const int j_mid = 16;
  CHECK(std::abs(raster.y_at(j_mid)) < 1e-12);
  for (int i = 0; i < spec.nx; ++i) {
    const double x = raster.x_at(i);
    const bool det = deterministic_stable(tab, {x, 0.0}).stable;
    CHECK(raster.stable_at(i, j_mid) == det);
  }

  // symmetry under mu -> -mu
  for (int i = 0; i < spec.nx; i += 7) {
    for (int j = 0; j < 16; ++j) {
      CHECK(raster.value(i, j) ==
            doctest::Approx(raster.value(i, spec.ny - 1 - j)).epsilon(1e-12));
    }
  }

  // real-axis intercepts bracket the deterministic interval
  bool stable_inside = false, unstable_left = false;
  for (int i = 0; i < spec.nx; ++i) {
    const double x = raster.x_at(i);
    if (x > -3.0 && x < -0.2 && raster.stable_at(i, j_mid)) stable_inside = true;
    if (x < -3.2 && !raster.stable_at(i, j_mid)) unstable_left = true;
  }
  CHECK(stable_inside);
  CHECK(unstable_left);

  // EES stays stable at a point where Euler does not
  const StabilityRaster euler_raster = ms_raster(classical_tableau("euler"), spec);
  bool richer = false;
  for (int j = 0; j < spec.ny; ++j) {
    for (int i = 0; i < spec.nx; ++i) {
      if (raster.stable_at(i, j) && !euler_raster.stable_at(i, j)) richer = true;
    }
  }
  CHECK(richer);
}

TEST_CASE("raster binary round-trip") {
  RasterSpec spec;
  spec.nx = 8;
  spec.ny = 5;
  const StabilityRaster raster = ms_raster(classical_tableau("rk4"), spec);
  std::stringstream buffer;
  write_raster_binary(buffer, raster);
  const StabilityRaster back = read_raster_binary(buffer);
  CHECK(back.spec.nx == raster.spec.nx);
  CHECK(back.spec.ny == raster.spec.ny);
  CHECK(back.values == raster.values);

  std::ostringstream csv;
  write_raster_csv(csv, raster);
  CHECK(csv.str().find("x,y,value\n") == 0);
}

TEST_CASE("two-state schemes are bounded exactly on the imaginary segment") {
  using enum TwoStateScheme;
  // bounded iff lambda h in [-i, i]
  CHECK(two_state_bounded(reversible_heun, {0.0, 0.5}));
  CHECK(two_state_bounded(reversible_heun, {0.0, -0.9}));
  CHECK(two_state_bounded(reversible_heun, {0.0, 0.0}));
  CHECK_FALSE(two_state_bounded(reversible_heun, {-0.5, 0.0}));
  CHECK_FALSE(two_state_bounded(reversible_heun, {0.1, 0.0}));
  CHECK_FALSE(two_state_bounded(reversible_heun, {0.0, 1.5}));

  // ALF shares the stability region
  CHECK(two_state_bounded(alf, {0.0, 0.5}));
  CHECK_FALSE(two_state_bounded(alf, {-0.5, 0.0}));
}

TEST_CASE("spectral test agrees with direct iteration") {
  using enum TwoStateScheme;
  for (const auto scheme : {reversible_heun, alf}) {
    for (double re = -0.8; re <= 0.81; re += 0.4) {
      for (double im = -1.2; im <= 1.21; im += 0.4) {
        const std::complex<double> rho(re, im);
        const bool bounded = two_state_bounded(scheme, rho);
        const double growth = two_state_growth(scheme, rho, 4000);
        if (bounded) {
          CHECK(growth < 1e4);
        } else {
          CHECK(growth > 1e4);
        }
      }
    }
  }
}

TEST_CASE("coupled wrapper stability depends on the coupling") {
  using enum TwoStateScheme;
  // at rho = -0.5 the coupled Euler wrapper with lambda = 1 is unstable,
  // like the other two-state schemes at that point
  CHECK_FALSE(two_state_bounded(coupled, {-0.5, 0.0}, 1.0));
  const double growth = two_state_growth(coupled, {-0.5, 0.0}, 500, 1.0);
  CHECK(growth > 1e3);
}
