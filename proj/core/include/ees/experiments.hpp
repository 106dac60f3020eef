#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ees/stability.hpp"
#include "ees/tableau.hpp"

namespace ees::experiments {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

/// Least-squares slope of log(err) against log(h), with its standard error.
SlopeFit fit_loglog(std::span<const double> h, std::span<const double> err);

// Closed-form oracles shared by the experiments and their tests.
double normal_cdf(double x);
/// Undiscounted call price E[(S_t - K)^+] under GBM dS = r S dt + sigma S dW.
double gbm_call_price(double s0, double r, double sigma, double strike, double t);
/// One exact Ornstein-Uhlenbeck transition y -> mu + (y - mu) e^{-nu h} + sd z.
double ou_exact_step(double y, double nu, double mu, double sigma, double h, double z);
double ou_decay(double nu, double h);
double ou_transition_sd(double nu, double sigma, double h);
/// Mean/variance of the OU marginal at time t started from N(m0, v0).
double ou_mean(double t, double nu, double mu, double m0);
double ou_variance(double t, double nu, double sigma, double v0);

enum class SolverChoice { ees25, reversible_heun };
SolverChoice solver_from_name(const std::string& name);
std::string solver_name(SolverChoice);

// ---------------------------------------------------------------------------
// Convergence study on dy = cos(y) dX^1 + sin(y) dX^2 driven by fBm.

struct ConvergenceConfig {
  double hurst = 0.5;
  int realizations = 10;
  int coarsest_exponent = 4;  // h = 2^-k, k = coarsest..finest
  int finest_exponent = 8;
  int reference_factor = 32;  // reference solves at h_min / factor
  double x = 0.1;             // EES tableau parameter
  double y0 = 1.0;
  std::uint64_t seed = 2;
};

struct ConvergenceReport {
  std::vector<double> step_sizes;
  std::vector<double> forward_errors;   // E(h): mean max deviation from the reference
  std::vector<double> backward_errors;  // Ebar(h): mean |y0 - y0_reconstructed|
  SlopeFit forward_fit;
  SlopeFit backward_fit;
  double expected_forward_rate = 0.0;   // 2H - 1/2
  double expected_backward_rate = 0.0;  // 6H - 1
  double wall_seconds = 0.0;
};

ConvergenceReport run_convergence(const ConvergenceConfig& config);

// ---------------------------------------------------------------------------
// Neural Langevin SDE trained on high-volatility OU moments.

struct OuConfig {
  double nu = 0.2, mu = 0.1, sigma = 2.0;
  int obs_dim = 2;
  int latent_dim = 32;
  int width = 32;
  int layers = 2;  // weight layers per net
  double t_end = 10.0;
  double step = 0.1;
  int epochs = 50;
  int samples = 5000;
  double lr = 1e-3;
  SolverChoice solver = SolverChoice::ees25;
  double x = 0.1;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  std::vector<bool> epoch_finite;
  double wall_seconds = 0.0;

  bool all_finite() const;
  bool any_nonfinite() const;
  /// Loss of the last epoch; +inf when that epoch was non-finite.
  double final_loss() const;
};

TrainReport run_ou(const OuConfig& config);

// ---------------------------------------------------------------------------
// Neural SDE calibrated to GBM call prices.

struct GbmConfig {
  double r = 0.5, sigma = 1.5;
  double s0 = 100.0;
  int strike_lo = 90, strike_hi = 110;
  double maturity_spacing = 2.5;
  int maturities = 10;  // 2.5, 5, ..., 25
  double step = 0.25;
  int width = 8;
  int layers = 3;
  int epochs = 50;
  int samples = 20000;
  double lr0 = 1e-2;
  double lr_decay = 0.99;
  SolverChoice solver = SolverChoice::ees25;
  double x = 0.1;
  std::uint64_t seed = 2;
};

TrainReport run_gbm(const GbmConfig& config);

// ---------------------------------------------------------------------------
// Stability rasters and order/symmetry certification.

struct StabilityRunConfig {
  std::vector<std::string> tableaus = {"ees25", "kutta_rk3", "rk4"};
  double x = 0.1;
  int resolution = 400;
  // axis windows shared by the four cross-sections
  double x_min = -4.0, x_max = 1.0;
  double y_min = -3.0, y_max = 3.0;
  // fixed Im(lambda h) of the second section and mu^2 h of the fourth
  double fixed_im = 1.0;
  double fixed_mu2h = 0.5;
  std::string out_dir = "out";
};

struct StabilityRunReport {
  double ees_real_axis_boundary = 0.0;
  std::vector<std::string> files_written;
};

StabilityRunReport run_stability(const StabilityRunConfig& config);

struct CertifyConfig {
  std::string tableau = "ees25";
  double x = 0.1;
  int max_order = 6;
};

struct CertifyReport {
  std::string name;
  int order = 0;
  std::vector<double> symmetry_residuals;  // per order 1..max_order
  int symmetric_through = 0;               // longest prefix of residuals <= 1e-12

  std::string text() const;
};

CertifyReport run_certify(const CertifyConfig& config);

// ---------------------------------------------------------------------------
// JSON run reports (config echo + seed + library version) and config parsing
// for the CLI. Unknown keys are rejected to catch config typos.

std::string to_json(const ConvergenceConfig&, const ConvergenceReport&);
std::string to_json(const OuConfig&, const TrainReport&);
std::string to_json(const GbmConfig&, const TrainReport&);
std::string to_json(const CertifyConfig&, const CertifyReport&);

ConvergenceConfig convergence_config_from_json(const std::string& text);
OuConfig ou_config_from_json(const std::string& text);
GbmConfig gbm_config_from_json(const std::string& text);

ButcherTableau tableau_by_name(const std::string& name, double x);

}  // namespace ees::experiments
