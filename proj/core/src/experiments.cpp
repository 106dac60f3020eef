#include "ees/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ees/drivers.hpp"
#include "ees/fields.hpp"
#include "ees/mlp.hpp"
#include "ees/revgrad.hpp"
#include "ees/rng.hpp"
#include "ees/solvers.hpp"
#include "ees/trees.hpp"
#include "ees/version.hpp"

namespace ees::experiments {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool finite(double v) { return std::isfinite(v); }

bool all_finite_span(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

SlopeFit fit_loglog(std::span<const double> h, std::span<const double> err) {
  if (h.size() != err.size() || h.size() < 2) {
    throw std::invalid_argument("fit_loglog: need at least two (h, err) pairs");
  }
  const double n = static_cast<double>(h.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double x = std::log(h[i]);
    const double y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  SlopeFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;

  double rss = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double resid = std::log(err[i]) - (fit.intercept + fit.slope * std::log(h[i]));
    rss += resid * resid;
  }
  if (h.size() > 2) {
    fit.stderr_slope = std::sqrt(rss / (n - 2.0) / (sxx - sx * sx / n));
  }
  return fit;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gbm_call_price(double s0, double r, double sigma, double strike, double t) {
  if (strike <= 0.0) return s0 * std::exp(r * t);
  const double total_sd = sigma * std::sqrt(t);
  const double d1 = (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * t) / total_sd;
  const double d2 = d1 - total_sd;
  return s0 * std::exp(r * t) * normal_cdf(d1) - strike * normal_cdf(d2);
}

double ou_decay(double nu, double h) { return std::exp(-nu * h); }

double ou_transition_sd(double nu, double sigma, double h) {
  return sigma * std::sqrt((1.0 - std::exp(-2.0 * nu * h)) / (2.0 * nu));
}

double ou_exact_step(double y, double nu, double mu, double sigma, double h, double z) {
  return mu + (y - mu) * ou_decay(nu, h) + ou_transition_sd(nu, sigma, h) * z;
}

double ou_mean(double t, double nu, double mu, double m0) {
  return mu + (m0 - mu) * std::exp(-nu * t);
}

double ou_variance(double t, double nu, double sigma, double v0) {
  const double decay2 = std::exp(-2.0 * nu * t);
  return sigma * sigma / (2.0 * nu) * (1.0 - decay2) + v0 * decay2;
}

SolverChoice solver_from_name(const std::string& name) {
  if (name == "ees25") return SolverChoice::ees25;
  if (name == "reversible_heun") return SolverChoice::reversible_heun;
  throw std::invalid_argument("unknown solver '" + name + "'");
}

std::string solver_name(SolverChoice choice) {
  return choice == SolverChoice::ees25 ? "ees25" : "reversible_heun";
}

ButcherTableau tableau_by_name(const std::string& name, double x) {
  if (name == "ees25") return ees25(x);
  return classical_tableau(name);
}

// ---------------------------------------------------------------------------

namespace {

class CosSinField final : public VectorField {
 public:
  CosSinField() : VectorField(3, 1) {}
  void eval_all(double, std::span<const double> y, std::span<double> out) const override {
    out[0] = 0.0;
    out[1] = std::cos(y[0]);
    out[2] = std::sin(y[0]);
  }
};

}  // namespace

ConvergenceReport run_convergence(const ConvergenceConfig& config) {
  if (!(config.hurst > 0.25 && config.hurst < 1.0)) {
    throw std::invalid_argument("run_convergence: hurst index must lie in (1/4, 1)");
  }
  if (config.coarsest_exponent > config.finest_exponent || config.reference_factor < 1) {
    throw std::invalid_argument("run_convergence: bad step-size ladder");
  }
  const auto start = Clock::now();

  const int levels = config.finest_exponent - config.coarsest_exponent + 1;
  const int fine_steps = (1 << config.finest_exponent) * config.reference_factor;
  const TimeGrid fine_grid(0.0, 1.0, fine_steps);

  const CosSinField field;
  const RkStepper stepper(ees25(config.x));
  const std::vector<double> y0{config.y0};

  ConvergenceReport report;
  report.step_sizes.resize(levels);
  report.forward_errors.assign(levels, 0.0);
  report.backward_errors.assign(levels, 0.0);
  for (int l = 0; l < levels; ++l) {
    report.step_sizes[l] =
        std::pow(2.0, -(config.coarsest_exponent + l));
  }

  for (int i = 0; i < config.realizations; ++i) {
    const std::uint64_t path_seed = rng::mix3(config.seed, static_cast<std::uint64_t>(i), 0xC0);
    const DriverPath fine_path = fbm_path(fine_grid, 2, config.hurst, path_seed);
    const Trajectory reference = integrate(stepper, field, y0, fine_path);

    for (int l = 0; l < levels; ++l) {
      const int k = config.coarsest_exponent + l;
      const int coarse_steps = 1 << k;
      const int factor = fine_steps / coarse_steps;
      const DriverPath path = fine_path.coarsen(factor);
      const Trajectory trajectory = integrate(stepper, field, y0, path);

      double worst = 0.0;
      for (int n = 0; n <= coarse_steps; ++n) {
        worst = std::max(worst, std::abs(trajectory.primary(n)[0] -
                                         reference.primary(n * factor)[0]));
      }
      report.forward_errors[l] += worst / config.realizations;

      const Trajectory backward =
          reconstruct_backward(stepper, field, trajectory.state(coarse_steps), path);
      report.backward_errors[l] +=
          std::abs(backward.primary(0)[0] - config.y0) / config.realizations;
    }
  }

  // zero errors (self-comparison configurations) cannot enter the log fit
  std::vector<double> fit_h, fit_fwd, fit_h_b, fit_bwd;
  for (int l = 0; l < levels; ++l) {
    if (report.forward_errors[l] > 0.0) {
      fit_h.push_back(report.step_sizes[l]);
      fit_fwd.push_back(report.forward_errors[l]);
    }
    if (report.backward_errors[l] > 0.0) {
      fit_h_b.push_back(report.step_sizes[l]);
      fit_bwd.push_back(report.backward_errors[l]);
    }
  }
  if (fit_h.size() >= 2) report.forward_fit = fit_loglog(fit_h, fit_fwd);
  if (fit_h_b.size() >= 2) report.backward_fit = fit_loglog(fit_h_b, fit_bwd);
  report.expected_forward_rate = 2.0 * config.hurst - 0.5;
  report.expected_backward_rate = 6.0 * config.hurst - 1.0;
  report.wall_seconds = seconds_since(start);
  return report;
}

// ---------------------------------------------------------------------------

bool TrainReport::all_finite() const {
  for (bool ok : epoch_finite) {
    if (!ok) return false;
  }
  return !epoch_finite.empty();
}

bool TrainReport::any_nonfinite() const { return !epoch_finite.empty() && !all_finite(); }

double TrainReport::final_loss() const {
  if (epoch_losses.empty()) return std::numeric_limits<double>::infinity();
  if (!epoch_finite.back()) return std::numeric_limits<double>::infinity();
  return epoch_losses.back();
}

namespace {

std::vector<int> net_dims(int in, int out, int width, int layers) {
  std::vector<int> dims;
  dims.push_back(in);
  for (int l = 0; l < layers - 1; ++l) dims.push_back(width);
  dims.push_back(out);
  return dims;
}

struct ParamGroup {
  std::span<double> params;
  std::vector<double> grads;
  AdamState adam;

  explicit ParamGroup(std::span<double> p)
      : params(p), grads(p.size(), 0.0), adam(p.size()) {}
  void zero() { std::fill(grads.begin(), grads.end(), 0.0); }
  bool grads_finite() const { return all_finite_span(grads); }
  void update(double lr) { adam_step(params, grads, adam, lr); }
};

constexpr std::uint64_t kX0Stream = 0x583000ULL;

}  // namespace

TrainReport run_ou(const OuConfig& config) {
  const auto start = Clock::now();
  const int steps = static_cast<int>(std::lround(config.t_end / config.step));
  const TimeGrid grid(0.0, config.t_end, steps);
  const int obs = config.obs_dim;
  const int latent = config.latent_dim;
  const ButcherTableau tab = ees25(config.x);

  LangevinField field(
      Mlp::random(net_dims(latent, latent, config.width, config.layers),
                  rng::mix3(config.seed, 1, 1)),
      Mlp::random(net_dims(1, latent, config.width, config.layers), rng::mix3(config.seed, 1, 2)));
  Mlp encoder = Mlp::random({obs, latent}, rng::mix3(config.seed, 1, 3));
  Mlp decoder = Mlp::random({latent, obs}, rng::mix3(config.seed, 1, 4));

  ParamGroup drift_group(field.drift().params());
  ParamGroup diffusion_group(field.diffusion().params());
  ParamGroup encoder_group(encoder.params());
  ParamGroup decoder_group(decoder.params());
  std::vector<double> field_grads(field.param_count(), 0.0);

  // target moments of the true OU dynamics started from x0 ~ N(0, 1) per
  // component
  std::vector<double> target_mean(steps + 1);
  std::vector<double> target_var(steps + 1);
  for (int n = 0; n <= steps; ++n) {
    const double t = grid.t0 + n * grid.h();
    target_mean[n] = ou_mean(t, config.nu, config.mu, 0.0);
    target_var[n] = ou_variance(t, config.nu, config.sigma, 1.0);
  }

  const RkStepper rk_stepper(tab);
  const ReversibleHeunStepper heun_stepper;
  const Stepper& stepper = (config.solver == SolverChoice::ees25)
                               ? static_cast<const Stepper&>(rk_stepper)
                               : static_cast<const Stepper&>(heun_stepper);
  const int state_dim = stepper.state_size(latent);

  TrainReport report;

  const int samples = config.samples;
  const double denom = static_cast<double>((steps + 1) * obs);
  std::vector<double> mean(static_cast<std::size_t>(steps + 1) * obs);
  std::vector<double> var(static_cast<std::size_t>(steps + 1) * obs);
  std::vector<double> terminal(samples * state_dim);
  std::vector<double> x0_store(samples * obs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    bool epoch_ok = true;
    double loss = std::numeric_limits<double>::quiet_NaN();

    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);

    // forward sampling pass: accumulate decoded first and second moments
    std::vector<double> x0(obs);
    std::vector<double> z0(latent);
    std::vector<double> decoded(obs);
    try {
      for (int i = 0; i < samples; ++i) {
        const std::uint64_t sample_seed =
            rng::mix3(config.seed, static_cast<std::uint64_t>(epoch) + 1,
                      static_cast<std::uint64_t>(i));
        rng::NormalStream init(sample_seed, kX0Stream);
        for (auto& v : x0) v = init.next();
        std::copy(x0.begin(), x0.end(),
                  x0_store.begin() + static_cast<std::ptrdiff_t>(i) * obs);

        encoder.forward(x0, z0);
        const DriverPath path = brownian_path(grid, latent, sample_seed);
        const Trajectory trajectory = integrate(stepper, field, z0, path);

        for (int n = 0; n <= steps; ++n) {
          decoder.forward(trajectory.primary(n), decoded);
          for (int d = 0; d < obs; ++d) {
            const double v = decoded[d];
            mean[n * obs + d] += v;
            var[n * obs + d] += v * v;
          }
        }
        std::copy(trajectory.state(steps).begin(), trajectory.state(steps).end(),
                  terminal.begin() + static_cast<std::ptrdiff_t>(i) * state_dim);
      }
    } catch (const BlowUpError&) {
      epoch_ok = false;
    }

    if (epoch_ok) {
      for (auto& v : mean) v /= samples;
      for (std::size_t j = 0; j < var.size(); ++j) {
        var[j] = var[j] / samples - mean[j] * mean[j];
      }
      loss = 0.0;
      for (int n = 0; n <= steps; ++n) {
        for (int d = 0; d < obs; ++d) {
          const double dm =
              mean[n * obs + d] - target_mean[n];
          const double dv =
              var[n * obs + d] - target_var[n];
          loss += (dm * dm + dv * dv) / denom;
        }
      }
      if (!finite(loss)) epoch_ok = false;
    }

    // backward pass and parameter update
    if (epoch_ok) {
      drift_group.zero();
      diffusion_group.zero();
      encoder_group.zero();
      decoder_group.zero();
      std::fill(field_grads.begin(), field_grads.end(), 0.0);
      std::vector<double> enc_in_cot(obs);

      try {
        for (int i = 0; i < samples; ++i) {
          const std::uint64_t sample_seed =
              rng::mix3(config.seed, static_cast<std::uint64_t>(epoch) + 1,
                        static_cast<std::uint64_t>(i));
          const DriverPath path = brownian_path(grid, latent, sample_seed);

          const StepCotangent cot = [&](int n, std::span<const double> z_n,
                                        std::span<double> out) {
            decoder.forward(z_n, decoded);
            std::vector<double> obs_cot(obs);
            for (int d = 0; d < obs; ++d) {
              const std::size_t j = n * obs + static_cast<std::size_t>(d);
              const double dm = mean[j] - target_mean[n];
              const double dv = var[j] - target_var[n];
              obs_cot[d] =
                  2.0 / denom *
                  (dm / samples +
                   dv * 2.0 / samples * (decoded[d] - mean[j]));
            }
            decoder.backprop(z_n, obs_cot, decoder_group.grads, out);
          };

          BackpropResult result;
          if (config.solver == SolverChoice::ees25) {
            result = reversible_backprop(
                tab, field,
                {terminal.data() + static_cast<std::ptrdiff_t>(i) * state_dim,
                 static_cast<std::size_t>(latent)},
                path, cot);
          } else {
            result = reversible_backprop_heun(
                field,
                {terminal.data() + static_cast<std::ptrdiff_t>(i) * state_dim,
                 static_cast<std::size_t>(state_dim)},
                path, cot);
          }
          for (std::size_t j = 0; j < field_grads.size(); ++j) {
            field_grads[j] += result.param_grad[j];
          }
          std::fill(enc_in_cot.begin(), enc_in_cot.end(), 0.0);
          encoder.backprop({x0_store.data() + static_cast<std::ptrdiff_t>(i) * obs,
                            static_cast<std::size_t>(obs)},
                           result.y0_grad, encoder_group.grads, enc_in_cot);
        }
      } catch (const BlowUpError&) {
        epoch_ok = false;
      }

      if (epoch_ok) {
        const int split = field.drift_params();
        std::copy(field_grads.begin(), field_grads.begin() + split, drift_group.grads.begin());
        std::copy(field_grads.begin() + split, field_grads.end(), diffusion_group.grads.begin());
        if (drift_group.grads_finite() && diffusion_group.grads_finite() &&
            encoder_group.grads_finite() && decoder_group.grads_finite()) {
          drift_group.update(config.lr);
          diffusion_group.update(config.lr);
          encoder_group.update(config.lr);
          decoder_group.update(config.lr);
        } else {
          epoch_ok = false;
        }
      }
    }

    report.epoch_losses.push_back(loss);
    report.epoch_finite.push_back(epoch_ok && finite(loss));
  }

  report.wall_seconds = seconds_since(start);
  return report;
}

TrainReport run_gbm(const GbmConfig& config) {
  const auto start = Clock::now();
  const double t_end = config.maturity_spacing * config.maturities;
  const int steps = static_cast<int>(std::lround(t_end / config.step));
  const TimeGrid grid(0.0, t_end, steps);
  const int n_strikes = config.strike_hi - config.strike_lo + 1;
  const int n_maturities = config.maturities;
  const ButcherTableau tab = ees25(config.x);

  ScalarSdeField field(
      Mlp::random(net_dims(2, 1, config.width, config.layers), rng::mix3(config.seed, 2, 1)),
      Mlp::random(net_dims(2, 1, config.width, config.layers), rng::mix3(config.seed, 2, 2)));
  ParamGroup drift_group(field.drift().params());
  ParamGroup diffusion_group(field.diffusion().params());
  std::vector<double> field_grads(field.param_count(), 0.0);

  // maturity bookkeeping: step index -> maturity slot (or -1)
  std::vector<int> maturity_of_step(steps + 1, -1);
  std::vector<double> maturity_time(n_maturities);
  for (int j = 0; j < n_maturities; ++j) {
    const double t = config.maturity_spacing * (j + 1);
    const int idx = static_cast<int>(std::lround(t / config.step));
    if (idx < 1 || idx > steps) throw std::invalid_argument("run_gbm: maturity off the grid");
    maturity_of_step[idx] = j;
    maturity_time[j] = t;
  }

  // closed-form undiscounted target prices
  std::vector<double> target(n_strikes * n_maturities);
  for (int k = 0; k < n_strikes; ++k) {
    for (int j = 0; j < n_maturities; ++j) {
      target[k * n_maturities + j] =
          gbm_call_price(config.s0, config.r, config.sigma, config.strike_lo + k,
                         maturity_time[j]);
    }
  }

  const RkStepper rk_stepper(tab);
  const ReversibleHeunStepper heun_stepper;
  const Stepper& stepper = (config.solver == SolverChoice::ees25)
                               ? static_cast<const Stepper&>(rk_stepper)
                               : static_cast<const Stepper&>(heun_stepper);
  const int state_dim = stepper.state_size(1);

  TrainReport report;
  const int samples = config.samples;
  const double pair_count = static_cast<double>(n_strikes) * n_maturities;
  std::vector<double> payoff_mean(n_strikes * n_maturities);
  std::vector<double> terminal(samples * state_dim);
  const std::vector<double> s0{config.s0};

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    bool epoch_ok = true;
    double loss = std::numeric_limits<double>::quiet_NaN();
    std::fill(payoff_mean.begin(), payoff_mean.end(), 0.0);

    try {
      for (int i = 0; i < samples; ++i) {
        const std::uint64_t sample_seed =
            rng::mix3(config.seed, 0x47424d00ULL + static_cast<std::uint64_t>(epoch),
                      static_cast<std::uint64_t>(i));
        const DriverPath path = brownian_path(grid, 1, sample_seed);
        const Trajectory trajectory = integrate(stepper, field, s0, path);
        for (int n = 1; n <= steps; ++n) {
          const int j = maturity_of_step[n];
          if (j < 0) continue;
          const double s_t = trajectory.primary(n)[0];
          for (int k = 0; k < n_strikes; ++k) {
            const double payoff = std::max(0.0, s_t - (config.strike_lo + k));
            payoff_mean[k * n_maturities + j] += payoff / samples;
          }
        }
        std::copy(trajectory.state(steps).begin(), trajectory.state(steps).end(),
                  terminal.begin() + static_cast<std::ptrdiff_t>(i) * state_dim);
      }
    } catch (const BlowUpError&) {
      epoch_ok = false;
    }

    if (epoch_ok) {
      loss = 0.0;
      for (int k = 0; k < n_strikes; ++k) {
        for (int j = 0; j < n_maturities; ++j) {
          const double discount =
              std::exp(-2.0 * config.r * maturity_time[j]);
          const double diff = target[k * n_maturities + j] -
                              payoff_mean[k * n_maturities + j];
          loss += discount * diff * diff / pair_count;
        }
      }
      if (!finite(loss)) epoch_ok = false;
    }

    if (epoch_ok) {
      drift_group.zero();
      diffusion_group.zero();
      std::fill(field_grads.begin(), field_grads.end(), 0.0);

      try {
        for (int i = 0; i < samples; ++i) {
          const std::uint64_t sample_seed =
              rng::mix3(config.seed, 0x47424d00ULL + static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(i));
          const DriverPath path = brownian_path(grid, 1, sample_seed);

          const StepCotangent cot = [&](int n, std::span<const double> s_n,
                                        std::span<double> out) {
            if (n < 1 || n > steps) return;
            const int j = maturity_of_step[n];
            if (j < 0) return;
            const double discount =
                std::exp(-2.0 * config.r * maturity_time[j]);
            const double s_t = s_n[0];
            double acc = 0.0;
            for (int k = 0; k < n_strikes; ++k) {
              if (s_t <= config.strike_lo + k) continue;
              const double chat = payoff_mean[k * n_maturities + j];
              const double c = target[k * n_maturities + j];
              acc += 2.0 * discount * (chat - c) / (pair_count * samples);
            }
            out[0] += acc;
          };

          BackpropResult result;
          if (config.solver == SolverChoice::ees25) {
            result = reversible_backprop(
                tab, field,
                {terminal.data() + static_cast<std::ptrdiff_t>(i) * state_dim, 1}, path, cot);
          } else {
            result = reversible_backprop_heun(
                field,
                {terminal.data() + static_cast<std::ptrdiff_t>(i) * state_dim,
                 static_cast<std::size_t>(state_dim)},
                path, cot);
          }
          for (std::size_t j = 0; j < field_grads.size(); ++j) {
            field_grads[j] += result.param_grad[j];
          }
        }
      } catch (const BlowUpError&) {
        epoch_ok = false;
      }

      if (epoch_ok) {
        const int split = field.drift_params();
        std::copy(field_grads.begin(), field_grads.begin() + split, drift_group.grads.begin());
        std::copy(field_grads.begin() + split, field_grads.end(), diffusion_group.grads.begin());
        if (drift_group.grads_finite() && diffusion_group.grads_finite()) {
          const double lr = decayed_lr(config.lr0, config.lr_decay, epoch);
          drift_group.update(lr);
          diffusion_group.update(lr);
        } else {
          epoch_ok = false;
        }
      }
    }

    report.epoch_losses.push_back(loss);
    report.epoch_finite.push_back(epoch_ok && finite(loss));
  }

  report.wall_seconds = seconds_since(start);
  return report;
}

// ---------------------------------------------------------------------------

StabilityRunReport run_stability(const StabilityRunConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);

  StabilityRunReport report;
  report.ees_real_axis_boundary = stability::real_stability_boundary(ees25(config.x));

  struct Section {
    const char* name;
    stability::RasterSpec::Mode mode;
    double fixed;
  };
  const Section sections[] = {
      {"re_mu_im0", stability::RasterSpec::Mode::real_lambda_vs_mu, 0.0},
      {"re_mu_imfix", stability::RasterSpec::Mode::real_lambda_vs_mu, config.fixed_im},
      {"complex_mu0", stability::RasterSpec::Mode::complex_lambda_at_mu, 0.0},
      {"complex_mufix", stability::RasterSpec::Mode::complex_lambda_at_mu, config.fixed_mu2h},
  };

  for (const std::string& name : config.tableaus) {
    const ButcherTableau tab = tableau_by_name(name, config.x);
    for (const Section& section : sections) {
      stability::RasterSpec spec;
      spec.mode = section.mode;
      spec.fixed = section.fixed;
      spec.nx = config.resolution;
      spec.ny = config.resolution;
      spec.x_min = config.x_min;
      spec.x_max = config.x_max;
      spec.y_min = config.y_min;
      spec.y_max = config.y_max;
      spec.name = name + "_" + section.name;
      const stability::StabilityRaster raster = stability::ms_raster(tab, spec);

      const std::string base = (fs::path(config.out_dir) / spec.name).string();
      {
        std::ofstream csv(base + ".csv");
        stability::write_raster_csv(csv, raster);
      }
      {
        std::ofstream bin(base + ".bin", std::ios::binary);
        stability::write_raster_binary(bin, raster);
      }
      report.files_written.push_back(base + ".csv");
      report.files_written.push_back(base + ".bin");
    }
  }
  return report;
}

CertifyReport run_certify(const CertifyConfig& config) {
  const ButcherTableau tab = tableau_by_name(config.tableau, config.x);
  CertifyReport report;
  report.name = tab.name;
  report.order = trees::certified_order(tab, config.max_order);
  report.symmetry_residuals = trees::effective_symmetry_residuals(tab, config.max_order);
  report.symmetric_through = 0;
  for (double r : report.symmetry_residuals) {
    if (r > 1e-12) break;
    report.symmetric_through += 1;
  }
  return report;
}

std::string CertifyReport::text() const {
  std::string out = name + ": order " + std::to_string(order);
  out += "; symmetric-composition residuals <= 1e-12 at orders 1.." +
         std::to_string(symmetric_through);
  if (symmetric_through < static_cast<int>(symmetry_residuals.size())) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e",
                  symmetry_residuals[symmetric_through]);
    out += "; first nonzero residual " + std::string(buf) + " at order " +
           std::to_string(symmetric_through + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, unused] : j.items()) {
    (void)unused;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
}

json provenance() {
  json j;
  j["library_version"] = kVersion;
  return j;
}

json train_report_json(const TrainReport& report) {
  json j;
  j["epoch_losses"] = report.epoch_losses;
  std::vector<int> finite_flags;
  finite_flags.reserve(report.epoch_finite.size());
  for (bool ok : report.epoch_finite) finite_flags.push_back(ok ? 1 : 0);
  j["epoch_finite"] = finite_flags;
  j["final_loss"] = report.final_loss();
  j["all_finite"] = report.all_finite();
  j["wall_seconds"] = report.wall_seconds;
  return j;
}

}  // namespace

std::string to_json(const ConvergenceConfig& config, const ConvergenceReport& report) {
  json j = provenance();
  j["config"] = {{"experiment", "convergence"},
                 {"hurst", config.hurst},
                 {"realizations", config.realizations},
                 {"coarsest_exponent", config.coarsest_exponent},
                 {"finest_exponent", config.finest_exponent},
                 {"reference_factor", config.reference_factor},
                 {"x", config.x},
                 {"y0", config.y0},
                 {"seed", config.seed}};
  j["report"] = {{"step_sizes", report.step_sizes},
                 {"forward_errors", report.forward_errors},
                 {"backward_errors", report.backward_errors},
                 {"forward_slope", report.forward_fit.slope},
                 {"forward_slope_stderr", report.forward_fit.stderr_slope},
                 {"backward_slope", report.backward_fit.slope},
                 {"backward_slope_stderr", report.backward_fit.stderr_slope},
                 {"expected_forward_rate", report.expected_forward_rate},
                 {"expected_backward_rate", report.expected_backward_rate},
                 {"wall_seconds", report.wall_seconds}};
  return j.dump(2);
}

std::string to_json(const OuConfig& config, const TrainReport& report) {
  json j = provenance();
  j["config"] = {{"experiment", "ou"},
                 {"nu", config.nu},
                 {"mu", config.mu},
                 {"sigma", config.sigma},
                 {"obs_dim", config.obs_dim},
                 {"latent_dim", config.latent_dim},
                 {"width", config.width},
                 {"layers", config.layers},
                 {"t_end", config.t_end},
                 {"step", config.step},
                 {"epochs", config.epochs},
                 {"samples", config.samples},
                 {"lr", config.lr},
                 {"solver", solver_name(config.solver)},
                 {"x", config.x},
                 {"seed", config.seed}};
  j["report"] = train_report_json(report);
  return j.dump(2);
}

std::string to_json(const GbmConfig& config, const TrainReport& report) {
  json j = provenance();
  j["config"] = {{"experiment", "gbm"},
                 {"r", config.r},
                 {"sigma", config.sigma},
                 {"s0", config.s0},
                 {"strike_lo", config.strike_lo},
                 {"strike_hi", config.strike_hi},
                 {"maturity_spacing", config.maturity_spacing},
                 {"maturities", config.maturities},
                 {"step", config.step},
                 {"width", config.width},
                 {"layers", config.layers},
                 {"epochs", config.epochs},
                 {"samples", config.samples},
                 {"lr0", config.lr0},
                 {"lr_decay", config.lr_decay},
                 {"solver", solver_name(config.solver)},
                 {"x", config.x},
                 {"seed", config.seed}};
  j["report"] = train_report_json(report);
  return j.dump(2);
}

std::string to_json(const CertifyConfig& config, const CertifyReport& report) {
  json j = provenance();
  j["config"] = {{"experiment", "certify"},
                 {"tableau", config.tableau},
                 {"x", config.x},
                 {"max_order", config.max_order}};
  j["report"] = {{"name", report.name},
                 {"order", report.order},
                 {"symmetry_residuals", report.symmetry_residuals},
                 {"symmetric_through", report.symmetric_through},
                 {"text", report.text()}};
  return j.dump(2);
}

ConvergenceConfig convergence_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_keys(j, {"hurst", "realizations", "coarsest_exponent", "finest_exponent",
                 "reference_factor", "x", "y0", "seed"});
  ConvergenceConfig config;
  config.hurst = j.value("hurst", config.hurst);
  config.realizations = j.value("realizations", config.realizations);
  config.coarsest_exponent = j.value("coarsest_exponent", config.coarsest_exponent);
  config.finest_exponent = j.value("finest_exponent", config.finest_exponent);
  config.reference_factor = j.value("reference_factor", config.reference_factor);
  config.x = j.value("x", config.x);
  config.y0 = j.value("y0", config.y0);
  config.seed = j.value("seed", config.seed);
  return config;
}

OuConfig ou_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_keys(j, {"nu", "mu", "sigma", "obs_dim", "latent_dim", "width", "layers", "t_end",
                 "step", "epochs", "samples", "lr", "solver", "x", "seed"});
  OuConfig config;
  config.nu = j.value("nu", config.nu);
  config.mu = j.value("mu", config.mu);
  config.sigma = j.value("sigma", config.sigma);
  config.obs_dim = j.value("obs_dim", config.obs_dim);
  config.latent_dim = j.value("latent_dim", config.latent_dim);
  config.width = j.value("width", config.width);
  config.layers = j.value("layers", config.layers);
  config.t_end = j.value("t_end", config.t_end);
  config.step = j.value("step", config.step);
  config.epochs = j.value("epochs", config.epochs);
  config.samples = j.value("samples", config.samples);
  config.lr = j.value("lr", config.lr);
  if (j.contains("solver")) config.solver = solver_from_name(j["solver"].get<std::string>());
  config.x = j.value("x", config.x);
  config.seed = j.value("seed", config.seed);
  return config;
}

GbmConfig gbm_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  check_keys(j, {"r", "sigma", "s0", "strike_lo", "strike_hi", "maturity_spacing", "maturities",
                 "step", "width", "layers", "epochs", "samples", "lr0", "lr_decay", "solver",
                 "x", "seed"});
  GbmConfig config;
  config.r = j.value("r", config.r);
  config.sigma = j.value("sigma", config.sigma);
  config.s0 = j.value("s0", config.s0);
  config.strike_lo = j.value("strike_lo", config.strike_lo);
  config.strike_hi = j.value("strike_hi", config.strike_hi);
  config.maturity_spacing = j.value("maturity_spacing", config.maturity_spacing);
  config.maturities = j.value("maturities", config.maturities);
  config.step = j.value("step", config.step);
  config.width = j.value("width", config.width);
  config.layers = j.value("layers", config.layers);
  config.epochs = j.value("epochs", config.epochs);
  config.samples = j.value("samples", config.samples);
  config.lr0 = j.value("lr0", config.lr0);
  config.lr_decay = j.value("lr_decay", config.lr_decay);
  if (j.contains("solver")) config.solver = solver_from_name(j["solver"].get<std::string>());
  config.x = j.value("x", config.x);
  config.seed = j.value("seed", config.seed);
  return config;
}

}  // namespace ees::experiments
