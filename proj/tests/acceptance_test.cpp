// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria pin the library's headline guarantees end to end, from
// tableau algebra through reversible training.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ees/drivers.hpp"
#include "ees/experiments.hpp"
#include "ees/fields.hpp"
#include "ees/mlp.hpp"
#include "ees/revgrad.hpp"
#include "ees/rng.hpp"
#include "ees/solvers.hpp"
#include "ees/stability.hpp"
#include "ees/tableau.hpp"
#include "ees/trees.hpp"

using namespace ees;

namespace {

struct Harness {
  int failures = 0;
  int index = 0;

  void run(const std::string& description, const std::function<bool(std::string&)>& body) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s  %2d. %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", index, description.c_str(),
                seconds, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

bool near(double value, double target, double tol) { return std::abs(value - target) <= tol; }

class SineField final : public VectorField {
 public:
  SineField() : VectorField(1, 1) {}
  void eval_all(double, std::span<const double> y, std::span<double> out) const override {
    out[0] = std::sin(y[0]);
  }
};

DriverPath ode_path(double t_end, int steps) {
  const TimeGrid grid(0.0, t_end, steps);
  std::vector<double> inc(steps, grid.h());
  return DriverPath(grid, 0, std::move(inc));
}

double fit_slope(const std::vector<double>& h, const std::vector<double>& err) {
  return experiments::fit_loglog(h, err).slope;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

int main() {
  Harness harness;

  harness.run("stability polynomial of EES(2,5;x) is [1, 1, 1/2, 1/8] for x in {0.1, 0.3, -0.2}",
              [](std::string& detail) {
                const double expected[] = {1.0, 1.0, 0.5, 0.125};
                for (double x : {0.1, 0.3, -0.2}) {
                  const auto coeffs = stability_polynomial(ees25(x));
                  if (coeffs.size() != 4) return false;
                  for (int k = 0; k < 4; ++k) {
                    if (std::abs(coeffs[k] - expected[k]) > 1e-14) {
                      detail = "x = " + std::to_string(x) + ", k = " + std::to_string(k);
                      return false;
                    }
                  }
                }
                return true;
              });

  harness.run("order certificate: EES(2,5) is order 2 with chain weight 1/8; rk4 is order 4",
              [](std::string& detail) {
                const ButcherTableau tab = ees25(0.1);
                const trees::Character phi = trees::Character::rk(tab, 3);
                for (const auto& [tau, value] : phi.values()) {
                  if (tau.size() > 2) continue;
                  const double exact = 1.0 / static_cast<double>(trees::tree_factorial(tau));
                  if (std::abs(value - exact) > 1e-14) {
                    detail = "order-2 condition violated on " + trees::format(tau);
                    return false;
                  }
                }
                const trees::Tree chain3 = trees::join({trees::join({trees::leaf()})});
                if (std::abs(phi.at(chain3) - 0.125) > 1e-14) {
                  detail = "chain weight is not 1/8";
                  return false;
                }
                if (trees::certified_order(tab, 6) != 2) {
                  detail = "EES order != 2";
                  return false;
                }
                if (trees::certified_order(classical_tableau("rk4"), 6) != 4) {
                  detail = "rk4 order != 4";
                  return false;
                }
                return true;
              });

  harness.run("effective symmetry: residuals <= 1e-12 at orders 1..5, > 1e-6 at order 6",
              [](std::string& detail) {
                const auto residuals = trees::effective_symmetry_residuals(ees25(0.1), 6);
                for (int k = 0; k < 5; ++k) {
                  if (residuals[k] > 1e-12) {
                    detail = "order " + std::to_string(k + 1) + " residual " +
                             std::to_string(residuals[k]);
                    return false;
                  }
                }
                if (residuals[5] <= 1e-6) {
                  detail = "order-6 residual unexpectedly small";
                  return false;
                }
                return true;
              });

  harness.run("one-step reversibility rate on dy = sin(y) dt: slope in [5.5, 6.5]",
              [](std::string& detail) {
                const ButcherTableau tab = ees25(0.1);
                const SineField field;
                const double y0 = 1.0;
                const std::vector<double> hs{0.1, 0.05, 0.025, 0.0125};
                std::vector<double> errs;
                for (double h : hs) {
                  const std::vector<double> dX{h};
                  const RkStepResult fwd = rk_step(tab, field, 0.0, {&y0, 1}, dX);
                  const auto back = rk_step_reverse(tab, field, h, fwd.y_next, dX);
                  errs.push_back(std::abs(back[0] - y0));
                }
                const double slope = fit_slope(hs, errs);
                detail = "slope " + std::to_string(slope);
                return slope >= 5.5 && slope <= 6.5;
              });

  harness.run("global backward-recovery rate on the ODE: slope in [4.5, 5.5]",
              [](std::string& detail) {
                const ButcherTableau tab = ees25(0.1);
                const RkStepper stepper(tab);
                const SineField field;
                const std::vector<double> y0{1.0};
                const std::vector<double> hs{0.1, 0.05, 0.025, 0.0125};
                std::vector<double> errs;
                for (double h : hs) {
                  const int steps = static_cast<int>(std::lround(2.0 / h));
                  const DriverPath path = ode_path(2.0, steps);
                  const Trajectory fwd = integrate(stepper, field, y0, path);
                  double worst = 0.0;
                  for (int n = 1; n <= steps; ++n) {
                    const Trajectory back =
                        reconstruct_backward(stepper, field, fwd.state(n), path, n);
                    worst = std::max(worst, std::abs(back.primary(0)[0] - 1.0));
                  }
                  errs.push_back(worst);
                }
                const double slope = fit_slope(hs, errs);
                detail = "slope " + std::to_string(slope);
                return slope >= 4.5 && slope <= 5.5;
              });

  harness.run(
      "fBm convergence: forward slopes near 2H - 1/2 and backward slopes near 6H - 1 "
      "(H = 0.5, 0.6, +-0.4)",
      [](std::string& detail) {
        char buffer[160];
        for (double hurst : {0.5, 0.6}) {
          experiments::ConvergenceConfig config;
          config.hurst = hurst;
          config.realizations = 10;
          config.coarsest_exponent = 4;
          config.finest_exponent = 8;
          config.reference_factor = 32;
          config.seed = 2;
          const experiments::ConvergenceReport report = experiments::run_convergence(config);
          std::snprintf(buffer, sizeof(buffer),
                        "H=%.1f fwd %.3f (exp %.2f) bwd %.3f (exp %.2f); ", hurst,
                        report.forward_fit.slope, report.expected_forward_rate,
                        report.backward_fit.slope, report.expected_backward_rate);
          detail += buffer;
          if (!near(report.forward_fit.slope, report.expected_forward_rate, 0.4)) return false;
          if (!near(report.backward_fit.slope, report.expected_backward_rate, 0.4)) return false;
        }
        return true;
      });

  harness.run(
      "mean-square engine matches a 1e7-sample MC at 20 random points for ees25/rk3/rk4; "
      "euler reduces to (1+lh)^2 + m2h",
      [](std::string& detail) {
        const ButcherTableau euler = classical_tableau("euler");
        for (double lh : {-1.7, -0.9, 0.3}) {
          for (double m2h : {0.0, 0.7, 1.3}) {
            const double closed = stability::mean_square_expectation(euler, {lh, 0.0}, m2h);
            if (std::abs(closed - ((1.0 + lh) * (1.0 + lh) + m2h)) > 1e-12) {
              detail = "euler reduction failed";
              return false;
            }
          }
        }
        const ButcherTableau tableaus[] = {ees25(0.1), classical_tableau("kutta_rk3"),
                                           classical_tableau("rk4")};
        rng::NormalStream uniform(20250808, 17);
        for (int point = 0; point < 20; ++point) {
          const double lh = -3.5 + 4.0 * uniform.next_uniform();
          const double m2h = 1.5 * uniform.next_uniform();
          for (int t = 0; t < 3; ++t) {
            const auto& tab = tableaus[t];
            const double closed = stability::mean_square_expectation(tab, {lh, 0.0}, m2h);
            const auto mc = stability::mean_square_mc(
                tab, {lh, 0.0}, m2h, 10000000,
                rng::mix3(20250808, static_cast<std::uint64_t>(point),
                          static_cast<std::uint64_t>(t)));
            if (std::abs(closed - mc.mean) > 3.0 * mc.standard_error) {
              char buffer[160];
              std::snprintf(buffer, sizeof(buffer),
                            "%s at (%.3f, %.3f): closed %.6g vs mc %.6g +- %.2g",
                            tab.name.c_str(), lh, m2h, closed, mc.mean, mc.standard_error);
              detail = buffer;
              return false;
            }
          }
        }
        return true;
      });

  harness.run(
      "reversible Heun linear test: lambda h = -0.5 diverges within 200 steps, 0.5i stays "
      "bounded for 1e4 steps",
      [](std::string& detail) {
        using stability::TwoStateScheme;
        const double diverged =
            stability::two_state_growth(TwoStateScheme::reversible_heun, {-0.5, 0.0}, 200);
        const double bounded =
            stability::two_state_growth(TwoStateScheme::reversible_heun, {0.0, 0.5}, 10000);
        detail = "growth(-0.5) " + std::to_string(diverged) + ", sup(0.5i) " +
                 std::to_string(bounded);
        if (diverged < 1e6) return false;
        if (bounded > 10.0) return false;
        if (stability::two_state_bounded(TwoStateScheme::reversible_heun, {-0.5, 0.0})) {
          return false;
        }
        if (!stability::two_state_bounded(TwoStateScheme::reversible_heun, {0.0, 0.5})) {
          return false;
        }
        return true;
      });

  harness.run(
      "gradients: Algorithm-1 vs stored oracle <= 1e-5 and vs finite differences <= 1e-4; "
      "discrepancy decreases in h",
      [](std::string& detail) {
        const ButcherTableau tab = ees25(0.1);
        const RkStepper stepper(tab);

        auto make_field = [] {
          return LangevinField(Mlp::random({2, 8, 2}, 4001), Mlp::random({1, 8, 2}, 4002));
        };
        const StepCotangent loss = [](int n, std::span<const double>, std::span<double> cot) {
          const double w = 1.0 / (1.0 + n);
          for (auto& c : cot) c += w;
        };
        auto loss_value = [](const Trajectory& trajectory) {
          double acc = 0.0;
          for (int n = 0; n < trajectory.points(); ++n) {
            const double w = 1.0 / (1.0 + n);
            for (double v : trajectory.primary(n)) acc += w * v;
          }
          return acc;
        };

        // 50 steps at h = 0.01
        LangevinField field = make_field();
        const TimeGrid grid(0.0, 0.5, 50);
        const DriverPath path = brownian_path(grid, 2, 4003);
        const std::vector<double> z0{0.2, -0.1};
        const Trajectory fwd = integrate(stepper, field, z0, path);
        const BackpropResult stored = stored_backprop(tab, field, z0, path, loss);
        const BackpropResult rev =
            reversible_backprop(tab, field, fwd.primary(50), path, loss);
        const double vs_oracle = rel_diff(rev.param_grad, stored.param_grad);

        rng::NormalStream noise(4004, 1);
        std::vector<double> direction(stored.param_grad.size());
        for (auto& v : direction) v = noise.next();
        double analytic = 0.0;
        for (std::size_t i = 0; i < direction.size(); ++i) {
          analytic += rev.param_grad[i] * direction[i];
        }
        auto loss_at = [&](double shift) {
          LangevinField probe = make_field();
          auto dp = probe.drift().params();
          auto fp = probe.diffusion().params();
          const int split = probe.drift_params();
          for (int i = 0; i < split; ++i) {
            dp[i] += shift * direction[i];
          }
          for (std::size_t i = 0; i < fp.size(); ++i) {
            fp[i] += shift * direction[static_cast<std::size_t>(split) + i];
          }
          return loss_value(integrate(stepper, probe, z0, path));
        };
        const double numeric = (loss_at(1e-5) - loss_at(-1e-5)) / 2e-5;
        const double vs_fd = std::abs(analytic - numeric) /
                             std::max({1.0, std::abs(analytic), std::abs(numeric)});

        std::vector<double> discrepancies;
        for (double h : {0.1, 0.05, 0.025}) {
          const int steps = static_cast<int>(std::lround(1.0 / h));
          LangevinField probe = make_field();
          const TimeGrid g2(0.0, 1.0, steps);
          const DriverPath p2 = brownian_path(g2, 2, 4005);
          const Trajectory f2 = integrate(stepper, probe, z0, p2);
          const BackpropResult s2 = stored_backprop(tab, probe, z0, p2, loss);
          const BackpropResult r2 =
              reversible_backprop(tab, probe, f2.primary(steps), p2, loss);
          discrepancies.push_back(rel_diff(r2.param_grad, s2.param_grad));
        }

        char buffer[200];
        std::snprintf(buffer, sizeof(buffer),
                      "vs oracle %.2e, vs fd %.2e, discrepancies %.2e > %.2e > %.2e", vs_oracle,
                      vs_fd, discrepancies[0], discrepancies[1], discrepancies[2]);
        detail = buffer;
        return vs_oracle <= 1e-5 && vs_fd <= 1e-4 && discrepancies[1] < discrepancies[0] &&
               discrepancies[2] < discrepancies[1];
      });

  harness.run(
      "memory contract: backward workspace is independent of N (1e2 vs 1e4 steps)",
      [](std::string& detail) {
        auto run = [](int steps) {
          LangevinField field(Mlp::random({2, 8, 2}, 5001), Mlp::random({1, 8, 2}, 5002));
          const TimeGrid grid(0.0, 0.01 * steps, steps);
          const DriverPath path = brownian_path(grid, 2, 5003);
          const std::vector<double> z0{0.1, 0.2};
          const RkStepper stepper(ees25(0.1));
          const Trajectory fwd = integrate(stepper, field, z0, path);
          const StepCotangent loss = [steps](int n, std::span<const double>,
                                             std::span<double> cot) {
            if (n == steps) cot[0] += 1.0;
          };
          const BackpropResult rev =
              reversible_backprop(ees25(0.1), field, fwd.primary(steps), path, loss);
          const BackpropResult stored = stored_backprop(ees25(0.1), field, z0, path, loss);
          return std::pair{rev.workspace_bytes, stored.workspace_bytes};
        };
        const auto [rev_small, stored_small] = run(100);
        const auto [rev_large, stored_large] = run(10000);
        char buffer[160];
        std::snprintf(buffer, sizeof(buffer),
                      "reversible %zu == %zu bytes; stored %zu -> %zu bytes", rev_small,
                      rev_large, stored_small, stored_large);
        detail = buffer;
        return rev_small == rev_large && stored_large > 10 * stored_small;
      });

  harness.run(
      "training: EES finishes OU and GBM with finite loss; early-epoch parity with "
      "reversible Heun within 20%; EES final <= Heun final if Heun went non-finite",
      [](std::string& detail) {
        experiments::OuConfig ou;
        ou.latent_dim = 8;
        ou.width = 16;
        ou.samples = 512;
        ou.epochs = 40;
        ou.seed = 321;
        ou.solver = experiments::SolverChoice::ees25;
        const experiments::TrainReport ou_ees = experiments::run_ou(ou);
        ou.solver = experiments::SolverChoice::reversible_heun;
        const experiments::TrainReport ou_heun = experiments::run_ou(ou);

        experiments::GbmConfig gbm;
        gbm.samples = 512;
        gbm.epochs = 25;
        gbm.seed = 321;
        gbm.solver = experiments::SolverChoice::ees25;
        const experiments::TrainReport gbm_ees = experiments::run_gbm(gbm);
        gbm.solver = experiments::SolverChoice::reversible_heun;
        const experiments::TrainReport gbm_heun = experiments::run_gbm(gbm);

        char buffer[240];
        std::snprintf(buffer, sizeof(buffer),
                      "ou: ees %.4g / heun %.4g (heun nonfinite: %d); gbm: ees %.4g / heun %.4g "
                      "(heun nonfinite: %d)",
                      ou_ees.final_loss(), ou_heun.final_loss(), ou_heun.any_nonfinite() ? 1 : 0,
                      gbm_ees.final_loss(), gbm_heun.final_loss(),
                      gbm_heun.any_nonfinite() ? 1 : 0);
        detail = buffer;

        if (!ou_ees.all_finite() || !gbm_ees.all_finite()) return false;

        auto parity = [](const experiments::TrainReport& a, const experiments::TrainReport& b) {
          const double la = a.epoch_losses.front();
          const double lb = b.epoch_losses.front();
          if (!std::isfinite(la) || !std::isfinite(lb)) return false;
          return std::abs(la - lb) <= 0.2 * std::max(std::abs(la), std::abs(lb));
        };
        if (!parity(ou_ees, ou_heun)) return false;
        if (!parity(gbm_ees, gbm_heun)) return false;

        if (ou_heun.any_nonfinite() && !(ou_ees.final_loss() <= ou_heun.final_loss())) {
          return false;
        }
        if (gbm_heun.any_nonfinite() && !(gbm_ees.final_loss() <= gbm_heun.final_loss())) {
          return false;
        }
        return true;
      });

  std::printf("%d of %d criteria passed\n", harness.index - harness.failures, harness.index);
  return harness.failures == 0 ? 0 : 1;
}
