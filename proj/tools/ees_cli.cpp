// ees: experiment runner for the EES Runge-Kutta library.
//
// Subcommands: convergence, ou, gbm, stability, certify. Each takes an
// optional JSON config (--config) plus flag overrides, and writes CSV tables
// and a JSON run report into --out. Exits nonzero when a required phase
// blows up.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ees/experiments.hpp"
#include "ees/solvers.hpp"
#include "ees/version.hpp"

namespace fs = std::filesystem;
using namespace ees;
using namespace ees::experiments;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

void write_loss_csv(const fs::path& path, const TrainReport& report) {
  std::string csv = "epoch,loss,finite\n";
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
    csv += std::to_string(e) + "," + std::to_string(report.epoch_losses[e]) + "," +
           (report.epoch_finite[e] ? "1" : "0") + "\n";
  }
  write_file(path, csv);
}

void write_error_table_csv(const fs::path& path, const ConvergenceReport& report) {
  std::string csv = "h,forward_error,backward_error\n";
  char line[128];
  for (std::size_t i = 0; i < report.step_sizes.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g\n", report.step_sizes[i],
                  report.forward_errors[i], report.backward_errors[i]);
    csv += line;
  }
  write_file(path, csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EES Runge-Kutta schemes for rough and stochastic differential equations"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string solver = "";
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> samples;

  app.add_option("--config", config_path, "JSON config file")->capture_default_str();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* convergence = app.add_subcommand("convergence", "fBm-driven RDE convergence study");
  convergence->fallthrough();
  std::optional<double> hurst;
  convergence->add_option("--hurst", hurst, "Hurst index in (1/4, 1)");

  auto* ou = app.add_subcommand("ou", "train the neural Langevin SDE on OU moments");
  ou->fallthrough();
  ou->add_option("--solver", solver, "ees25 | reversible_heun");
  ou->add_option("--seed", seed, "base seed");
  ou->add_option("--epochs", epochs, "training epochs");
  ou->add_option("--samples", samples, "realizations per epoch");

  auto* gbm = app.add_subcommand("gbm", "calibrate a neural SDE to GBM call prices");
  gbm->fallthrough();
  gbm->add_option("--solver", solver, "ees25 | reversible_heun");
  gbm->add_option("--seed", seed, "base seed");
  gbm->add_option("--epochs", epochs, "training epochs");
  gbm->add_option("--samples", samples, "realizations per epoch");

  auto* stability_cmd = app.add_subcommand("stability", "mean-square stability rasters");
  stability_cmd->fallthrough();
  StabilityRunConfig stability_config;
  stability_cmd->add_option("--resolution", stability_config.resolution,
                            "raster resolution per axis");
  stability_cmd->add_option("--x-min", stability_config.x_min, "Re(lambda h) window start");
  stability_cmd->add_option("--x-max", stability_config.x_max, "Re(lambda h) window end");
  stability_cmd->add_option("--y-min", stability_config.y_min, "second-axis window start");
  stability_cmd->add_option("--y-max", stability_config.y_max, "second-axis window end");
  stability_cmd->add_option("--fixed-im", stability_config.fixed_im,
                            "Im(lambda h) of the offset real cross-section");
  stability_cmd->add_option("--fixed-mu2h", stability_config.fixed_mu2h,
                            "mu^2 h of the noisy complex cross-section");

  auto* certify = app.add_subcommand("certify", "order and effective-symmetry certificate");
  certify->fallthrough();
  std::string tableau_name = "ees25";
  double x_param = 0.1;
  certify->add_option("--tableau", tableau_name, "ees25 | euler | heun2 | kutta_rk3 | rk4");
  certify->add_option("--x", x_param, "EES(2,5;x) parameter");

  CLI11_PARSE(app, argc, argv);

  try {
    if (convergence->parsed()) {
      ConvergenceConfig config = config_path.empty()
                                     ? ConvergenceConfig{}
                                     : convergence_config_from_json(read_file(config_path));
      if (hurst) config.hurst = *hurst;
      if (seed) config.seed = *seed;
      const ConvergenceReport report = run_convergence(config);
      write_error_table_csv(fs::path(out_dir) / "convergence_errors.csv", report);
      write_file(fs::path(out_dir) / "convergence_report.json", to_json(config, report));
      std::cout << "forward slope " << report.forward_fit.slope << " (expected "
                << report.expected_forward_rate << "), backward slope "
                << report.backward_fit.slope << " (expected " << report.expected_backward_rate
                << ")\n";
    } else if (ou->parsed()) {
      OuConfig config =
          config_path.empty() ? OuConfig{} : ou_config_from_json(read_file(config_path));
      if (!solver.empty()) config.solver = solver_from_name(solver);
      if (seed) config.seed = *seed;
      if (epochs) config.epochs = *epochs;
      if (samples) config.samples = *samples;
      const TrainReport report = run_ou(config);
      const std::string tag = solver_name(config.solver);
      write_loss_csv(fs::path(out_dir) / ("ou_loss_" + tag + ".csv"), report);
      write_file(fs::path(out_dir) / ("ou_report_" + tag + ".json"), to_json(config, report));
      std::cout << "ou[" << tag << "] final loss " << report.final_loss()
                << (report.any_nonfinite() ? " (non-finite epochs present)" : "") << "\n";
    } else if (gbm->parsed()) {
      GbmConfig config =
          config_path.empty() ? GbmConfig{} : gbm_config_from_json(read_file(config_path));
      if (!solver.empty()) config.solver = solver_from_name(solver);
      if (seed) config.seed = *seed;
      if (epochs) config.epochs = *epochs;
      if (samples) config.samples = *samples;
      const TrainReport report = run_gbm(config);
      const std::string tag = solver_name(config.solver);
      write_loss_csv(fs::path(out_dir) / ("gbm_loss_" + tag + ".csv"), report);
      write_file(fs::path(out_dir) / ("gbm_report_" + tag + ".json"), to_json(config, report));
      std::cout << "gbm[" << tag << "] final loss " << report.final_loss()
                << (report.any_nonfinite() ? " (non-finite epochs present)" : "") << "\n";
    } else if (stability_cmd->parsed()) {
      StabilityRunConfig config = stability_config;
      config.out_dir = out_dir;
      const StabilityRunReport report = run_stability(config);
      std::cout << "EES real-axis stability boundary " << report.ees_real_axis_boundary << "; "
                << report.files_written.size() << " raster files in " << out_dir << "\n";
    } else if (certify->parsed()) {
      CertifyConfig config;
      config.tableau = tableau_name;
      config.x = x_param;
      const CertifyReport report = run_certify(config);
      write_file(fs::path(out_dir) / ("certify_" + tableau_name + ".json"),
                 to_json(config, report));
      std::cout << report.text() << "\n";
    }
  } catch (const BlowUpError& e) {
    std::cerr << "blow-up: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
