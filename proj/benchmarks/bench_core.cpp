#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "ees/drivers.hpp"
#include "ees/fields.hpp"
#include "ees/mlp.hpp"
#include "ees/revgrad.hpp"
#include "ees/solvers.hpp"
#include "ees/stability.hpp"
#include "ees/tableau.hpp"

namespace {

using namespace ees;

class SineField final : public VectorField {
 public:
  SineField() : VectorField(3, 1) {}
  void eval_all(double, std::span<const double> y, std::span<double> out) const override {
    out[0] = 0.0;
    out[1] = std::cos(y[0]);
    out[2] = std::sin(y[0]);
  }
};

void BM_RkStepScalar(benchmark::State& state) {
  const ButcherTableau tab = ees25(0.1);
  const SineField field;
  const std::vector<double> y0{1.0};
  const std::vector<double> dX{0.01, 0.05, -0.02};
  for (auto _ : state) {
    auto result = rk_step(tab, field, 0.0, y0, dX);
    benchmark::DoNotOptimize(result.y_next[0]);
  }
}
BENCHMARK(BM_RkStepScalar);

void BM_IntegrateLangevin(benchmark::State& state) {
  const auto latent = static_cast<int>(state.range(0));
  LangevinField field(Mlp::random({latent, 32, latent}, 1), Mlp::random({1, 32, latent}, 2));
  const TimeGrid grid(0.0, 1.0, 100);
  const DriverPath path = brownian_path(grid, latent, 3);
  const RkStepper stepper(ees25(0.1));
  const std::vector<double> z0(latent, 0.1);
  for (auto _ : state) {
    auto trajectory = integrate(stepper, field, z0, path);
    benchmark::DoNotOptimize(trajectory.data.back());
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_IntegrateLangevin)->Arg(8)->Arg(32);

void BM_ReversibleBackprop(benchmark::State& state) {
  const auto latent = static_cast<int>(state.range(0));
  LangevinField field(Mlp::random({latent, 32, latent}, 1), Mlp::random({1, 32, latent}, 2));
  const TimeGrid grid(0.0, 1.0, 100);
  const DriverPath path = brownian_path(grid, latent, 3);
  const RkStepper stepper(ees25(0.1));
  const std::vector<double> z0(latent, 0.1);
  const Trajectory fwd = integrate(stepper, field, z0, path);
  const StepCotangent loss = [](int n, std::span<const double>, std::span<double> cot) {
    if (n == 100) cot[0] += 1.0;
  };
  for (auto _ : state) {
    auto result = reversible_backprop(ees25(0.1), field, fwd.primary(100), path, loss);
    benchmark::DoNotOptimize(result.param_grad[0]);
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_ReversibleBackprop)->Arg(8)->Arg(32);

void BM_FbmGeneration(benchmark::State& state) {
  const auto steps = static_cast<int>(state.range(0));
  const TimeGrid grid(0.0, 1.0, steps);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto path = fbm_path(grid, 2, 0.6, seed++);
    benchmark::DoNotOptimize(path.at(steps - 1, 1));
  }
}
BENCHMARK(BM_FbmGeneration)->Arg(256)->Arg(4096);

void BM_MeanSquareExpectation(benchmark::State& state) {
  const ButcherTableau tab = ees25(0.1);
  double lh = -2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stability::mean_square_expectation(tab, {lh, 0.0}, 0.5));
    lh += 1e-9;
  }
}
BENCHMARK(BM_MeanSquareExpectation);

}  // namespace

BENCHMARK_MAIN();
