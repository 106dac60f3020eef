#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "ees/mlp.hpp"
#include "ees/rng.hpp"

using namespace ees;

TEST_CASE("lipswish pointwise properties") {
  CHECK(lipswish(0.0) == 0.0);
  CHECK(lipswish(50.0) / 50.0 == doctest::Approx(1.0 / 1.1).epsilon(1e-9));
  CHECK(lipswish(-50.0) == doctest::Approx(0.0).epsilon(1e-9));

  // Lipschitz bound over random pairs
  rng::NormalStream noise(5, 1);
  double max_ratio = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = 4.0 * noise.next();
    const double w = 4.0 * noise.next();
    if (u == w) continue;
    max_ratio = std::max(max_ratio, std::abs(lipswish(u) - lipswish(w)) / std::abs(u - w));
  }
  CHECK(max_ratio <= 1.0);
}

TEST_CASE("zero parameters map to zero output") {
  const Mlp net = Mlp::make({3, 8, 2});
  std::vector<double> out(2, 1.0);
  net.forward(std::vector<double>{0.4, -0.2, 1.0}, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("identity-activation single layer is a plain affine map") {
  Mlp net({2, 2}, {Activation::identity});
  auto w = net.weights(0);
  auto b = net.biases(0);
  w[0] = 1.0; w[1] = 2.0;   // row 0
  w[2] = -0.5; w[3] = 0.25; // row 1
  b[0] = 0.1; b[1] = -0.2;

  std::vector<double> out(2);
  net.forward(std::vector<double>{2.0, -1.0}, out);
  CHECK(out[0] == doctest::Approx(1.0 * 2.0 + 2.0 * -1.0 + 0.1).epsilon(1e-15));
  CHECK(out[1] == doctest::Approx(-0.5 * 2.0 + 0.25 * -1.0 - 0.2).epsilon(1e-15));
}

TEST_CASE("single affine layer backprop matches the symbolic derivative") {
  Mlp net({2, 2}, {Activation::identity});
  auto w = net.weights(0);
  auto b = net.biases(0);
  w[0] = 1.5; w[1] = -0.3;
  w[2] = 0.7; w[3] = 0.2;
  b[0] = 0.0; b[1] = 0.5;

  const std::vector<double> x{0.8, -1.2};
  const std::vector<double> cot{2.0, -1.0};
  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<double> x_cot(2, 0.0);
  net.backprop(x, cot, grad, x_cot);

  // input cotangent = W^T u
  CHECK(x_cot[0] == doctest::Approx(1.5 * 2.0 + 0.7 * -1.0).epsilon(1e-15));
  CHECK(x_cot[1] == doctest::Approx(-0.3 * 2.0 + 0.2 * -1.0).epsilon(1e-15));
  // weight grad = u (x) x
  CHECK(grad[0] == doctest::Approx(2.0 * 0.8).epsilon(1e-15));
  CHECK(grad[1] == doctest::Approx(2.0 * -1.2).epsilon(1e-15));
  CHECK(grad[2] == doctest::Approx(-1.0 * 0.8).epsilon(1e-15));
  CHECK(grad[3] == doctest::Approx(-1.0 * -1.2).epsilon(1e-15));
  // bias grad = u
  CHECK(grad[4] == 2.0);
  CHECK(grad[5] == -1.0);
}

TEST_CASE("zero cotangent produces zero gradients") {
  const Mlp net = Mlp::random({3, 16, 3}, 77);
  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<double> x_cot(3, 0.0);
  net.backprop(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.0, 0.0, 0.0}, grad,
               x_cot);
  for (double g : grad) CHECK(g == 0.0);
  for (double g : x_cot) CHECK(g == 0.0);
}

namespace {

// central finite differences of a scalar projection of the network output
double fd_directional(const Mlp& net, std::vector<double> params_copy,
                      const std::vector<double>& x, const std::vector<double>& cot,
                      std::span<const double> direction, double step) {
  Mlp probe = net;
  auto project = [&](double shift) {
    auto p = probe.params();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = params_copy[i] + shift * direction[i];
    std::vector<double> out(probe.output_dim());
    probe.forward(x, out);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += cot[i] * out[i];
    return acc;
  };
  return (project(step) - project(-step)) / (2.0 * step);
}

}  // namespace

TEST_CASE("gradient checks across the layer shapes used in the experiments") {
  // 2 hidden layers of width 32, and 3 of width 8
  for (const auto& dims : {std::vector<int>{2, 32, 32, 2}, std::vector<int>{2, 8, 8, 8, 1}}) {
    const Mlp net = Mlp::random(dims, 11);
    rng::NormalStream noise(13, 2);

    std::vector<double> x(net.input_dim());
    for (auto& v : x) v = noise.next();
    std::vector<double> cot(net.output_dim());
    for (auto& v : cot) v = noise.next();

    std::vector<double> grad(net.param_count(), 0.0);
    std::vector<double> x_cot(x.size(), 0.0);
    net.backprop(x, cot, grad, x_cot);

    // random direction in parameter space
    std::vector<double> direction(grad.size());
    for (auto& v : direction) v = noise.next();
    double analytic = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) analytic += grad[i] * direction[i];

    const std::vector<double> params_copy(net.params().begin(), net.params().end());
    const double numeric = fd_directional(net, params_copy, x, cot, direction, 1e-5);
    CHECK(std::abs(analytic - numeric) <=
          1e-5 * std::max({1.0, std::abs(analytic), std::abs(numeric)}));

    // input cotangent against finite differences in the input
    for (int i = 0; i < net.input_dim(); ++i) {
      auto probe = [&](double shift) {
        std::vector<double> xx = x;
        xx[i] += shift;
        std::vector<double> out(net.output_dim());
        net.forward(xx, out);
        double acc = 0.0;
        for (std::size_t k = 0; k < out.size(); ++k) acc += cot[k] * out[k];
        return acc;
      };
      const double numeric_in = (probe(1e-6) - probe(-1e-6)) / 2e-6;
      CHECK(std::abs(x_cot[i] - numeric_in) <=
            1e-5 * std::max(1.0, std::abs(numeric_in)));
    }
  }
}

TEST_CASE("backprop is linear in the cotangent") {
  const Mlp net = Mlp::random({2, 8, 2}, 3);
  const std::vector<double> x{0.5, -0.5};
  const std::vector<double> u{1.0, 0.25};
  const std::vector<double> w{-0.5, 2.0};
  const double c1 = 0.7, c2 = -1.3;

  auto run = [&](const std::vector<double>& cot) {
    std::vector<double> grad(net.param_count(), 0.0);
    std::vector<double> x_cot(2, 0.0);
    net.backprop(x, cot, grad, x_cot);
    grad.insert(grad.end(), x_cot.begin(), x_cot.end());
    return grad;
  };

  std::vector<double> combined(2);
  for (int i = 0; i < 2; ++i) {
    combined[i] =
        c1 * u[i] + c2 * w[i];
  }
  const auto lhs = run(combined);
  const auto gu = run(u);
  const auto gw = run(w);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    CHECK(lhs[i] == doctest::Approx(c1 * gu[i] + c2 * gw[i]).epsilon(1e-12));
  }
}

TEST_CASE("random initialization is seed deterministic and bounded") {
  const Mlp a = Mlp::random({4, 16, 2}, 99);
  const Mlp b = Mlp::random({4, 16, 2}, 99);
  const Mlp c = Mlp::random({4, 16, 2}, 100);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  bool differs = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    differs = differs || (a.params()[i] != c.params()[i]);
  }
  CHECK(differs);

  Mlp net = Mlp::random({4, 16, 2}, 5);
  const double bound0 = 1.0 / std::sqrt(4.0);
  for (double w : net.weights(0)) CHECK(std::abs(w) <= bound0);
  const double bound1 = 1.0 / std::sqrt(16.0);
  for (double w : net.weights(1)) CHECK(std::abs(w) <= bound1);
}

TEST_CASE("adam: zero gradient leaves parameters fixed while moments decay") {
  Mlp net = Mlp::random({2, 4, 1}, 21);
  const std::vector<double> before(net.params().begin(), net.params().end());
  AdamState state(net.param_count());
  state.m.assign(state.m.size(), 0.5);
  state.v.assign(state.v.size(), 0.25);

  // zero gradient: m and v decay toward zero and the bias-corrected update
  // uses the decayed first moment
  const std::vector<double> zeros(net.param_count(), 0.0);
  adam_step(net.params(), zeros, state, 0.0);  // lr = 0 isolates the moment update
  CHECK(state.m[0] == doctest::Approx(0.45));
  CHECK(state.v[0] == doctest::Approx(0.249750));
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(net.params()[i] == before[i]);
}

TEST_CASE("adam first step matches the hand-computed bias-corrected update") {
  std::vector<double> params{1.0, -2.0};
  const std::vector<double> grads{0.3, -0.6};
  AdamState state(2);
  const double lr = 1e-2, eps = 1e-8;
  adam_step(params, grads, state, lr, 0.9, 0.999, eps);
  // m_hat = g, v_hat = g^2 after bias correction: step = -lr g / (|g| + eps)
  CHECK(params[0] == doctest::Approx(1.0 - lr * 0.3 / (0.3 + eps)).epsilon(1e-12));
  CHECK(params[1] == doctest::Approx(-2.0 + lr * 0.6 / (0.6 + eps)).epsilon(1e-12));
}

TEST_CASE("learning-rate decay") {
  CHECK(decayed_lr(1e-2, 0.99, 0) == doctest::Approx(1e-2));
  CHECK(decayed_lr(1e-2, 0.99, 100) == doctest::Approx(1e-2 * 0.366032341273229).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip through the flat binary and sidecar") {
  namespace fs = std::filesystem;
  const Mlp net = Mlp::random({3, 8, 2}, 4242);
  const std::string prefix = (fs::temp_directory_path() / "ees_mlp_ckpt").string();
  save_mlp(net, prefix);
  const Mlp back = load_mlp(prefix);
  CHECK(back.dims() == net.dims());
  CHECK(std::equal(back.params().begin(), back.params().end(), net.params().begin()));
  fs::remove(prefix + ".bin");
  fs::remove(prefix + ".json");
}
