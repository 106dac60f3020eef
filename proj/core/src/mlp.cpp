#include "ees/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ees/rng.hpp"

namespace ees {

double lipswish(double u) { return u / ((1.0 + std::exp(-u)) * 1.1); }

double lipswish_grad(double u) {
  const double s = 1.0 / (1.0 + std::exp(-u));
  return (s + u * s * (1.0 - s)) / 1.1;
}

Mlp::Mlp(std::vector<int> dims, std::vector<Activation> activations)
    : dims_(std::move(dims)), activations_(std::move(activations)) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
  if (activations_.size() != dims_.size() - 1) {
    throw std::invalid_argument("Mlp: one activation per layer required");
  }
  int total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] < 1 || dims_[l + 1] < 1) throw std::invalid_argument("Mlp: empty layer");
    weight_offsets_.push_back(total);
    total += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
  max_width_ = *std::max_element(dims_.begin(), dims_.end());
}

Mlp Mlp::make(std::vector<int> dims, Activation hidden) {
  std::vector<Activation> acts(dims.size() - 1, hidden);
  acts.back() = Activation::identity;
  return Mlp(std::move(dims), std::move(acts));
}

Mlp Mlp::random(std::vector<int> dims, std::uint64_t seed, Activation hidden) {
  Mlp net = make(std::move(dims), hidden);
  rng::NormalStream stream(seed, 0x4d4c50ULL);
  for (int l = 0; l < net.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.dims_[l]));
    for (double& w : net.weights(l)) w = bound * (2.0 * stream.next_uniform() - 1.0);
    for (double& b : net.biases(l)) b = bound * (2.0 * stream.next_uniform() - 1.0);
  }
  return net;
}

std::span<double> Mlp::weights(int layer) {
  const int in = dims_[layer];
  const int out = dims_[layer + 1];
  return {params_.data() + weight_offsets_[layer],
          static_cast<std::size_t>(in) * out};
}

std::span<double> Mlp::biases(int layer) {
  const int in = dims_[layer];
  const int out = dims_[layer + 1];
  return {params_.data() + weight_offsets_[layer] +
              static_cast<std::ptrdiff_t>(in) * out,
          static_cast<std::size_t>(out)};
}

void Mlp::forward(std::span<const double> input, std::span<double> output) const {
  if (static_cast<int>(input.size()) != input_dim() ||
      static_cast<int>(output.size()) != output_dim()) {
    throw std::invalid_argument("Mlp::forward: dimension mismatch");
  }
  std::vector<double> buf_a(input.begin(), input.end());
  std::vector<double> buf_b(max_width_);

  for (int l = 0; l < layer_count(); ++l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + weight_offsets_[l];
    const double* bias = w + static_cast<std::ptrdiff_t>(in) * out;
    buf_b.resize(out);
    for (int o = 0; o < out; ++o) {
      double acc = bias[o];
      const double* row = w + static_cast<std::ptrdiff_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * buf_a[i];
      buf_b[o] =
          activations_[l] == Activation::lipswish ? lipswish(acc) : acc;
    }
    buf_a = buf_b;
  }
  std::copy(buf_a.begin(), buf_a.end(), output.begin());
}

void Mlp::backprop(std::span<const double> input, std::span<const double> output_cotangent,
                   std::span<double> param_grad, std::span<double> input_cotangent) const {
  if (static_cast<int>(input.size()) != input_dim() ||
      static_cast<int>(output_cotangent.size()) != output_dim() ||
      static_cast<int>(param_grad.size()) != param_count() ||
      static_cast<int>(input_cotangent.size()) != input_dim()) {
    throw std::invalid_argument("Mlp::backprop: dimension mismatch");
  }

  // Recompute the forward pass, keeping per-layer inputs and pre-activations
  // for the duration of this call only.
  const int layers = layer_count();
  std::vector<std::vector<double>> layer_inputs(layers);
  std::vector<std::vector<double>> pre_acts(layers);
  std::vector<double> current(input.begin(), input.end());
  for (int l = 0; l < layers; ++l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + weight_offsets_[l];
    const double* bias = w + static_cast<std::ptrdiff_t>(in) * out;
    layer_inputs[l] = current;
    std::vector<double> pre(out);
    std::vector<double> next(out);
    for (int o = 0; o < out; ++o) {
      double acc = bias[o];
      const double* row = w + static_cast<std::ptrdiff_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * current[i];
      pre[o] = acc;
      next[o] =
          activations_[l] == Activation::lipswish ? lipswish(acc) : acc;
    }
    pre_acts[l] = std::move(pre);
    current = std::move(next);
  }

  std::vector<double> cot(output_cotangent.begin(), output_cotangent.end());
  for (int l = layers - 1; l >= 0; --l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + weight_offsets_[l];
    double* w_grad = param_grad.data() + weight_offsets_[l];
    double* b_grad = w_grad + static_cast<std::ptrdiff_t>(in) * out;
    const std::vector<double>& x = layer_inputs[l];
    const std::vector<double>& pre = pre_acts[l];

    // chain through the activation
    for (int o = 0; o < out; ++o) {
      if (activations_[l] == Activation::lipswish) {
        cot[o] *= lipswish_grad(pre[o]);
      }
    }
    std::vector<double> cot_in(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double g = cot[o];
      b_grad[o] += g;
      const double* row = w + static_cast<std::ptrdiff_t>(o) * in;
      double* grad_row = w_grad + static_cast<std::ptrdiff_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        grad_row[i] += g * x[i];
        cot_in[i] += g * row[i];
      }
    }
    cot = std::move(cot_in);
  }
  for (int i = 0; i < input_dim(); ++i) input_cotangent[i] += cot[i];
}

void GradTape::reset() {
  std::fill(param_grad.begin(), param_grad.end(), 0.0);
  std::fill(input_cotangent.begin(), input_cotangent.end(), 0.0);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

double decayed_lr(double lr0, double gamma, long long epoch) {
  return lr0 * std::pow(gamma, static_cast<double>(epoch));
}

void save_mlp(const Mlp& net, const std::string& prefix) {
  {
    std::ofstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("save_mlp: cannot open " + prefix + ".bin");
    bin.write(reinterpret_cast<const char*>(net.params().data()),
              static_cast<std::streamsize>(net.params().size() * sizeof(double)));
  }
  nlohmann::json meta;
  meta["dims"] = net.dims();
  std::vector<std::string> acts;
  for (Activation a : net.activations()) {
    acts.push_back(a == Activation::lipswish ? "lipswish" : "identity");
  }
  meta["activations"] = acts;
  meta["param_count"] = net.param_count();
  std::ofstream side(prefix + ".json");
  if (!side) throw std::runtime_error("save_mlp: cannot open " + prefix + ".json");
  side << meta.dump(2) << "\n";
}

Mlp load_mlp(const std::string& prefix) {
  std::ifstream side(prefix + ".json");
  if (!side) throw std::runtime_error("load_mlp: cannot open " + prefix + ".json");
  nlohmann::json meta = nlohmann::json::parse(side);
  std::vector<int> dims = meta.at("dims").get<std::vector<int>>();
  std::vector<Activation> acts;
  for (const std::string& name : meta.at("activations").get<std::vector<std::string>>()) {
    if (name == "lipswish") {
      acts.push_back(Activation::lipswish);
    } else if (name == "identity") {
      acts.push_back(Activation::identity);
    } else {
      throw std::runtime_error("load_mlp: unknown activation " + name);
    }
  }
  Mlp net(std::move(dims), std::move(acts));
  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("load_mlp: cannot open " + prefix + ".bin");
  bin.read(reinterpret_cast<char*>(net.params().data()),
           static_cast<std::streamsize>(net.params().size() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(net.params().size() * sizeof(double))) {
    throw std::runtime_error("load_mlp: checkpoint size mismatch");
  }
  return net;
}

}  // namespace ees
