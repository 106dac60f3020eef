#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ees {

enum class Activation { identity, lipswish };

/// LipSwish(u) = u sigmoid(u) / 1.1; Lipschitz constant at most 1.
double lipswish(double u);
double lipswish_grad(double u);

/// Dense multilayer perceptron over flat double-precision parameters.
/// Layer l maps dims[l] -> dims[l+1] through weights (row-major, out x in)
/// followed by a bias and the layer's activation. Parameters are mutable
/// through params(); everything else is immutable after construction.
class Mlp {
 public:
  Mlp(std::vector<int> dims, std::vector<Activation> activations);

  /// Hidden layers get `hidden`, the output layer identity.
  static Mlp make(std::vector<int> dims, Activation hidden = Activation::lipswish);
  /// make() with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weight and bias
  /// initialization, fully determined by the seed.
  static Mlp random(std::vector<int> dims, std::uint64_t seed,
                    Activation hidden = Activation::lipswish);

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int layer_count() const { return static_cast<int>(activations_.size()); }
  int param_count() const { return static_cast<int>(params_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Activation>& activations() const { return activations_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> weights(int layer);
  std::span<double> biases(int layer);

  void forward(std::span<const double> input, std::span<double> output) const;

  /// Exact reverse-mode derivative of forward() at (params, input), applied
  /// to output_cotangent. Activations are recomputed locally; nothing is
  /// retained between calls. Gradients accumulate (+=) into param_grad and
  /// input_cotangent.
  void backprop(std::span<const double> input, std::span<const double> output_cotangent,
                std::span<double> param_grad, std::span<double> input_cotangent) const;

 private:
  std::vector<int> dims_;
  std::vector<Activation> activations_;
  std::vector<int> weight_offsets_;  // per layer; biases follow the weights
  std::vector<double> params_;
  int max_width_ = 0;
};

/// Gradient accumulator mirroring an Mlp's parameter layout, plus the
/// input-cotangent buffer.
struct GradTape {
  std::vector<double> param_grad;
  std::vector<double> input_cotangent;

  explicit GradTape(const Mlp& net)
      : param_grad(static_cast<std::size_t>(net.param_count()), 0.0),
        input_cotangent(static_cast<std::size_t>(net.input_dim()), 0.0) {}
  void reset();
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Standard Adam with bias correction.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// lr_k = lr0 * gamma^k.
double decayed_lr(double lr0, double gamma, long long epoch);

/// Checkpoint: flat little-endian float64 parameters at <prefix>.bin with a
/// JSON sidecar <prefix>.json describing dims and activations.
void save_mlp(const Mlp& net, const std::string& prefix);
Mlp load_mlp(const std::string& prefix);

}  // namespace ees
