#pragma once

#include <span>
#include <vector>

#include "ees/mlp.hpp"
#include "ees/revgrad.hpp"

namespace ees {

/// ODE field dy = net(y) dt: one (time) channel driven by an MLP.
class MlpOdeField final : public ParametricField {
 public:
  explicit MlpOdeField(Mlp net);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  int param_count() const override { return net_.param_count(); }
  void eval_all(double t, std::span<const double> y, std::span<double> out) const override;
  void backprop_all(double t, std::span<const double> y, std::span<const double> cotangents,
                    std::span<double> param_grad, std::span<double> y_cot) const override;

 private:
  Mlp net_;
};

/// Langevin-type latent SDE field dz = g(z) dt + f(t) o dW with diagonal
/// time-only diffusion: channel 0 is the drift net g: R^dz -> R^dz, channel
/// m in 1..dz adds f(t)_m to coordinate m-1. Parameters are the drift net's
/// followed by the diffusion net's.
class LangevinField final : public ParametricField {
 public:
  LangevinField(Mlp drift, Mlp diffusion);

  Mlp& drift() { return drift_; }
  Mlp& diffusion() { return diffusion_; }
  const Mlp& drift() const { return drift_; }
  const Mlp& diffusion() const { return diffusion_; }
  int drift_params() const { return drift_.param_count(); }

  int param_count() const override { return drift_.param_count() + diffusion_.param_count(); }
  void eval_all(double t, std::span<const double> y, std::span<double> out) const override;
  void backprop_all(double t, std::span<const double> y, std::span<const double> cotangents,
                    std::span<double> param_grad, std::span<double> y_cot) const override;

 private:
  Mlp drift_;
  Mlp diffusion_;
};

/// Scalar SDE field dS = g(t, S) dt + f(t, S) o dW with both nets taking the
/// input pair (t, S). Parameters are drift followed by diffusion.
class ScalarSdeField final : public ParametricField {
 public:
  ScalarSdeField(Mlp drift, Mlp diffusion);

  Mlp& drift() { return drift_; }
  Mlp& diffusion() { return diffusion_; }
  int drift_params() const { return drift_.param_count(); }

  int param_count() const override { return drift_.param_count() + diffusion_.param_count(); }
  void eval_all(double t, std::span<const double> y, std::span<double> out) const override;
  void backprop_all(double t, std::span<const double> y, std::span<const double> cotangents,
                    std::span<double> param_grad, std::span<double> y_cot) const override;

 private:
  Mlp drift_;
  Mlp diffusion_;
};

}  // namespace ees
