#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ees/drivers.hpp"
#include "ees/solvers.hpp"
#include "ees/tableau.hpp"

namespace ees {

/// Vector field with learnable parameters and reverse-mode derivatives.
class ParametricField : public VectorField {
 public:
  using VectorField::VectorField;

  virtual int param_count() const = 0;

  /// Accumulates (+=) the chain-rule pullback of `cotangents` (channels() x
  /// dim(), row-major, matching eval_all) through the field at (t, y):
  /// parameter gradients into param_grad and the state cotangent into y_cot.
  /// Internal activations are recomputed; nothing persists across calls.
  virtual void backprop_all(double t, std::span<const double> y,
                            std::span<const double> cotangents, std::span<double> param_grad,
                            std::span<double> y_cot) const = 0;
};

/// Supplies the direct loss cotangent dL/dy_n for step n; `y_n` is the
/// solver's (reconstructed or stored) solution state at that step. Called
/// once per step index from N down to 0.
using StepCotangent =
    std::function<void(int n, std::span<const double> y_n, std::span<double> cotangent)>;

struct BackpropResult {
  std::vector<double> param_grad;
  std::vector<double> y0_grad;
  std::vector<double> y0_reconstructed;
  /// max-norm distance between the reconstructed initial state and the
  /// reference passed in the options (0 when no reference was given).
  double reconstruction_error = 0.0;
  bool divergence_flag = false;
  /// Bytes of solver workspace retained during the backward pass, excluding
  /// the caller-owned increment and cotangent inputs.
  std::size_t workspace_bytes = 0;
};

struct BackpropOptions {
  /// Optional known initial state (primary dim); enables the divergence
  /// check on the reconstructed y_0.
  std::vector<double> y0_reference;
  double divergence_tolerance = 1e-3;
  /// Records |y_hat_n| (max-norm) at every stride-th step of the backward
  /// sweep into *probes when it is non-null, in descending n order. Keeps
  /// O(N / stride) scalars as a drift diagnostic.
  int probe_stride = 64;
  std::vector<double>* probes = nullptr;
};

/// One backward step of reversible backpropagation through an explicit RK
/// scheme: reconstructs y_n from y_{n+1} with the reverse-time step,
/// recomputes the stages, pulls the cotangent back through them, and
/// accumulates parameter gradients. y/y_cot are updated in place from
/// (y_{n+1}, dL/dy_{n+1}) to (y_n, dL/dy_n).
void reversible_backprop_step(const ButcherTableau& t, const ParametricField& f, double t_n,
                              std::span<const double> dX, std::vector<double>& y,
                              std::vector<double>& y_cot, std::span<double> param_grad);

/// Full reversible backward pass from the terminal solution state. Memory
/// contract: retains only the current state, its cotangent, the parameter
/// accumulator and fixed stage workspace; the forward trajectory is never
/// materialized. Per-step loss cotangents come from the callback.
BackpropResult reversible_backprop(const ButcherTableau& t, const ParametricField& f,
                                   std::span<const double> terminal_y, const DriverPath& path,
                                   const StepCotangent& loss_cotangent,
                                   const BackpropOptions& options = {});

/// Reversible Heun variant over the two-state (y, v) solver state; the
/// terminal state is the 2q-dimensional stepper state. Reconstruction is
/// exact, so gradients match the stored-trajectory oracle to rounding.
BackpropResult reversible_backprop_heun(const ParametricField& f,
                                        std::span<const double> terminal_state,
                                        const DriverPath& path,
                                        const StepCotangent& loss_cotangent,
                                        const BackpropOptions& options = {});

/// Discretise-then-optimise baseline: stores the forward trajectory and
/// differentiates the unrolled solver exactly. Reference for gradient
/// accuracy at O(N q) memory.
BackpropResult stored_backprop(const ButcherTableau& t, const ParametricField& f,
                               std::span<const double> y0, const DriverPath& path,
                               const StepCotangent& loss_cotangent);

BackpropResult stored_backprop_heun(const ParametricField& f, std::span<const double> y0,
                                    const DriverPath& path, const StepCotangent& loss_cotangent);

}  // namespace ees
