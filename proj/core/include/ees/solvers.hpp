#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ees/drivers.hpp"
#include "ees/tableau.hpp"

namespace ees {

/// Vector fields f_0..f_d of a (rough/stochastic) differential equation
/// dy = sum_m f_m(y) dX^(m), with channel 0 driven by the time increment.
/// Implementations must be deterministic; non-finite outputs surface as
/// blow-up errors in the integrators.
class VectorField {
 public:
  VectorField(int channels, int dim) : channels_(channels), dim_(dim) {}
  virtual ~VectorField() = default;

  int channels() const { return channels_; }
  int dim() const { return dim_; }

  /// Writes all channel evaluations at (t, y) into `out`, one row of dim()
  /// values per channel (channels() x dim(), row-major).
  virtual void eval_all(double t, std::span<const double> y, std::span<double> out) const = 0;

 private:
  int channels_;
  int dim_;
};

/// Thrown when a state or stage turns non-finite. step_index is -1 when the
/// failure is not attached to a trajectory position.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(int step_index, const std::string& what)
      : std::runtime_error(what), step_index(step_index) {}
  int step_index;
};

struct RkStepResult {
  std::vector<double> y_next;
  std::vector<double> stages;  // s x dim, row-major: stage states k_i
};

/// One step of the increment-based RK scheme:
///   k_i = y + sum_m sum_{j<i} a_ij f_m(k_j) dX^(m),
///   y'  = y + sum_m sum_i   b_i  f_m(k_i) dX^(m).
/// Stage evaluations see time t + c_i * dX[0].
RkStepResult rk_step(const ButcherTableau& t, const VectorField& f, double t_n,
                     std::span<const double> y, std::span<const double> dX);

/// Reverse-time step: the same tableau applied with negated increments,
/// stepping from the state at t_end back across [t_end - h, t_end].
std::vector<double> rk_step_reverse(const ButcherTableau& t, const VectorField& f, double t_end,
                                    std::span<const double> y_next, std::span<const double> dX);

/// One-step map over a flat solver state. Two-state schemes store (y, v)
/// concatenated; the leading dim() entries are always the solution state y.
class Stepper {
 public:
  virtual ~Stepper() = default;

  virtual int state_size(int dim) const = 0;
  /// Initializes the solver state from y0 (two-state schemes set v here).
  virtual void init_state(const VectorField& f, double t0, std::span<const double> y0,
                          std::span<double> state) const = 0;
  /// Advances the state across [t, t + dX[0]] in place.
  virtual void step(const VectorField& f, double t, std::span<const double> dX,
                    std::span<double> state) const = 0;
  /// Undoes a step given the state at t_end (exactly for reversible schemes,
  /// to the scheme's reversibility order otherwise).
  virtual void step_back(const VectorField& f, double t_end, std::span<const double> dX,
                         std::span<double> state) const = 0;
};

/// Explicit RK scheme as a Stepper (single state y).
class RkStepper final : public Stepper {
 public:
  explicit RkStepper(ButcherTableau tableau) : tableau_(std::move(tableau)) {}
  const ButcherTableau& tableau() const { return tableau_; }

  int state_size(int dim) const override { return dim; }
  void init_state(const VectorField&, double, std::span<const double> y0,
                  std::span<double> state) const override;
  void step(const VectorField& f, double t, std::span<const double> dX,
            std::span<double> state) const override;
  void step_back(const VectorField& f, double t_end, std::span<const double> dX,
                 std::span<double> state) const override;

 private:
  ButcherTableau tableau_;
};

/// Reversible Heun: v' = 2y - v + sum_m f_m(t, v) dX^(m);
/// y' = y + 1/2 sum_m (f_m(t, v) + f_m(t + dX[0], v')) dX^(m). Exactly
/// invertible; v initialized to y0.
class ReversibleHeunStepper final : public Stepper {
 public:
  int state_size(int dim) const override { return 2 * dim; }
  void init_state(const VectorField&, double, std::span<const double> y0,
                  std::span<double> state) const override;
  void step(const VectorField& f, double t, std::span<const double> dX,
            std::span<double> state) const override;
  void step_back(const VectorField& f, double t_end, std::span<const double> dX,
                 std::span<double> state) const override;
};

/// Asynchronous leapfrog (ODE-only; the field must have exactly one channel,
/// the time channel). State is (y, v) with v0 = f(t0, y0).
class AlfStepper final : public Stepper {
 public:
  int state_size(int dim) const override { return 2 * dim; }
  void init_state(const VectorField& f, double t0, std::span<const double> y0,
                  std::span<double> state) const override;
  void step(const VectorField& f, double t, std::span<const double> dX,
            std::span<double> state) const override;
  void step_back(const VectorField& f, double t_end, std::span<const double> dX,
                 std::span<double> state) const override;
};

/// Reversible coupling wrapper around a base one-step method Psi (an explicit
/// RK increment over the time channel):
///   y' = c y + (1 - c) v + Psi_h(t, v),  v' = v - Psi_{-h}(t + h, y'),
/// for coupling c in (0, 1]. Exactly invertible.
class CoupledStepper final : public Stepper {
 public:
  CoupledStepper(ButcherTableau base, double coupling);

  int state_size(int dim) const override { return 2 * dim; }
  void init_state(const VectorField&, double, std::span<const double> y0,
                  std::span<double> state) const override;
  void step(const VectorField& f, double t, std::span<const double> dX,
            std::span<double> state) const override;
  void step_back(const VectorField& f, double t_end, std::span<const double> dX,
                 std::span<double> state) const override;

 private:
  ButcherTableau base_;
  double coupling_;
};

/// Dense trajectory of solver states (steps + 1 rows).
struct Trajectory {
  int state_dim = 0;
  int primary_dim = 0;
  std::vector<double> data;  // (steps + 1) x state_dim

  int points() const { return static_cast<int>(data.size()) / state_dim; }
  std::span<const double> state(int n) const {
    return {data.data() + n * state_dim,
            static_cast<std::size_t>(state_dim)};
  }
  /// Solution component y of the state at index n.
  std::span<const double> primary(int n) const {
    return {data.data() + n * state_dim,
            static_cast<std::size_t>(primary_dim)};
  }
};

/// Drives the stepper across the whole path. Deterministic; throws
/// BlowUpError with the offending step index on non-finite states.
Trajectory integrate(const Stepper& stepper, const VectorField& f, std::span<const double> y0,
                     const DriverPath& path);

/// Runs the reverse-time scheme from the state at `from_step` back to 0.
/// Returns states indexed 0..from_step, index n holding the reconstruction
/// of the forward state at step n (so index 0 approximates y0).
Trajectory reconstruct_backward(const Stepper& stepper, const VectorField& f,
                                std::span<const double> state_at_from, const DriverPath& path,
                                int from_step = -1);

/// CSV export of the primary component: header "step,t,y_0..y_{q-1}".
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory, const TimeGrid& grid);

}  // namespace ees
