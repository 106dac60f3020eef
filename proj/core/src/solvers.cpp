#include "ees/solvers.hpp"

#include <cmath>
#include <ostream>

namespace ees {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void check_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw BlowUpError(-1, std::string(what) + " turned non-finite");
}

std::vector<double> negated(std::span<const double> dX) {
  std::vector<double> out(dX.size());
  for (std::size_t i = 0; i < dX.size(); ++i) out[i] = -dX[i];
  return out;
}

// Per-stage field contraction G_j = sum_m f_m(k_j) dX^(m); shared by the
// plain step and the stage-exposing step.
void rk_step_core(const ButcherTableau& t, const VectorField& f, double t_n,
                  std::span<const double> y, std::span<const double> dX,
                  std::vector<double>* stages_out, std::span<double> y_next) {
  const int s = t.stages;
  const int q = f.dim();
  const int ch = f.channels();

  std::vector<double> stage(q);
  std::vector<double> evals(ch * q);
  std::vector<double> g(s * q);

  for (int i = 0; i < q; ++i) y_next[i] = y[i];

  for (int i = 0; i < s; ++i) {
    for (int l = 0; l < q; ++l) stage[l] = y[l];
    for (int j = 0; j < i; ++j) {
      const double aij = t.a_at(i, j);
      if (aij == 0.0) continue;
      const double* gj = g.data() + j * q;
      for (int l = 0; l < q; ++l) stage[l] += aij * gj[l];
    }
    check_finite(stage, "rk stage");
    if (stages_out) {
      stages_out->insert(stages_out->end(), stage.begin(), stage.end());
    }

    const double t_stage = t_n + t.c[i] * dX[0];
    f.eval_all(t_stage, stage, evals);
    double* gi = g.data() + i * q;
    for (int l = 0; l < q; ++l) gi[l] = 0.0;
    for (int m = 0; m < ch; ++m) {
      const double w = dX[m];
      if (w == 0.0) continue;
      const double* fm = evals.data() + m * q;
      for (int l = 0; l < q; ++l) gi[l] += w * fm[l];
    }

    const double bi = t.b[i];
    for (int l = 0; l < q; ++l) y_next[l] += bi * gi[l];
  }
  check_finite(y_next, "rk step");
}

}  // namespace

RkStepResult rk_step(const ButcherTableau& t, const VectorField& f, double t_n,
                     std::span<const double> y, std::span<const double> dX) {
  RkStepResult result;
  result.y_next.resize(y.size());
  result.stages.reserve(t.stages * f.dim());
  rk_step_core(t, f, t_n, y, dX, &result.stages, result.y_next);
  return result;
}

std::vector<double> rk_step_reverse(const ButcherTableau& t, const VectorField& f, double t_end,
                                    std::span<const double> y_next, std::span<const double> dX) {
  const std::vector<double> neg = negated(dX);
  std::vector<double> y(y_next.size());
  rk_step_core(t, f, t_end, y_next, neg, nullptr, y);
  return y;
}

void RkStepper::init_state(const VectorField&, double, std::span<const double> y0,
                           std::span<double> state) const {
  std::copy(y0.begin(), y0.end(), state.begin());
}

void RkStepper::step(const VectorField& f, double t, std::span<const double> dX,
                     std::span<double> state) const {
  std::vector<double> y(state.begin(), state.end());
  rk_step_core(tableau_, f, t, y, dX, nullptr, state);
}

void RkStepper::step_back(const VectorField& f, double t_end, std::span<const double> dX,
                          std::span<double> state) const {
  std::vector<double> y(state.begin(), state.end());
  const std::vector<double> neg = negated(dX);
  rk_step_core(tableau_, f, t_end, y, neg, nullptr, state);
}

namespace {

// sum_m f_m(t, y) dX^(m)
void contract_field(const VectorField& f, double t, std::span<const double> y,
                    std::span<const double> dX, std::vector<double>& evals,
                    std::span<double> out) {
  const int q = f.dim();
  const int ch = f.channels();
  evals.resize(ch * q);
  f.eval_all(t, y, evals);
  for (int l = 0; l < q; ++l) out[l] = 0.0;
  for (int m = 0; m < ch; ++m) {
    const double w = dX[m];
    if (w == 0.0) continue;
    const double* fm = evals.data() + m * q;
    for (int l = 0; l < q; ++l) out[l] += w * fm[l];
  }
}

}  // namespace

void ReversibleHeunStepper::init_state(const VectorField&, double, std::span<const double> y0,
                                       std::span<double> state) const {
  std::copy(y0.begin(), y0.end(), state.begin());
  std::copy(y0.begin(), y0.end(), state.begin() + static_cast<std::ptrdiff_t>(y0.size()));
}

void ReversibleHeunStepper::step(const VectorField& f, double t, std::span<const double> dX,
                                 std::span<double> state) const {
  const int q = f.dim();
  auto y = state.subspan(0, static_cast<std::size_t>(q));
  auto v = state.subspan(static_cast<std::size_t>(q), static_cast<std::size_t>(q));

  std::vector<double> evals;
  std::vector<double> fv(q);
  std::vector<double> fv_next(q);

  contract_field(f, t, v, dX, evals, fv);
  // v' is explicit; y' then uses it.
  for (int l = 0; l < q; ++l) {
    v[l] =
        2.0 * y[l] - v[l] + fv[l];
  }
  contract_field(f, t + dX[0], v, dX, evals, fv_next);
  for (int l = 0; l < q; ++l) {
    y[l] +=
        0.5 * (fv[l] + fv_next[l]);
  }
  check_finite(state, "reversible heun step");
}

void ReversibleHeunStepper::step_back(const VectorField& f, double t_end,
                                      std::span<const double> dX, std::span<double> state) const {
  // The algebraic inverse equals a forward step with negated increments
  // taken from (y', v') at t_end.
  const std::vector<double> neg = negated(dX);
  step(f, t_end, neg, state);
}

void AlfStepper::init_state(const VectorField& f, double t0, std::span<const double> y0,
                            std::span<double> state) const {
  if (f.channels() != 1) {
    throw std::invalid_argument("AlfStepper: ODE-only scheme (single time channel)");
  }
  const int q = f.dim();
  std::copy(y0.begin(), y0.end(), state.begin());
  std::vector<double> v(q);
  f.eval_all(t0, y0, v);
  std::copy(v.begin(), v.end(), state.begin() + q);
}

void AlfStepper::step(const VectorField& f, double t, std::span<const double> dX,
                      std::span<double> state) const {
  const int q = f.dim();
  const double h = dX[0];
  auto y = state.subspan(0, static_cast<std::size_t>(q));
  auto v = state.subspan(static_cast<std::size_t>(q), static_cast<std::size_t>(q));

  std::vector<double> midpoint(q);
  for (int l = 0; l < q; ++l) {
    midpoint[l] =
        y[l] + 0.5 * h * v[l];
  }
  std::vector<double> fmid(q);
  f.eval_all(t + 0.5 * h, midpoint, fmid);
  for (int l = 0; l < q; ++l) {
    y[l] += h * fmid[l];
    v[l] =
        2.0 * fmid[l] - v[l];
  }
  check_finite(state, "alf step");
}

void AlfStepper::step_back(const VectorField& f, double t_end, std::span<const double> dX,
                           std::span<double> state) const {
  // Exact inverse: the midpoint state equals y' - (h/2) v', so the single
  // evaluation is recoverable from the updated state.
  const int q = f.dim();
  const double h = dX[0];
  auto y = state.subspan(0, static_cast<std::size_t>(q));
  auto v = state.subspan(static_cast<std::size_t>(q), static_cast<std::size_t>(q));

  std::vector<double> midpoint(q);
  for (int l = 0; l < q; ++l) {
    midpoint[l] =
        y[l] - 0.5 * h * v[l];
  }
  std::vector<double> fmid(q);
  f.eval_all(t_end - 0.5 * h, midpoint, fmid);
  for (int l = 0; l < q; ++l) {
    y[l] -= h * fmid[l];
    v[l] =
        2.0 * fmid[l] - v[l];
  }
  check_finite(state, "alf reverse step");
}

CoupledStepper::CoupledStepper(ButcherTableau base, double coupling)
    : base_(std::move(base)), coupling_(coupling) {
  if (!(coupling > 0.0 && coupling <= 1.0)) {
    throw std::invalid_argument("CoupledStepper: coupling must lie in (0, 1]");
  }
}

void CoupledStepper::init_state(const VectorField&, double, std::span<const double> y0,
                                std::span<double> state) const {
  std::copy(y0.begin(), y0.end(), state.begin());
  std::copy(y0.begin(), y0.end(), state.begin() + static_cast<std::ptrdiff_t>(y0.size()));
}

void CoupledStepper::step(const VectorField& f, double t, std::span<const double> dX,
                          std::span<double> state) const {
  const int q = f.dim();
  auto y = state.subspan(0, static_cast<std::size_t>(q));
  auto v = state.subspan(static_cast<std::size_t>(q), static_cast<std::size_t>(q));

  // Psi_h(t, u) = RK increment from u over the given increments.
  std::vector<double> scratch(q);
  auto psi = [&](double t_eval, std::span<const double> u, std::span<const double> inc,
                 std::span<double> out) {
    rk_step_core(base_, f, t_eval, u, inc, nullptr, scratch);
    for (int l = 0; l < q; ++l) {
      out[l] =
          scratch[l] - u[l];
    }
  };

  std::vector<double> increment(q);
  psi(t, v, dX, increment);
  for (int l = 0; l < q; ++l) {
    y[l] = coupling_ * y[l] +
                                     (1.0 - coupling_) * v[l] +
                                     increment[l];
  }
  const std::vector<double> neg = negated(dX);
  psi(t + dX[0], y, neg, increment);
  for (int l = 0; l < q; ++l) {
    v[l] -= increment[l];
  }
  check_finite(state, "coupled step");
}

void CoupledStepper::step_back(const VectorField& f, double t_end, std::span<const double> dX,
                               std::span<double> state) const {
  const int q = f.dim();
  auto y = state.subspan(0, static_cast<std::size_t>(q));
  auto v = state.subspan(static_cast<std::size_t>(q), static_cast<std::size_t>(q));

  std::vector<double> scratch(q);
  auto psi = [&](double t_eval, std::span<const double> u, std::span<const double> inc,
                 std::span<double> out) {
    rk_step_core(base_, f, t_eval, u, inc, nullptr, scratch);
    for (int l = 0; l < q; ++l) {
      out[l] =
          scratch[l] - u[l];
    }
  };

  std::vector<double> increment(q);
  const std::vector<double> neg = negated(dX);
  psi(t_end, y, neg, increment);
  for (int l = 0; l < q; ++l) {
    v[l] += increment[l];
  }
  psi(t_end - dX[0], v, dX, increment);
  for (int l = 0; l < q; ++l) {
    y[l] =
        (y[l] - (1.0 - coupling_) * v[l] -
         increment[l]) /
        coupling_;
  }
  check_finite(state, "coupled reverse step");
}

Trajectory integrate(const Stepper& stepper, const VectorField& f, std::span<const double> y0,
                     const DriverPath& path) {
  const int q = f.dim();
  const int sd = stepper.state_size(q);
  const int n_steps = path.steps();

  Trajectory trajectory;
  trajectory.state_dim = sd;
  trajectory.primary_dim = q;
  trajectory.data.resize(static_cast<std::size_t>(n_steps + 1) * sd);

  std::vector<double> state(sd);
  stepper.init_state(f, path.grid().t0, y0, state);
  std::copy(state.begin(), state.end(), trajectory.data.begin());

  for (int n = 0; n < n_steps; ++n) {
    try {
      stepper.step(f, path.grid().time_at(n), path.increment(n), state);
    } catch (const BlowUpError& e) {
      throw BlowUpError(n, std::string(e.what()) + " at step " + std::to_string(n));
    }
    std::copy(state.begin(), state.end(),
              trajectory.data.begin() + static_cast<std::ptrdiff_t>(n + 1) * sd);
  }
  return trajectory;
}

Trajectory reconstruct_backward(const Stepper& stepper, const VectorField& f,
                                std::span<const double> state_at_from, const DriverPath& path,
                                int from_step) {
  const int q = f.dim();
  const int sd = stepper.state_size(q);
  if (from_step < 0) from_step = path.steps();
  if (static_cast<int>(state_at_from.size()) != sd) {
    throw std::invalid_argument("reconstruct_backward: state size mismatch");
  }

  Trajectory trajectory;
  trajectory.state_dim = sd;
  trajectory.primary_dim = q;
  trajectory.data.resize(static_cast<std::size_t>(from_step + 1) * sd);

  std::vector<double> state(state_at_from.begin(), state_at_from.end());
  std::copy(state.begin(), state.end(),
            trajectory.data.begin() + static_cast<std::ptrdiff_t>(from_step) * sd);
  for (int n = from_step - 1; n >= 0; --n) {
    try {
      stepper.step_back(f, path.grid().time_at(n + 1), path.increment(n), state);
    } catch (const BlowUpError& e) {
      throw BlowUpError(n, std::string(e.what()) + " reconstructing step " + std::to_string(n));
    }
    std::copy(state.begin(), state.end(),
              trajectory.data.begin() + static_cast<std::ptrdiff_t>(n) * sd);
  }
  return trajectory;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory, const TimeGrid& grid) {
  os << "step,t";
  for (int i = 0; i < trajectory.primary_dim; ++i) os << ",y_" << i;
  os << "\n";
  os.precision(17);
  for (int n = 0; n < trajectory.points(); ++n) {
    os << n << ',' << grid.time_at(n);
    for (double v : trajectory.primary(n)) os << ',' << v;
    os << "\n";
  }
}

}  // namespace ees
