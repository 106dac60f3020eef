#include "ees/revgrad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ees {

namespace {

double max_norm_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double max_norm(std::span<const double> a) {
  double worst = 0.0;
  for (double v : a) worst = std::max(worst, std::abs(v));
  return worst;
}

void check_state_finite(std::span<const double> y, int step) {
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw BlowUpError(step, "reverse reconstruction turned non-finite at step " +
                                  std::to_string(step));
    }
  }
}

// Preallocated buffers for the reversible RK backward sweep; sized once from
// (stages, dim, channels), never from the trajectory length.
struct RkBackpropWorkspace {
  std::vector<double> stage;       // q scratch for one stage state
  std::vector<double> evals;       // ch x q field evaluations
  std::vector<double> g;           // s x q per-stage increment contractions
  std::vector<double> stages;      // s x q recomputed stage states
  std::vector<double> stage_cot;   // s x q dL/dk_i
  std::vector<double> base;        // q cotangent seed per stage
  std::vector<double> cot_rows;    // ch x q channel cotangents
  std::vector<double> y_scratch;   // q reverse-step output
  std::vector<double> neg;         // ch negated increments

  void resize(int s, int q, int ch) {
    stage.resize(q);
    evals.resize(ch * q);
    g.resize(s * q);
    stages.resize(s * q);
    stage_cot.resize(s * q);
    base.resize(q);
    cot_rows.resize(ch * q);
    y_scratch.resize(q);
    neg.resize(ch);
  }

  std::size_t bytes() const {
    const auto total = stage.capacity() + evals.capacity() + g.capacity() + stages.capacity() +
                       stage_cot.capacity() + base.capacity() + cot_rows.capacity() +
                       y_scratch.capacity() + neg.capacity();
    return total * sizeof(double);
  }
};

// Forward sweep k_1..k_s from y at time t_start, keeping stage states and
// their increment contractions.
void recompute_stages(const ButcherTableau& t, const VectorField& f, double t_start,
                      std::span<const double> y, std::span<const double> dX,
                      RkBackpropWorkspace& ws) {
  const int s = t.stages;
  const int q = f.dim();
  const int ch = f.channels();
  for (int i = 0; i < s; ++i) {
    double* ki = ws.stages.data() + i * q;
    for (int l = 0; l < q; ++l) ki[l] = y[l];
    for (int j = 0; j < i; ++j) {
      const double aij = t.a_at(i, j);
      if (aij == 0.0) continue;
      const double* gj = ws.g.data() + j * q;
      for (int l = 0; l < q; ++l) ki[l] += aij * gj[l];
    }
    f.eval_all(t_start + t.c[i] * dX[0],
               {ki, static_cast<std::size_t>(q)}, ws.evals);
    double* gi = ws.g.data() + i * q;
    for (int l = 0; l < q; ++l) gi[l] = 0.0;
    for (int m = 0; m < ch; ++m) {
      const double w = dX[m];
      if (w == 0.0) continue;
      const double* fm = ws.evals.data() + m * q;
      for (int l = 0; l < q; ++l) gi[l] += w * fm[l];
    }
  }
}

// In-place reverse-time step (forward step with negated increments) writing
// into ws.y_scratch.
void reverse_step(const ButcherTableau& t, const VectorField& f, double t_end,
                  std::span<const double> y_next, std::span<const double> dX,
                  RkBackpropWorkspace& ws) {
  const int q = f.dim();
  const int ch = f.channels();
  for (int m = 0; m < ch; ++m) ws.neg[m] = -dX[m];
  recompute_stages(t, f, t_end, y_next, ws.neg, ws);
  for (int l = 0; l < q; ++l) ws.y_scratch[l] = y_next[l];
  for (int i = 0; i < t.stages; ++i) {
    const double bi = t.b[i];
    const double* gi = ws.g.data() + i * q;
    for (int l = 0; l < q; ++l) ws.y_scratch[l] += bi * gi[l];
  }
}

// The cotangent recursion of the backward pass, shared by the reversible
// engine; assumes ws.stages holds k_1..k_s for this step.
void rk_pullback(const ButcherTableau& t, const ParametricField& f, double t_start,
                 std::span<const double> dX, std::span<const double> y_next_cot,
                 std::span<double> param_grad, RkBackpropWorkspace& ws) {
  const int s = t.stages;
  const int q = f.dim();
  const int ch = f.channels();

  std::fill(ws.stage_cot.begin(), ws.stage_cot.end(), 0.0);
  for (int i = s - 1; i >= 0; --i) {
    // dL/dz_i^(m) = dX^(m) (b_i dL/dy_{n+1} + sum_{j>i} a_ji dL/dk_j)
    const double bi = t.b[i];
    for (int l = 0; l < q; ++l) {
      ws.base[l] = bi * y_next_cot[l];
    }
    for (int j = i + 1; j < s; ++j) {
      const double aji = t.a_at(j, i);
      if (aji == 0.0) continue;
      const double* kcj = ws.stage_cot.data() + j * q;
      for (int l = 0; l < q; ++l) ws.base[l] += aji * kcj[l];
    }
    for (int m = 0; m < ch; ++m) {
      const double w = dX[m];
      double* row = ws.cot_rows.data() + m * q;
      for (int l = 0; l < q; ++l) row[l] = w * ws.base[l];
    }
    const double* ki = ws.stages.data() + i * q;
    double* kci = ws.stage_cot.data() + i * q;
    f.backprop_all(t_start + t.c[i] * dX[0],
                   {ki, static_cast<std::size_t>(q)}, ws.cot_rows, param_grad,
                   {kci, static_cast<std::size_t>(q)});
  }
}

}  // namespace

void reversible_backprop_step(const ButcherTableau& t, const ParametricField& f, double t_n,
                              std::span<const double> dX, std::vector<double>& y,
                              std::vector<double>& y_cot, std::span<double> param_grad) {
  const int q = f.dim();
  RkBackpropWorkspace ws;
  ws.resize(t.stages, q, f.channels());

  reverse_step(t, f, t_n + dX[0], y, dX, ws);
  std::copy(ws.y_scratch.begin(), ws.y_scratch.end(), y.begin());
  check_state_finite(y, -1);

  recompute_stages(t, f, t_n, y, dX, ws);
  rk_pullback(t, f, t_n, dX, y_cot, param_grad, ws);

  for (int i = 0; i < t.stages; ++i) {
    const double* kci = ws.stage_cot.data() + i * q;
    for (int l = 0; l < q; ++l) y_cot[l] += kci[l];
  }
}

BackpropResult reversible_backprop(const ButcherTableau& t, const ParametricField& f,
                                   std::span<const double> terminal_y, const DriverPath& path,
                                   const StepCotangent& loss_cotangent,
                                   const BackpropOptions& options) {
  const int q = f.dim();
  const int n_steps = path.steps();

  BackpropResult result;
  result.param_grad.assign(f.param_count(), 0.0);
  result.y0_grad.assign(q, 0.0);

  RkBackpropWorkspace ws;
  ws.resize(t.stages, q, f.channels());

  std::vector<double> y(terminal_y.begin(), terminal_y.end());
  std::vector<double> y_cot(q, 0.0);
  std::vector<double> direct(q, 0.0);

  loss_cotangent(n_steps, y, y_cot);

  for (int n = n_steps - 1; n >= 0; --n) {
    const double t_n = path.grid().time_at(n);
    const auto dX = path.increment(n);

    reverse_step(t, f, t_n + dX[0], y, dX, ws);
    std::copy(ws.y_scratch.begin(), ws.y_scratch.end(), y.begin());
    check_state_finite(y, n);

    recompute_stages(t, f, t_n, y, dX, ws);
    rk_pullback(t, f, t_n, dX, y_cot, result.param_grad, ws);
    for (int i = 0; i < t.stages; ++i) {
      const double* kci = ws.stage_cot.data() + i * q;
      for (int l = 0; l < q; ++l) y_cot[l] += kci[l];
    }

    std::fill(direct.begin(), direct.end(), 0.0);
    loss_cotangent(n, y, direct);
    for (int l = 0; l < q; ++l) y_cot[l] += direct[l];

    if (options.probe_stride > 0 && options.probes && n % options.probe_stride == 0) {
      options.probes->push_back(max_norm(y));
    }
  }

  result.y0_grad = y_cot;
  result.y0_reconstructed = y;
  if (!options.y0_reference.empty()) {
    result.reconstruction_error = max_norm_diff(y, options.y0_reference);
    result.divergence_flag = result.reconstruction_error >
                             options.divergence_tolerance * (1.0 + max_norm(options.y0_reference));
  }
  result.workspace_bytes = ws.bytes() + (y.capacity() + y_cot.capacity() + direct.capacity()) *
                                            sizeof(double);
  return result;
}

namespace {

// Shared chain rule for one Reversible Heun step. Inputs: the states v_n
// (pre-step) and v_{n+1}, the incoming cotangents (gy for y_{n+1}, gv for
// v_{n+1}); outputs the cotangents of (y_n, v_n) in place.
void heun_pullback(const ParametricField& f, double t_n, double t_next,
                   std::span<const double> v_n, std::span<const double> v_next,
                   std::span<const double> dX, std::vector<double>& gy, std::vector<double>& gv,
                   std::span<double> param_grad, std::vector<double>& cot_f1,
                   std::vector<double>& cot_rows) {
  const int q = f.dim();
  const int ch = f.channels();

  // y' = y + (1/2)(F1 + F2) dX contributes (1/2) dX (x) gy to both
  // evaluation cotangents.
  std::fill(cot_f1.begin(), cot_f1.end(), 0.0);
  for (int m = 0; m < ch; ++m) {
    const double w = 0.5 * dX[m];
    double* row = cot_f1.data() + m * q;
    for (int l = 0; l < q; ++l) row[l] = w * gy[l];
  }

  // F2 = f(t_{n+1}, v'): pull (1/2) dX (x) gy back into gv.
  f.backprop_all(t_next, v_next, cot_f1, param_grad, gv);

  // v' = 2y - v + F1 dX: gv is now complete for v'.
  for (int m = 0; m < ch; ++m) {
    const double w = dX[m];
    double* row = cot_rows.data() + m * q;
    const double* half = cot_f1.data() + m * q;
    for (int l = 0; l < q; ++l) row[l] = half[l] + w * gv[l];
  }

  // g_y += 2 gv; g_v = -gv (+ F1 pullback below)
  std::vector<double>& gv_next = gv;
  for (int l = 0; l < q; ++l) {
    gy[l] += 2.0 * gv_next[l];
  }
  for (int l = 0; l < q; ++l) gv_next[l] = -gv_next[l];

  // F1 = f(t_n, v): pulls the combined evaluation cotangent into g_v.
  f.backprop_all(t_n, v_n, cot_rows, param_grad, gv_next);
}

}  // namespace

BackpropResult reversible_backprop_heun(const ParametricField& f,
                                        std::span<const double> terminal_state,
                                        const DriverPath& path,
                                        const StepCotangent& loss_cotangent,
                                        const BackpropOptions& options) {
  const int q = f.dim();
  const int n_steps = path.steps();
  if (static_cast<int>(terminal_state.size()) != 2 * q) {
    throw std::invalid_argument("reversible_backprop_heun: expected the (y, v) state");
  }

  BackpropResult result;
  result.param_grad.assign(f.param_count(), 0.0);

  const ReversibleHeunStepper stepper;
  std::vector<double> state(terminal_state.begin(), terminal_state.end());
  std::vector<double> v_next(q);
  std::vector<double> gy(q, 0.0);
  std::vector<double> gv(q, 0.0);
  std::vector<double> direct(q, 0.0);
  std::vector<double> cot_f1(f.channels() * q);
  std::vector<double> cot_rows(f.channels() * q);

  loss_cotangent(n_steps, {state.data(), static_cast<std::size_t>(q)}, gy);

  for (int n = n_steps - 1; n >= 0; --n) {
    const double t_n = path.grid().time_at(n);
    const auto dX = path.increment(n);

    std::copy(state.begin() + q, state.end(), v_next.begin());
    stepper.step_back(f, t_n + dX[0], dX, state);
    check_state_finite(state, n);

    heun_pullback(f, t_n, t_n + dX[0], {state.data() + q, static_cast<std::size_t>(q)}, v_next,
                  dX, gy, gv, result.param_grad, cot_f1, cot_rows);

    std::fill(direct.begin(), direct.end(), 0.0);
    loss_cotangent(n, {state.data(), static_cast<std::size_t>(q)}, direct);
    for (int l = 0; l < q; ++l) gy[l] += direct[l];

    if (options.probe_stride > 0 && options.probes && n % options.probe_stride == 0) {
      options.probes->push_back(max_norm({state.data(), static_cast<std::size_t>(q)}));
    }
  }

  // v_0 was initialized to y_0, so the total initial-state gradient chains
  // through both components.
  result.y0_grad.assign(q, 0.0);
  for (int l = 0; l < q; ++l) {
    result.y0_grad[l] =
        gy[l] + gv[l];
  }
  result.y0_reconstructed.assign(state.begin(), state.begin() + q);
  if (!options.y0_reference.empty()) {
    result.reconstruction_error =
        max_norm_diff({state.data(), static_cast<std::size_t>(q)}, options.y0_reference);
    result.divergence_flag = result.reconstruction_error >
                             options.divergence_tolerance * (1.0 + max_norm(options.y0_reference));
  }
  result.workspace_bytes =
      (state.capacity() + v_next.capacity() + gy.capacity() + gv.capacity() + direct.capacity() +
       cot_f1.capacity() + cot_rows.capacity()) *
      sizeof(double);
  return result;
}

BackpropResult stored_backprop(const ButcherTableau& t, const ParametricField& f,
                               std::span<const double> y0, const DriverPath& path,
                               const StepCotangent& loss_cotangent) {
  const int q = f.dim();
  const int s = t.stages;
  const int ch = f.channels();
  const int n_steps = path.steps();

  const RkStepper stepper(t);
  const Trajectory trajectory = integrate(stepper, f, y0, path);

  BackpropResult result;
  result.param_grad.assign(f.param_count(), 0.0);

  std::vector<double> y_cot(q, 0.0);
  loss_cotangent(n_steps, trajectory.primary(n_steps), y_cot);

  // Explicit stage-cotangent arrays; stages are recomputed from the stored
  // forward state, so no reconstruction error enters here.
  std::vector<double> stage_states(s * q);
  std::vector<double> contractions(s * q);
  std::vector<double> evals(ch * q);
  std::vector<double> z_cot(ch * q);
  std::vector<double> k_cot(s * q);
  std::vector<double> seed(q);
  std::vector<double> direct(q, 0.0);

  for (int n = n_steps - 1; n >= 0; --n) {
    const double t_n = path.grid().time_at(n);
    const auto dX = path.increment(n);
    const auto y_n = trajectory.primary(n);

    // forward stage sweep from the stored state
    for (int i = 0; i < s; ++i) {
      double* ki = stage_states.data() + i * q;
      for (int l = 0; l < q; ++l) ki[l] = y_n[l];
      for (int j = 0; j < i; ++j) {
        const double aij = t.a_at(i, j);
        if (aij == 0.0) continue;
        const double* gj = contractions.data() + j * q;
        for (int l = 0; l < q; ++l) ki[l] += aij * gj[l];
      }
      f.eval_all(t_n + t.c[i] * dX[0], {ki, static_cast<std::size_t>(q)},
                 evals);
      double* gi = contractions.data() + i * q;
      for (int l = 0; l < q; ++l) gi[l] = 0.0;
      for (int m = 0; m < ch; ++m) {
        const double w = dX[m];
        const double* fm = evals.data() + m * q;
        for (int l = 0; l < q; ++l) gi[l] += w * fm[l];
      }
    }

    // reverse stage sweep
    std::fill(k_cot.begin(), k_cot.end(), 0.0);
    for (int i = s - 1; i >= 0; --i) {
      const double bi = t.b[i];
      for (int l = 0; l < q; ++l) seed[l] = bi * y_cot[l];
      for (int j = i + 1; j < s; ++j) {
        const double aji = t.a_at(j, i);
        if (aji == 0.0) continue;
        const double* kcj = k_cot.data() + j * q;
        for (int l = 0; l < q; ++l) seed[l] += aji * kcj[l];
      }
      for (int m = 0; m < ch; ++m) {
        const double w = dX[m];
        double* row = z_cot.data() + m * q;
        for (int l = 0; l < q; ++l) row[l] = w * seed[l];
      }
      const double* ki = stage_states.data() + i * q;
      double* kci = k_cot.data() + i * q;
      f.backprop_all(t_n + t.c[i] * dX[0],
                     {ki, static_cast<std::size_t>(q)}, z_cot, result.param_grad,
                     {kci, static_cast<std::size_t>(q)});
    }

    for (int i = 0; i < s; ++i) {
      const double* kci = k_cot.data() + i * q;
      for (int l = 0; l < q; ++l) y_cot[l] += kci[l];
    }
    std::fill(direct.begin(), direct.end(), 0.0);
    loss_cotangent(n, y_n, direct);
    for (int l = 0; l < q; ++l) y_cot[l] += direct[l];
  }

  result.y0_grad = y_cot;
  result.y0_reconstructed.assign(trajectory.primary(0).begin(), trajectory.primary(0).end());
  result.workspace_bytes =
      (trajectory.data.capacity() + stage_states.capacity() + contractions.capacity() +
       evals.capacity() + z_cot.capacity() + k_cot.capacity() + seed.capacity() +
       y_cot.capacity()) *
      sizeof(double);
  return result;
}

BackpropResult stored_backprop_heun(const ParametricField& f, std::span<const double> y0,
                                    const DriverPath& path, const StepCotangent& loss_cotangent) {
  const int q = f.dim();
  const int n_steps = path.steps();

  const ReversibleHeunStepper stepper;
  const Trajectory trajectory = integrate(stepper, f, y0, path);

  BackpropResult result;
  result.param_grad.assign(f.param_count(), 0.0);

  std::vector<double> gy(q, 0.0);
  std::vector<double> gv(q, 0.0);
  std::vector<double> direct(q, 0.0);
  std::vector<double> cot_f1(f.channels() * q);
  std::vector<double> cot_rows(f.channels() * q);

  loss_cotangent(n_steps, trajectory.primary(n_steps), gy);

  for (int n = n_steps - 1; n >= 0; --n) {
    const double t_n = path.grid().time_at(n);
    const auto dX = path.increment(n);
    const auto state_n = trajectory.state(n);
    const auto state_next = trajectory.state(n + 1);

    heun_pullback(f, t_n, t_n + dX[0], state_n.subspan(static_cast<std::size_t>(q)),
                  state_next.subspan(static_cast<std::size_t>(q)), dX, gy, gv, result.param_grad,
                  cot_f1, cot_rows);

    std::fill(direct.begin(), direct.end(), 0.0);
    loss_cotangent(n, trajectory.primary(n), direct);
    for (int l = 0; l < q; ++l) gy[l] += direct[l];
  }

  result.y0_grad.assign(q, 0.0);
  for (int l = 0; l < q; ++l) {
    result.y0_grad[l] =
        gy[l] + gv[l];
  }
  result.y0_reconstructed.assign(trajectory.primary(0).begin(), trajectory.primary(0).end());
  result.workspace_bytes =
      (trajectory.data.capacity() + gy.capacity() + gv.capacity() + direct.capacity() +
       cot_f1.capacity() + cot_rows.capacity()) *
      sizeof(double);
  return result;
}

}  // namespace ees
