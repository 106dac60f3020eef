#include "ees/fields.hpp"

#include <algorithm>
#include <stdexcept>

namespace ees {

MlpOdeField::MlpOdeField(Mlp net) : ParametricField(1, net.output_dim()), net_(std::move(net)) {
  if (net_.input_dim() != net_.output_dim()) {
    throw std::invalid_argument("MlpOdeField: net must map the state to itself");
  }
}

void MlpOdeField::eval_all(double, std::span<const double> y, std::span<double> out) const {
  net_.forward(y, out);
}

void MlpOdeField::backprop_all(double, std::span<const double> y,
                               std::span<const double> cotangents, std::span<double> param_grad,
                               std::span<double> y_cot) const {
  net_.backprop(y, cotangents, param_grad, y_cot);
}

LangevinField::LangevinField(Mlp drift, Mlp diffusion)
    : ParametricField(drift.output_dim() + 1, drift.output_dim()),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)) {
  if (drift_.input_dim() != drift_.output_dim()) {
    throw std::invalid_argument("LangevinField: drift net must map the latent to itself");
  }
  if (diffusion_.input_dim() != 1 || diffusion_.output_dim() != drift_.output_dim()) {
    throw std::invalid_argument("LangevinField: diffusion net must map time to the latent");
  }
}

void LangevinField::eval_all(double t, std::span<const double> y, std::span<double> out) const {
  const int q = dim();
  drift_.forward(y, out.subspan(0, static_cast<std::size_t>(q)));

  std::vector<double> diffusion_at_t(q);
  const double time_input[1] = {t};
  diffusion_.forward({time_input, 1}, diffusion_at_t);

  auto noise_rows = out.subspan(q);
  std::fill(noise_rows.begin(), noise_rows.end(), 0.0);
  for (int m = 0; m < q; ++m) {
    noise_rows[m * q + m] = diffusion_at_t[m];
  }
}

void LangevinField::backprop_all(double t, std::span<const double> y,
                                 std::span<const double> cotangents, std::span<double> param_grad,
                                 std::span<double> y_cot) const {
  const int q = dim();
  drift_.backprop(y, cotangents.subspan(0, static_cast<std::size_t>(q)),
                  param_grad.subspan(0, static_cast<std::size_t>(drift_.param_count())), y_cot);

  // only the diagonal of each noise row is populated
  std::vector<double> stacked(q);
  for (int m = 0; m < q; ++m) {
    stacked[m] =
        cotangents[static_cast<std::size_t>(q) + m * q + m];
  }
  const double time_input[1] = {t};
  double time_cot[1] = {0.0};  // time is not differentiated
  diffusion_.backprop({time_input, 1}, stacked,
                      param_grad.subspan(static_cast<std::size_t>(drift_.param_count())),
                      {time_cot, 1});
}

ScalarSdeField::ScalarSdeField(Mlp drift, Mlp diffusion)
    : ParametricField(2, 1), drift_(std::move(drift)), diffusion_(std::move(diffusion)) {
  for (const Mlp* net : {&drift_, &diffusion_}) {
    if (net->input_dim() != 2 || net->output_dim() != 1) {
      throw std::invalid_argument("ScalarSdeField: nets must map (t, S) to a scalar");
    }
  }
}

void ScalarSdeField::eval_all(double t, std::span<const double> y, std::span<double> out) const {
  const double input[2] = {t, y[0]};
  drift_.forward({input, 2}, out.subspan(0, 1));
  diffusion_.forward({input, 2}, out.subspan(1, 1));
}

void ScalarSdeField::backprop_all(double t, std::span<const double> y,
                                  std::span<const double> cotangents,
                                  std::span<double> param_grad, std::span<double> y_cot) const {
  const double input[2] = {t, y[0]};
  double input_cot[2] = {0.0, 0.0};

  drift_.backprop({input, 2}, cotangents.subspan(0, 1),
                  param_grad.subspan(0, static_cast<std::size_t>(drift_.param_count())),
                  {input_cot, 2});
  diffusion_.backprop({input, 2}, cotangents.subspan(1, 1),
                      param_grad.subspan(static_cast<std::size_t>(drift_.param_count())),
                      {input_cot, 2});
  y_cot[0] += input_cot[1];  // the time component is not differentiated
}

}  // namespace ees
