// SPDX-License-Identifier: Apache-2.0
#include "flexpose/nn/adam.hpp"

#include <cmath>

#include "flexpose/error.hpp"

namespace flexpose::nn {

void adam_step(const ParameterList& params, AdamState& state, const AdamConfig& config) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    require_same_shape(p.value, p.grad, "adam_step(grad)");
    require_same_shape(p.value, m, "adam_step(moment)");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad[i];
      if (config.weight_decay != 0.0 && !config.decoupled_weight_decay)
        g += config.weight_decay * p.value[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      if (config.weight_decay != 0.0 && config.decoupled_weight_decay)
        p.value[i] -= config.learning_rate * config.weight_decay * p.value[i];
      p.value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.data()) g *= s;
  }
  return norm;
}

void zero_grad(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

Adam::Adam(ParameterList params, AdamConfig config)
    : params_(std::move(params)), config_(config) {}

}  // namespace flexpose::nn
