// SPDX-License-Identifier: Apache-2.0
#include "flexpose/dldm/schedule.hpp"

#include <cmath>
#include <string>

#include "flexpose/error.hpp"

namespace flexpose::dldm {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ValidationError("diffusion needs at least one step");
  NoiseSchedule s;
  s.beta.resize(static_cast<std::size_t>(steps));
  s.alpha_bar.resize(s.beta.size());
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
    s.beta[t] = beta_start + frac * (beta_end - beta_start);
    prod *= 1.0 - s.beta[t];
    s.alpha_bar[t] = prod;
  }
  s.validate();
  return s;
}

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t == 0) return 1.0;
  return alpha_bar.at(static_cast<std::size_t>(t - 1));
}

double NoiseSchedule::posterior_variance(int t) const {
  return (1.0 - alpha_bar_at(t - 1)) / (1.0 - alpha_bar_at(t)) * beta_at(t);
}

void NoiseSchedule::validate() const {
  if (beta.empty() || beta.size() != alpha_bar.size()) throw ValidationError("empty noise schedule");
  for (std::size_t i = 0; i < beta.size(); ++i) {
    if (!(beta[i] > 0.0 && beta[i] < 1.0)) throw ValidationError("beta must lie in (0, 1)");
    if (i > 0 && !(beta[i] > beta[i - 1])) throw ValidationError("betas must increase strictly");
  }
}

nn::Tensor diffuse_forward(const nn::Tensor& z0, int t, const NoiseSchedule& schedule, const nn::Tensor& eps) {
  if (t < 0 || t > schedule.steps()) {
    throw ValidationError("diffusion step " + std::to_string(t) + " outside [0, " +
                          std::to_string(schedule.steps()) + "]");
  }
  nn::require_same_shape(z0, eps, "diffuse_forward");
  if (t == 0) return z0;
  const double a = std::sqrt(schedule.alpha_bar_at(t));
  const double b = std::sqrt(1.0 - schedule.alpha_bar_at(t));
  nn::Tensor out = z0;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

nn::Tensor reverse_mean(const nn::Tensor& z_t, int t, const NoiseSchedule& schedule, const nn::Tensor& eps_hat) {
  if (t < 1 || t > schedule.steps()) throw ValidationError("reverse step outside [1, T]");
  nn::require_same_shape(z_t, eps_hat, "reverse_mean");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha_at(t));
  const double coef = schedule.beta_at(t) / std::sqrt(1.0 - schedule.alpha_bar_at(t));
  nn::Tensor out = z_t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv_sqrt_alpha * (z_t[i] - coef * eps_hat[i]);
  return out;
}

}  // namespace flexpose::dldm
