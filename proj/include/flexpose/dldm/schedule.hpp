// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "flexpose/nn/tensor.hpp"

namespace flexpose::dldm {

/// Variance schedule of the forward noising process, indexed t = 1..T.
struct NoiseSchedule {
  std::vector<double> beta;       // beta[t - 1]
  std::vector<double> alpha_bar;  // alpha_bar[t - 1]

  /// Linearly spaced betas from beta_start to beta_end.
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);

  int steps() const { return static_cast<int>(beta.size()); }
  double beta_at(int t) const { return beta.at(static_cast<std::size_t>(t - 1)); }
  double alpha_at(int t) const { return 1.0 - beta_at(t); }
  /// Cumulative product; alpha_bar(0) = 1 by convention.
  double alpha_bar_at(int t) const;
  /// beta~_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t.
  double posterior_variance(int t) const;

  /// Throws ValidationError unless 0 < beta_1 < ... < beta_T < 1.
  void validate() const;
};

/// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps. t = 0 returns z0.
/// Throws ValidationError for t outside [0, T].
nn::Tensor diffuse_forward(const nn::Tensor& z0, int t, const NoiseSchedule& schedule, const nn::Tensor& eps);

/// Mean of p(z_{t-1} | z_t) under epsilon prediction.
nn::Tensor reverse_mean(const nn::Tensor& z_t, int t, const NoiseSchedule& schedule, const nn::Tensor& eps_hat);

}  // namespace flexpose::dldm
