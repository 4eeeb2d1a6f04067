// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "flexpose/nn/graph.hpp"

namespace flexpose::nn {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  /// false: L2 term added to the gradient (classic Adam);
  /// true: decay applied to the weights directly (AdamW).
  bool decoupled_weight_decay = false;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every parameter from its .grad.
void adam_step(const ParameterList& params, AdamState& state, const AdamConfig& config);

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping. max_norm <= 0 disables clipping.
double clip_grad_norm(const ParameterList& params, double max_norm);

void zero_grad(const ParameterList& params);

class Adam {
 public:
  Adam(ParameterList params, AdamConfig config);

  void step() { adam_step(params_, state_, config_); }
  void zero_grad() { nn::zero_grad(params_); }

  const AdamState& state() const { return state_; }
  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  const ParameterList& params() const { return params_; }

 private:
  ParameterList params_;
  AdamConfig config_;
  AdamState state_;
};

}  // namespace flexpose::nn
