// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flexpose/nn/graph.hpp"
#include "flexpose/nn/layers.hpp"

namespace flexpose::dldm {

struct DenoiserConfig {
  std::size_t latent = 32;
  std::size_t hidden = 256;
  std::size_t layers = 3;
  std::size_t time_dim = 32;
};

/// Sinusoidal embedding of integer steps, one row per entry of t.
nn::Tensor time_embedding(std::span<const int> t, std::size_t dim);

/// Noise predictor eps_hat(z_t, t): an MLP with SiLU activations over the
/// concatenation of z_t and the step embedding.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserConfig& config, nn::Rng& rng);

  nn::Var forward(nn::Graph& g, nn::Var z_t, std::span<const int> t);
  nn::Tensor infer(const nn::Tensor& z_t, std::span<const int> t) const;

  nn::ParameterList parameters();
  const DenoiserConfig& config() const { return config_; }

 private:
  DenoiserConfig config_;
  std::vector<nn::Dense> layers_;
};

}  // namespace flexpose::dldm
