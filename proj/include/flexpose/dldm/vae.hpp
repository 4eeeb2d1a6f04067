// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "flexpose/nn/graph.hpp"
#include "flexpose/nn/layers.hpp"

namespace flexpose::dldm {

/// A batch of windows in time-major layout: steps[w] is batch x channels.
using TimeMajor = std::vector<nn::Tensor>;

struct VaeConfig {
  std::size_t window = 60;
  std::size_t channels = 36;
  std::size_t latent = 32;
  std::size_t hidden = 128;
  std::size_t layers = 1;
  /// Sinusoidal step code appended to the decoder input (even, may be 0).
  std::size_t time_features = 8;
};

/// Sequence VAE: an LSTM encoder whose final hidden state feeds dense mu and
/// log-variance heads, and an LSTM decoder that receives z at every step
/// followed by a dense readout per frame.
class Vae {
 public:
  Vae() = default;
  Vae(const VaeConfig& config, nn::Rng& rng);

  struct Posterior {
    nn::Var mu;
    nn::Var logvar;
  };
  Posterior encode(nn::Graph& g, const TimeMajor& x);
  std::vector<nn::Var> decode(nn::Graph& g, nn::Var z);

  /// Graph-free posterior parameters (mu, logvar), each batch x latent.
  std::pair<nn::Tensor, nn::Tensor> encode(const TimeMajor& x) const;
  TimeMajor decode(const nn::Tensor& z) const;

  nn::ParameterList parameters();
  const VaeConfig& config() const { return config_; }

 private:
  VaeConfig config_;
  nn::LstmStack encoder_;
  nn::Dense mu_head_;
  nn::Dense logvar_head_;
  nn::LstmStack decoder_;
  std::vector<nn::Tensor> step_codes_;  // window x (1 x time_features)
  nn::Dense readout_;
};

/// z = mu + exp(logvar / 2) * eps.
nn::Tensor reparameterize(const nn::Tensor& mu, const nn::Tensor& logvar, const nn::Tensor& eps);

/// Closed-form KL(N(mu, exp(logvar)) || N(0, I)) of one row, summed over dims.
double kl_divergence(std::span<const double> mu, std::span<const double> logvar);

struct ElboTerms {
  nn::Var loss;
  nn::Var reconstruction;
  nn::Var kl;
};

/// Negative ELBO averaged over the batch: summed L1 reconstruction (unit
/// Laplace likelihood up to a constant) plus kl_weight times the closed-form
/// KL. eps supplies the reparameterization noise (batch x latent).
ElboTerms elbo_loss(nn::Graph& g, Vae& vae, const TimeMajor& x, const nn::Tensor& eps, double kl_weight);

}  // namespace flexpose::dldm
