// SPDX-License-Identifier: Apache-2.0
#include "flexpose/dldm/denoiser.hpp"

#include <cmath>
#include <string>

#include "flexpose/error.hpp"
#include "flexpose/nn/kernels.hpp"

namespace flexpose::dldm {

nn::Tensor time_embedding(std::span<const int> t, std::size_t dim) {
  const std::size_t half = dim / 2;
  nn::Tensor out = nn::Tensor::matrix(t.size(), dim);
  for (std::size_t r = 0; r < t.size(); ++r) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      out(r, i) = std::sin(t[r] * freq);
      out(r, half + i) = std::cos(t[r] * freq);
    }
  }
  return out;
}

Denoiser::Denoiser(const DenoiserConfig& config, nn::Rng& rng) : config_(config) {
  if (config.layers < 2 || config.latent == 0 || config.hidden == 0 || config.time_dim < 2) {
    throw ValidationError("denoiser needs >= 2 layers and positive widths");
  }
  std::size_t in = config.latent + config.time_dim;
  for (std::size_t l = 0; l + 1 < config.layers; ++l) {
    layers_.emplace_back("denoiser.fc" + std::to_string(l), in, config.hidden, rng);
    in = config.hidden;
  }
  layers_.emplace_back("denoiser.out", in, config.latent, rng);
}

nn::Var Denoiser::forward(nn::Graph& g, nn::Var z_t, std::span<const int> t) {
  if (g.value(z_t).rows() != t.size()) throw DimensionError("denoiser: batch and step counts differ");
  nn::Var h = g.concat_cols({z_t, g.constant(time_embedding(t, config_.time_dim))});
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const nn::Var a = layers_[l].forward(g, h);
    h = g.mul(a, g.sigmoid(a));
  }
  return layers_.back().forward(g, h);
}

nn::Tensor Denoiser::infer(const nn::Tensor& z_t, std::span<const int> t) const {
  if (z_t.rows() != t.size() || z_t.cols() != config_.latent) throw DimensionError("denoiser input shape");
  const nn::Tensor emb = time_embedding(t, config_.time_dim);
  nn::Tensor h = nn::Tensor::matrix(z_t.rows(), config_.latent + config_.time_dim);
  for (std::size_t r = 0; r < z_t.rows(); ++r) {
    for (std::size_t c = 0; c < config_.latent; ++c) h(r, c) = z_t(r, c);
    for (std::size_t c = 0; c < config_.time_dim; ++c) h(r, config_.latent + c) = emb(r, c);
  }
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    h = layers_[l].infer(h);
    for (auto& v : h.data()) v = v * nn::kernels::sigmoid(v);
  }
  return layers_.back().infer(h);
}

nn::ParameterList Denoiser::parameters() {
  nn::ParameterList out;
  for (auto& l : layers_) {
    auto p = l.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace flexpose::dldm
