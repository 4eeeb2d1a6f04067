// SPDX-License-Identifier: Apache-2.0
#include "flexpose/dldm/vae.hpp"

#include <cmath>
#include <numbers>

#include "flexpose/error.hpp"

namespace flexpose::dldm {

Vae::Vae(const VaeConfig& config, nn::Rng& rng)
    : config_(config),
      encoder_("vae.encoder", config.channels, config.hidden, config.layers, rng),
      mu_head_("vae.mu", config.hidden, config.latent, rng),
      logvar_head_("vae.logvar", config.hidden, config.latent, rng),
      decoder_("vae.decoder", config.latent + config.time_features, config.hidden, config.layers, rng),
      readout_("vae.readout", config.hidden, config.channels, rng) {
  if (config.window == 0 || config.channels == 0 || config.latent == 0 || config.hidden == 0) {
    throw ValidationError("VAE dimensions must be positive");
  }
  if (config.time_features % 2 != 0) throw ValidationError("VAE time_features must be even");
  const std::size_t pairs = config.time_features / 2;
  for (std::size_t w = 0; w < config.window; ++w) {
    nn::Tensor code = nn::Tensor::matrix(1, config.time_features);
    const double phase = static_cast<double>(w) / static_cast<double>(config.window);
    for (std::size_t k = 0; k < pairs; ++k) {
      code(0, 2 * k) = std::sin(std::numbers::pi * static_cast<double>(k + 1) * phase);
      code(0, 2 * k + 1) = std::cos(std::numbers::pi * static_cast<double>(k + 1) * phase);
    }
    step_codes_.push_back(std::move(code));
  }
}

namespace {

nn::Tensor repeat_rows(const nn::Tensor& row, std::size_t rows) {
  nn::Tensor out = nn::Tensor::matrix(rows, row.cols());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < row.cols(); ++c) out(r, c) = row(0, c);
  return out;
}

void check_input(const TimeMajor& x, const VaeConfig& c) {
  if (x.size() != c.window) {
    throw DimensionError("VAE expects " + std::to_string(c.window) + " steps, got " + std::to_string(x.size()));
  }
  for (const auto& step : x) {
    if (step.cols() != c.channels || step.rows() != x.front().rows()) {
      throw DimensionError("VAE step shape " + step.shape_string());
    }
  }
}

}  // namespace

Vae::Posterior Vae::encode(nn::Graph& g, const TimeMajor& x) {
  check_input(x, config_);
  auto state = encoder_.graph_state(g, encoder_.zero_state(x.front().rows()));
  nn::Var h;
  for (const auto& step : x) h = encoder_.step(g, g.constant(step), state);
  return {mu_head_.forward(g, h), logvar_head_.forward(g, h)};
}

std::vector<nn::Var> Vae::decode(nn::Graph& g, nn::Var z) {
  auto state = decoder_.graph_state(g, decoder_.zero_state(g.value(z).rows()));
  std::vector<nn::Var> out;
  out.reserve(config_.window);
  const std::size_t batch = g.value(z).rows();
  for (std::size_t w = 0; w < config_.window; ++w) {
    const nn::Var in = config_.time_features == 0
                           ? z
                           : g.concat_cols({z, g.constant(repeat_rows(step_codes_[w], batch))});
    out.push_back(readout_.forward(g, decoder_.step(g, in, state)));
  }
  return out;
}

std::pair<nn::Tensor, nn::Tensor> Vae::encode(const TimeMajor& x) const {
  check_input(x, config_);
  auto state = encoder_.zero_state(x.front().rows());
  nn::Tensor h;
  for (const auto& step : x) h = encoder_.infer_step(step, state);
  auto mu = mu_head_.infer(h);
  auto logvar = logvar_head_.infer(h);
  if (!mu.all_finite() || !logvar.all_finite()) throw NumericError("non-finite VAE posterior");
  return {std::move(mu), std::move(logvar)};
}

TimeMajor Vae::decode(const nn::Tensor& z) const {
  if (z.cols() != config_.latent) throw DimensionError("latent width " + z.shape_string());
  auto state = decoder_.zero_state(z.rows());
  TimeMajor out;
  out.reserve(config_.window);
  for (std::size_t w = 0; w < config_.window; ++w) {
    if (config_.time_features == 0) {
      out.push_back(readout_.infer(decoder_.infer_step(z, state)));
      continue;
    }
    const nn::Tensor code = repeat_rows(step_codes_[w], z.rows());
    nn::Tensor in = nn::Tensor::matrix(z.rows(), z.cols() + code.cols());
    for (std::size_t r = 0; r < z.rows(); ++r) {
      for (std::size_t c = 0; c < z.cols(); ++c) in(r, c) = z(r, c);
      for (std::size_t c = 0; c < code.cols(); ++c) in(r, z.cols() + c) = code(r, c);
    }
    out.push_back(readout_.infer(decoder_.infer_step(in, state)));
  }
  return out;
}

nn::ParameterList Vae::parameters() {
  nn::ParameterList out;
  auto append = [&out](const nn::ParameterList& p) { out.insert(out.end(), p.begin(), p.end()); };
  append(encoder_.parameters());
  append(mu_head_.parameters());
  append(logvar_head_.parameters());
  append(decoder_.parameters());
  append(readout_.parameters());
  return out;
}

nn::Tensor reparameterize(const nn::Tensor& mu, const nn::Tensor& logvar, const nn::Tensor& eps) {
  nn::require_same_shape(mu, logvar, "reparameterize");
  nn::require_same_shape(mu, eps, "reparameterize");
  nn::Tensor z = mu;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
  return z;
}

double kl_divergence(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw DimensionError("KL: mu/logvar sizes differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) kl += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
  return 0.5 * kl;
}

ElboTerms elbo_loss(nn::Graph& g, Vae& vae, const TimeMajor& x, const nn::Tensor& eps, double kl_weight) {
  if (!(kl_weight >= 0.0)) throw ValidationError("KL weight must be non-negative");
  const auto post = vae.encode(g, x);
  const double inv_batch = 1.0 / static_cast<double>(x.front().rows());
  const nn::Var sigma = g.exp(g.scale(post.logvar, 0.5));
  const nn::Var z = g.add(post.mu, g.mul(sigma, g.constant(eps)));
  const auto recon_steps = vae.decode(g, z);

  std::vector<nn::Var> per_step;
  per_step.reserve(x.size());
  for (std::size_t w = 0; w < x.size(); ++w) per_step.push_back(g.sum(g.abs(g.sub(recon_steps[w], g.constant(x[w])))));
  nn::Var recon = per_step.front();
  for (std::size_t w = 1; w < per_step.size(); ++w) recon = g.add(recon, per_step[w]);
  recon = g.scale(recon, inv_batch);

  const nn::Var kl_terms =
      g.sub(g.add(g.square(post.mu), g.exp(post.logvar)), g.add_scalar(post.logvar, 1.0));
  const nn::Var kl = g.scale(g.sum(kl_terms), 0.5 * inv_batch);
  return {g.add(recon, g.scale(kl, kl_weight)), recon, kl};
}

}  // namespace flexpose::dldm
