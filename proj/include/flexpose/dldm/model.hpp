// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexpose/dldm/denoiser.hpp"
#include "flexpose/dldm/schedule.hpp"
#include "flexpose/dldm/vae.hpp"
#include "flexpose/nn/standardizer.hpp"
#include "flexpose/synth/sensors.hpp"

namespace flexpose::dldm {

/// W consecutive displacement frames (W x 36).
struct DisplacementWindow {
  nn::Tensor values;
  double fps = 60.0;
};

/// Cuts frames into windows of the given length; a stride equal to the
/// window gives non-overlapping windows. A trailing partial window is dropped.
std::vector<DisplacementWindow> make_windows(std::span<const synth::DisplacementFrame> frames, std::size_t window,
                                             std::size_t stride, double fps = 60.0);
/// Concatenates windows and keeps the first `frames` frames.
std::vector<synth::DisplacementFrame> concat_windows(std::span<const DisplacementWindow> windows, std::size_t frames);

/// Gathers windows[indices] into time-major batches, standardizing each frame
/// when norm is given.
TimeMajor to_time_major(std::span<const DisplacementWindow> windows, std::span<const std::size_t> indices,
                        const nn::Standardizer* norm = nullptr);
std::vector<DisplacementWindow> from_time_major(const TimeMajor& steps, double fps,
                                                const nn::Standardizer* denorm = nullptr);

struct TrainOptions {
  std::size_t iterations = 1000;
  std::size_t batch = 64;
  double learning_rate = 1e-3;
  double clip_norm = 1.0;
};

struct TrainReport {
  std::vector<double> losses;
  /// Mean loss over the first and last tenth of training.
  double initial_loss() const;
  double final_loss() const;
};

struct DldmConfig {
  VaeConfig vae;
  DenoiserConfig denoiser;
  int diffusion_steps = 100;
  double beta_start = 1e-3;
  double beta_end = 0.2;
  double kl_weight = 1e-8;
  TrainOptions vae_train{2000, 64, 1e-3, 1.0};
  TrainOptions ldm_train{4000, 512, 1e-3, 1.0};

  nlohmann::json to_json() const;
  static DldmConfig from_json(const nlohmann::json& j);
};

struct DldmModel {
  DldmModel() = default;
  DldmModel(const DldmConfig& config, std::uint64_t seed);

  DldmConfig config;
  NoiseSchedule schedule;
  nn::Standardizer window_norm;
  nn::Standardizer latent_norm;
  Vae vae;
  Denoiser denoiser;
};

/// Stage 1: fits the per-channel window standardizer and trains the VAE on
/// the negative ELBO. Throws TrainingError if the loss diverges.
TrainReport train_vae(DldmModel& model, std::span<const DisplacementWindow> windows, std::uint64_t seed);

/// Posterior means of the (raw, unstandardized) windows, one row each.
nn::Tensor encode_means(const DldmModel& model, std::span<const DisplacementWindow> windows);

/// Epsilon-prediction training on latents that are already standardized.
TrainReport train_denoiser(Denoiser& denoiser, const nn::Tensor& latents, const NoiseSchedule& schedule,
                           const TrainOptions& options, std::uint64_t seed);

/// Stage 2: with the VAE frozen, encodes the windows, fits the latent
/// standardizer and trains the denoiser.
TrainReport train_ldm(DldmModel& model, std::span<const DisplacementWindow> windows, std::uint64_t seed);

/// Ancestral sampling from N(0, I) through the reverse chain; returns
/// standardized latents (n x latent).
nn::Tensor sample_latents(const Denoiser& denoiser, const NoiseSchedule& schedule, std::size_t n,
                          std::uint64_t seed);

enum class SampleMode { kDiffusion, kVaeOnly };

/// Generates n windows. kVaeOnly decodes standardized-latent N(0, I) draws
/// without the diffusion stage. Deterministic given seed.
std::vector<DisplacementWindow> sample(const DldmModel& model, std::size_t n, std::uint64_t seed,
                                       SampleMode mode = SampleMode::kDiffusion);

/// Per-channel Gaussian noise with the data's mean and std; the reference
/// point for generation quality.
std::vector<DisplacementWindow> gaussian_baseline(const nn::Standardizer& window_norm, std::size_t n,
                                                  std::size_t window, std::uint64_t seed, double fps = 60.0);

/// CSV with header mu_0..mu_{d-1} and one row of posterior means per window.
void export_latents(const DldmModel& model, std::span<const DisplacementWindow> windows,
                    const std::filesystem::path& path);

void save_dldm(const DldmModel& model, const std::filesystem::path& path);
DldmModel load_dldm(const std::filesystem::path& path);

/// Writes windows as a displacement CSV (one frame per row, 36 channels, a
/// window column) so they can sit next to dataset sequences.
void write_windows_csv(std::span<const DisplacementWindow> windows, const std::filesystem::path& path);
std::vector<DisplacementWindow> read_windows_csv(const std::filesystem::path& path, double fps = 60.0);

}  // namespace flexpose::dldm
