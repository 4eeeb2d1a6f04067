// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexpose/kin/skeleton.hpp"
#include "flexpose/nn/tensor.hpp"

namespace flexpose::eval {

struct SequenceMetrics {
  std::string name;
  std::size_t frames = 0;
  double angular = 0.0;     // degrees
  double elbow = 0.0;       // degrees
  double positional = 0.0;  // cm
  double jitter = 0.0;      // m/s^3, of the prediction
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Aggregate means pool all frames; std is taken across per-sequence values.
struct PoseMetricsReport {
  std::vector<SequenceMetrics> sequences;
  MeanStd angular, elbow, positional, jitter;
  std::size_t frames = 0;
};

/// Runs forward kinematics on both sequences (pelvis at the origin) and
/// computes all four pose metrics.
SequenceMetrics evaluate_sequence(const std::string& name, const kin::Skeleton& skeleton,
                                  std::span<const kin::PoseFrame> pred, std::span<const kin::PoseFrame> gt,
                                  double fps);

PoseMetricsReport aggregate(std::vector<SequenceMetrics> sequences);

nlohmann::json to_json(const PoseMetricsReport& report);
/// One row per sequence plus a final "aggregate" row.
void write_csv(const std::filesystem::path& path, const PoseMetricsReport& report);

struct GenMetricsConfig {
  std::size_t projection_dim = 64;
  std::uint64_t projection_seed = 0x5eed;
  std::size_t ssim_window = 7;
};

struct GenMetricsReport {
  double frechet = 0.0;  // projected Frechet distance
  double psnr = 0.0;     // dB, mean over paired windows
  double ssim = 0.0;     // mean over paired windows
  std::size_t windows = 0;
};

/// Frechet over the full sets; PSNR and SSIM over pairs (generated[i],
/// real[i]) for i < min(sizes). The peak and dynamic range are the value
/// range of the real windows.
GenMetricsReport generation_metrics(std::span<const nn::Tensor> generated, std::span<const nn::Tensor> real,
                                    const GenMetricsConfig& config = {});

nlohmann::json to_json(const GenMetricsReport& report);
void write_csv(const std::filesystem::path& path, const GenMetricsReport& report);

}  // namespace flexpose::eval
