// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexpose/pfp/model.hpp"

namespace flexpose::pfp {

/// One recording: sensor frames, calibrated flex (degrees) and ground truth.
struct PfpSequence {
  std::string name;
  double fps = 60.0;
  std::vector<synth::ImuFrame> imu;
  std::vector<synth::FlexFrame> flex;
  std::vector<kin::PoseFrame> poses;

  std::size_t size() const { return imu.size(); }
  /// Throws LengthError unless all streams have the same length.
  void validate() const;
};

struct PfpTrainOptions {
  std::size_t iterations = 3000;
  /// Subsequences per update.
  std::size_t batch = 512;
  /// Truncated backprop length in frames.
  std::size_t subsequence = 120;
  double learning_rate = 5e-4;
  double weight_decay = 1e-5;
  double clip_norm = 1.0;
  /// Parameters are snapshotted this often for divergence recovery.
  std::size_t snapshot_every = 50;

  nlohmann::json to_json() const;
  static PfpTrainOptions from_json(const nlohmann::json& j);
};

struct PfpTrainReport {
  std::vector<double> total, position, rotation, elbow;
  /// Mean total loss over the first and last tenth of training.
  double initial_loss() const;
  double final_loss() const;
};

using PfpProgress = std::function<void(std::size_t iteration, const PfpTrainReport& report)>;

/// Fits the IMU, flex and position standardizers on the training set.
void fit_normalizers(PfpModel& model, std::span<const PfpSequence> sequences);

/// Fits normalizers, then trains with Adam (L2 weight decay) on random
/// fixed-length subsequences starting from zero state. Positions are
/// supervised with FK of the ground-truth poses. On divergence the last
/// finite snapshot is restored into `model` and TrainingError is thrown.
PfpTrainReport train_pfp(PfpModel& model, std::span<const PfpSequence> sequences, const PfpTrainOptions& options,
                         std::uint64_t seed, const PfpProgress& progress = {});

/// Streams a whole sequence through a fresh PfpStream.
std::vector<PfpOutput> run_sequence(const PfpModel& model, const PfpSequence& sequence);

/// Runs all sequences together as one batch; rows of finished sequences are
/// padded and their outputs dropped.
std::vector<std::vector<PfpOutput>> run_batch(const PfpModel& model, std::span<const PfpSequence> sequences);

}  // namespace flexpose::pfp
