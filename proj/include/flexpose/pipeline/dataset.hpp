// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexpose/kin/skeleton.hpp"
#include "flexpose/synth/motion.hpp"
#include "flexpose/synth/sensors.hpp"
#include "flexpose/synth/surrogate.hpp"

namespace flexpose::pipeline {

/// Everything needed to synthesize recordings.
struct SynthConfig {
  double fps = 60.0;
  double tpose_seconds = 5.0;
  double flex_seconds = 1.0;
  std::size_t motion_frames = 1800;
  /// Frames over which the motion fades in from the calibration pose.
  std::size_t blend_frames = 30;
  std::vector<synth::MotionStyle> styles = {synth::MotionStyle::kWalking, synth::MotionStyle::kBoxing,
                                            synth::MotionStyle::kFree};
  double stature = 1.75;
  synth::ClothSurrogateParams surrogate;
  /// Raw bend-sensor response in raw units per radian of flexion.
  synth::FlexSensorModel flex_sensor{0.3, 0.1};
  /// Per-recording garment distortion of the flex readings, drawn uniformly.
  double wear_gain_min = 0.6;
  double wear_gain_max = 1.4;
  double wear_offset_max = 0.2;

  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
  std::size_t calibration_frames() const;
};

/// One synthetic session: a calibration gesture (T-pose, elbow bend)
/// followed by motion, with tight and loose IMU streams and raw flex.
struct Recording {
  std::string name;
  synth::MotionStyle style = synth::MotionStyle::kFree;
  std::uint64_t seed = 0;
  double fps = 60.0;
  std::size_t calibration_frames = 0;
  std::vector<kin::PoseFrame> poses;
  std::vector<synth::ImuFrame> tight;
  std::vector<synth::ImuFrame> loose;
  std::vector<synth::FlexFrame> flex_raw;

  std::size_t size() const { return poses.size(); }
  std::size_t motion_frames() const { return size() - calibration_frames; }
  void validate() const;
};

Recording synth_recording(const SynthConfig& config, const kin::Skeleton& skeleton, synth::MotionStyle style,
                          std::uint64_t seed, const std::string& name);

/// count recordings with seeds seed_base, seed_base + 1, ...; styles cycle.
std::vector<Recording> synth_recordings(const SynthConfig& config, const kin::Skeleton& skeleton, std::size_t count,
                                        std::uint64_t seed_base, const std::string& prefix);

/// Dataset directory: manifest.json plus <name>.poses.csv, <name>.tight.csv,
/// <name>.loose.csv and <name>.flex.csv per recording.
void save_dataset(const std::filesystem::path& dir, std::span<const Recording> recordings,
                  const SynthConfig& config, const kin::Skeleton& skeleton);

struct Dataset {
  SynthConfig config;
  kin::Skeleton skeleton;
  std::vector<Recording> recordings;
};
Dataset load_dataset(const std::filesystem::path& dir);

void write_imu_csv(const std::filesystem::path& path, std::span<const synth::ImuFrame> frames);
std::vector<synth::ImuFrame> read_imu_csv(const std::filesystem::path& path);
void write_flex_csv(const std::filesystem::path& path, std::span<const synth::FlexFrame> frames);
std::vector<synth::FlexFrame> read_flex_csv(const std::filesystem::path& path);

}  // namespace flexpose::pipeline
