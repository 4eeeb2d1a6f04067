// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flexpose/kin/skeleton.hpp"

namespace flexpose::synth {

struct PoseSequence {
  double fps = 60.0;
  std::vector<kin::PoseFrame> frames;
  /// Optional pelvis trajectory, either empty or one entry per frame.
  std::vector<kin::Vec3> root_translation;

  double dt() const { return 1.0 / fps; }
  std::size_t size() const { return frames.size(); }
};

enum class MotionStyle { kWalking, kBoxing, kFree };

MotionStyle parse_motion_style(const std::string& name);
const char* motion_style_name(MotionStyle style);

/// Sinusoidal multi-joint choreography. Each joint axis is a sum of a few
/// sinusoids around a style-dependent base pose; elbows move on their hinge
/// and stay within [0, 2.5] rad of flexion.
PoseSequence generate_motion(MotionStyle style, std::size_t frames, double fps, std::uint64_t seed);

/// Start-of-session gesture: a static T-pose, then both elbows bend from
/// straight to 90 degrees and back, resting briefly at each extreme.
PoseSequence generate_calibration_gesture(double fps, double tpose_seconds = 5.0,
                                          double flex_seconds = 1.0);

/// Pose CSV: one header row, then one row of 30 axis-angle values per frame
/// in joint order (x, y, z per joint).
void write_pose_csv(const std::filesystem::path& path, const PoseSequence& seq);
PoseSequence read_pose_csv(const std::filesystem::path& path, double fps = 60.0);

}  // namespace flexpose::synth
