// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

#include "flexpose/pic/calibrator.hpp"
#include "flexpose/synth/sensors.hpp"

namespace flexpose::runtime {

struct TposeConfig {
  double seconds = 5.0;
  /// Largest allowed geodesic deviation (degrees) of any sample from the
  /// window mean.
  double max_deviation_deg = 5.0;
};

/// Per-IMU reference rotations; normalized = reference * measured.
struct ImuReferences {
  std::array<kin::Mat3, synth::kNumImus> ref;
  static ImuReferences identity();
};

/// Chordal L2 mean of rotations (SVD projection of the summed matrices).
kin::Mat3 mean_rotation(std::span<const kin::Mat3> rotations);

/// Reference = inverse of the time-averaged measured orientation per IMU.
/// Throws CalibrationError if the window is shorter than the configured
/// duration or any sample deviates more than the threshold from the mean.
ImuReferences tpose_calibrate(std::span<const synth::ImuFrame> frames, double fps, const TposeConfig& config = {});

/// Applies the references to the orientation channels; accelerations are
/// passed through.
synth::ImuFrame normalize_frame(const synth::ImuFrame& frame, const ImuReferences& refs);

/// Start-of-session calibration layout: a T-pose window followed by the
/// elbow gesture window.
struct CalibrationPlan {
  double fps = 60.0;
  TposeConfig tpose;
  double flex_seconds = 1.0;
  pic::PicConfig pic;

  std::size_t tpose_frames() const;
  std::size_t flex_frames() const;
  std::size_t total_frames() const { return tpose_frames() + flex_frames(); }
};

struct SessionCalibration {
  ImuReferences imu = ImuReferences::identity();
  /// Absent when the elbow gesture was skipped (IMU-only operation).
  std::optional<pic::ElbowCalibration> flex;
};

/// Runs both calibrations on the first plan.total_frames() frames of a
/// recording.
SessionCalibration calibrate_session(std::span<const synth::ImuFrame> imu, std::span<const synth::FlexFrame> flex,
                                     const CalibrationPlan& plan);

/// Normalized IMU frame plus calibrated flex in degrees (zeros without a
/// flex calibration).
struct ModelInput {
  synth::ImuFrame imu;
  synth::FlexFrame flex_deg;
};

ModelInput prepare_input(const synth::ImuFrame& imu, const synth::FlexFrame& raw_flex, const SessionCalibration& cal);

}  // namespace flexpose::runtime
