// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>

#include "flexpose/synth/sensors.hpp"

namespace flexpose::pic {

/// Raw flex extremes observed during the elbow gesture and the physical
/// angles (degrees) they map to.
struct CalibrationRange {
  double raw_min = 0.0;
  double raw_max = 1.0;
  double target_min = 0.0;
  double target_max = 90.0;

  /// Throws CalibrationError unless raw_max > raw_min and target_max > target_min.
  void validate() const;
};

struct PicConfig {
  double trim_low = 5.0;    // percentile
  double trim_high = 95.0;  // percentile
  /// Full-scale span of the sensor in raw units; spans below
  /// min_span_fraction of it are treated as a failed gesture.
  double full_scale_span = 1.0;
  double min_span_fraction = 0.05;
  double min_window_seconds = 1.0;
  double target_min = 0.0;
  double target_max = 90.0;

  double min_span() const { return min_span_fraction * full_scale_span; }
};

/// Linear-interpolated percentile (q in [0, 100]) of unsorted samples.
double percentile(std::span<const double> samples, double q);

/// Trimmed extremes of one flex channel recorded while the wearer bends the
/// elbow fully. Throws CalibrationError when the window is shorter than the
/// configured duration or the captured span is degenerate.
CalibrationRange capture_range(std::span<const double> raw, double fps, const PicConfig& config = {});

/// Maps a raw reading to degrees; affine, no clamping.
double pic_apply(double raw, const CalibrationRange& range);

struct ElbowCalibration {
  std::array<CalibrationRange, synth::kNumFlex> side;
};

ElbowCalibration capture_elbow_calibration(std::span<const synth::FlexFrame> window, double fps,
                                           const PicConfig& config = {});
/// Calibrated left/right flexion in degrees.
std::array<double, synth::kNumFlex> pic_apply(const synth::FlexFrame& raw, const ElbowCalibration& cal);

}  // namespace flexpose::pic
