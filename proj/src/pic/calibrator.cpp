// SPDX-License-Identifier: Apache-2.0
#include "flexpose/pic/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "flexpose/error.hpp"

namespace flexpose::pic {

void CalibrationRange::validate() const {
  if (!(raw_max > raw_min)) {
    throw CalibrationError(fmt::format("degenerate flex range [{}, {}]", raw_min, raw_max));
  }
  if (!(target_max > target_min)) throw CalibrationError("calibration targets must increase");
}

double percentile(std::span<const double> samples, double q) {
  if (samples.empty()) throw LengthError("percentile of an empty window");
  if (!(q >= 0.0 && q <= 100.0)) throw ValidationError("percentile must lie in [0, 100]");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

CalibrationRange capture_range(std::span<const double> raw, double fps, const PicConfig& config) {
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  // Small tolerance so a window of exactly round(fps * seconds) frames passes.
  if (static_cast<double>(raw.size()) + 1e-9 < config.min_window_seconds * fps) {
    throw CalibrationError(fmt::format("elbow calibration window has {} frames, need {:.0f}", raw.size(),
                                       std::ceil(config.min_window_seconds * fps)));
  }
  for (double x : raw) {
    if (!std::isfinite(x)) throw CalibrationError("non-finite flex reading in calibration window");
  }
  CalibrationRange r;
  r.raw_min = percentile(raw, config.trim_low);
  r.raw_max = percentile(raw, config.trim_high);
  r.target_min = config.target_min;
  r.target_max = config.target_max;
  if (r.raw_max - r.raw_min < config.min_span()) {
    throw CalibrationError(fmt::format("flex span {:.4g} below minimum {:.4g}; was the elbow bent?",
                                       r.raw_max - r.raw_min, config.min_span()));
  }
  r.validate();
  return r;
}

double pic_apply(double raw, const CalibrationRange& range) {
  range.validate();
  return (raw - range.raw_min) / (range.raw_max - range.raw_min) * (range.target_max - range.target_min) +
         range.target_min;
}

ElbowCalibration capture_elbow_calibration(std::span<const synth::FlexFrame> window, double fps,
                                           const PicConfig& config) {
  ElbowCalibration cal;
  std::vector<double> channel(window.size());
  for (std::size_t s = 0; s < synth::kNumFlex; ++s) {
    for (std::size_t k = 0; k < window.size(); ++k) channel[k] = window[k][s];
    try {
      cal.side[s] = capture_range(channel, fps, config);
    } catch (const CalibrationError& e) {
      throw CalibrationError(std::string(s == 0 ? "left" : "right") + " elbow: " + e.what());
    }
  }
  return cal;
}

std::array<double, synth::kNumFlex> pic_apply(const synth::FlexFrame& raw, const ElbowCalibration& cal) {
  return {pic_apply(raw.left, cal.side[0]), pic_apply(raw.right, cal.side[1])};
}

}  // namespace flexpose::pic
