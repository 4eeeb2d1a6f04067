// SPDX-License-Identifier: Apache-2.0
#include "flexpose/runtime/calibration.hpp"

#include <cmath>
#include <vector>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "flexpose/error.hpp"

namespace flexpose::runtime {

ImuReferences ImuReferences::identity() {
  ImuReferences r;
  r.ref.fill(kin::Mat3::Identity());
  return r;
}

kin::Mat3 mean_rotation(std::span<const kin::Mat3> rotations) {
  if (rotations.empty()) throw LengthError("mean of no rotations");
  kin::Mat3 sum = kin::Mat3::Zero();
  for (const auto& r : rotations) sum += r;
  Eigen::JacobiSVD<kin::Mat3> svd(sum, Eigen::ComputeFullU | Eigen::ComputeFullV);
  kin::Mat3 d = kin::Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

ImuReferences tpose_calibrate(std::span<const synth::ImuFrame> frames, double fps, const TposeConfig& config) {
  const auto needed = static_cast<std::size_t>(std::lround(config.seconds * fps));
  if (frames.size() < needed || frames.empty()) {
    throw CalibrationError(fmt::format("T-pose window has {} frames, need {}", frames.size(), needed));
  }
  ImuReferences refs;
  std::vector<kin::Mat3> rs(frames.size());
  for (std::size_t i = 0; i < synth::kNumImus; ++i) {
    for (std::size_t k = 0; k < frames.size(); ++k) rs[k] = frames[k].rotation(i);
    const kin::Mat3 mean = mean_rotation(rs);
    double worst = 0.0;
    for (const auto& r : rs) worst = std::max(worst, kin::geodesic_angle_deg(mean, r));
    if (worst > config.max_deviation_deg) {
      throw CalibrationError(fmt::format("unstable T-pose: {} sensor deviates {:.2f} deg from its mean (limit {})",
                                         synth::kImuSiteNames[i], worst, config.max_deviation_deg));
    }
    refs.ref[i] = mean.transpose();
  }
  return refs;
}

synth::ImuFrame normalize_frame(const synth::ImuFrame& frame, const ImuReferences& refs) {
  synth::ImuFrame out = frame;
  for (std::size_t i = 0; i < synth::kNumImus; ++i) out.set_orientation(i, kin::Mat3(refs.ref[i] * frame.rotation(i)));
  return out;
}

std::size_t CalibrationPlan::tpose_frames() const { return static_cast<std::size_t>(std::lround(tpose.seconds * fps)); }
std::size_t CalibrationPlan::flex_frames() const { return static_cast<std::size_t>(std::lround(flex_seconds * fps)); }

SessionCalibration calibrate_session(std::span<const synth::ImuFrame> imu, std::span<const synth::FlexFrame> flex,
                                     const CalibrationPlan& plan) {
  if (imu.size() < plan.total_frames() || flex.size() < plan.total_frames()) {
    throw CalibrationError(fmt::format("recording too short for calibration ({} frames, need {})",
                                       std::min(imu.size(), flex.size()), plan.total_frames()));
  }
  SessionCalibration cal;
  cal.imu = tpose_calibrate(imu.first(plan.tpose_frames()), plan.fps, plan.tpose);
  cal.flex = pic::capture_elbow_calibration(flex.subspan(plan.tpose_frames(), plan.flex_frames()), plan.fps, plan.pic);
  return cal;
}

ModelInput prepare_input(const synth::ImuFrame& imu, const synth::FlexFrame& raw_flex, const SessionCalibration& cal) {
  ModelInput in{normalize_frame(imu, cal.imu), {}};
  if (cal.flex) {
    const auto deg = pic::pic_apply(raw_flex, *cal.flex);
    in.flex_deg = {static_cast<float>(deg[0]), static_cast<float>(deg[1])};
  }
  return in;
}

}  // namespace flexpose::runtime
