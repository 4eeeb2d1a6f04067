// SPDX-License-Identifier: Apache-2.0
#include "flexpose/runtime/session.hpp"

#include <fmt/format.h>

#include "flexpose/error.hpp"
#include "flexpose/log.hpp"

namespace flexpose::runtime {

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::kIdle: return "idle";
    case Phase::kTposeCalibrating: return "tpose-calibrating";
    case Phase::kElbowCalibrating: return "elbow-calibrating";
    case Phase::kRunning: return "running";
  }
  return "idle";
}

PoseRecord to_record(std::uint64_t id, std::uint64_t timestamp_us, const pfp::PfpOutput& out) {
  PoseRecord r;
  r.id = id;
  r.timestamp_us = timestamp_us;
  for (std::size_t j = 0; j < kin::kNumJoints; ++j)
    for (int a = 0; a < 3; ++a) r.theta[3 * j + a] = out.pose.theta[j][a];
  for (std::size_t n = 0; n < kin::kNumPositions; ++n)
    for (int a = 0; a < 3; ++a) r.position[3 * n + a] = out.positions[n][a];
  return r;
}

Session::Session(const pfp::PfpModel& model, SessionOptions options)
    : model_(&model), options_(std::move(options)), stream_(model) {}

void Session::start() {
  phase_ = Phase::kTposeCalibrating;
  tpose_buffer_.clear();
  flex_buffer_.clear();
  calibration_ = {};
  stream_.reset();
  spdlog::info("session: T-pose calibration started, hold still for {} frames", options_.plan.tpose_frames());
}

Session::Result Session::fail(std::string reason) {
  phase_ = Phase::kIdle;
  last_failure_ = reason;
  tpose_buffer_.clear();
  flex_buffer_.clear();
  spdlog::error("session: calibration failed, back to idle: {}", reason);
  return {Event::kFailed, std::nullopt, std::move(reason)};
}

Session::Result Session::push(const WireFrame& frame) {
  if (last_id_ && frame.id <= *last_id_) {
    ++skipped_;
    spdlog::warn("session: frame {} arrived after {}, skipped", frame.id, *last_id_);
    return {Event::kSkipped, std::nullopt, "out-of-order frame"};
  }
  last_id_ = frame.id;

  if (phase_ == Phase::kIdle) {
    if (!options_.auto_start) return {};
    start();
  }
  switch (phase_) {
    case Phase::kTposeCalibrating: {
      tpose_buffer_.push_back(frame.imu);
      if (tpose_buffer_.size() < options_.plan.tpose_frames()) return {Event::kCalibrating, std::nullopt, {}};
      try {
        calibration_.imu = tpose_calibrate(tpose_buffer_, options_.plan.fps, options_.plan.tpose);
      } catch (const CalibrationError& e) {
        return fail(e.what());
      }
      tpose_buffer_.clear();
      if (options_.calibrate_flex) {
        phase_ = Phase::kElbowCalibrating;
        spdlog::info("session: T-pose done, bend both elbows fully for {} frames", options_.plan.flex_frames());
        return {Event::kCalibrating, std::nullopt, {}};
      }
      if (!options_.allow_imu_only) {
        return fail("flex calibration skipped and IMU-only operation not allowed");
      }
      phase_ = Phase::kRunning;
      spdlog::warn("session: running IMU-only, flex inputs zeroed");
      return {Event::kCalibrated, std::nullopt, {}};
    }
    case Phase::kElbowCalibrating: {
      flex_buffer_.push_back(frame.flex);
      if (flex_buffer_.size() < options_.plan.flex_frames()) return {Event::kCalibrating, std::nullopt, {}};
      try {
        calibration_.flex = pic::capture_elbow_calibration(flex_buffer_, options_.plan.fps, options_.plan.pic);
      } catch (const CalibrationError& e) {
        return fail(e.what());
      }
      flex_buffer_.clear();
      phase_ = Phase::kRunning;
      spdlog::info("session: calibrated, running");
      return {Event::kCalibrated, std::nullopt, {}};
    }
    case Phase::kRunning: return run(frame);
    case Phase::kIdle: break;
  }
  return {};
}

Session::Result Session::run(const WireFrame& frame) {
  try {
    const auto in = prepare_input(frame.imu, frame.flex, calibration_);
    return {Event::kPose, to_record(frame.id, frame.timestamp_us, stream_.push(in.imu, in.flex_deg)), {}};
  } catch (const NumericError& e) {
    ++skipped_;
    spdlog::warn("session: frame {} skipped: {}", frame.id, e.what());
    return {Event::kSkipped, std::nullopt, e.what()};
  }
}

}  // namespace flexpose::runtime
