// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flexpose/pfp/model.hpp"
#include "flexpose/runtime/calibration.hpp"
#include "flexpose/runtime/wire.hpp"

namespace flexpose::runtime {

enum class Phase { kIdle, kTposeCalibrating, kElbowCalibrating, kRunning };
const char* phase_name(Phase phase);

struct SessionOptions {
  CalibrationPlan plan;
  /// Run the elbow gesture phase. Without it the session only reaches
  /// Running when allow_imu_only is set.
  bool calibrate_flex = true;
  bool allow_imu_only = false;
  /// Leave Idle on the first frame instead of waiting for start().
  bool auto_start = true;
};

/// One emitted pose: 30 axis-angle values in joint order and 33 position
/// values (11 nodes, pelvis-relative).
struct PoseRecord {
  std::uint64_t id = 0;
  std::uint64_t timestamp_us = 0;
  std::array<double, 30> theta{};
  std::array<double, 33> position{};

  friend bool operator==(const PoseRecord&, const PoseRecord&) = default;
};

PoseRecord to_record(std::uint64_t id, std::uint64_t timestamp_us, const pfp::PfpOutput& out);

/// Calibration state machine plus per-frame inference. Single-threaded;
/// the stream runner owns one instance on its worker thread.
class Session {
 public:
  enum class Event { kIgnored, kCalibrating, kCalibrated, kPose, kSkipped, kFailed };
  struct Result {
    Event event = Event::kIgnored;
    std::optional<PoseRecord> pose;
    std::string message;
  };

  Session(const pfp::PfpModel& model, SessionOptions options);

  /// Idle -> TposeCalibrating. Clears any previous calibration.
  void start();
  Result push(const WireFrame& frame);

  Phase phase() const { return phase_; }
  const std::string& last_failure() const { return last_failure_; }
  const SessionCalibration& calibration() const { return calibration_; }
  std::size_t skipped() const { return skipped_; }

 private:
  Result fail(std::string reason);
  Result run(const WireFrame& frame);

  const pfp::PfpModel* model_;
  SessionOptions options_;
  Phase phase_ = Phase::kIdle;
  std::optional<std::uint64_t> last_id_;
  std::vector<synth::ImuFrame> tpose_buffer_;
  std::vector<synth::FlexFrame> flex_buffer_;
  SessionCalibration calibration_;
  pfp::PfpStream stream_;
  std::string last_failure_;
  std::size_t skipped_ = 0;
};

}  // namespace flexpose::runtime
