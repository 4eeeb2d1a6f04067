// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flexpose/kin/rotation.hpp"
#include "flexpose/kin/skeleton.hpp"

namespace flexpose::synth {

using kin::Mat3;
using kin::Vec3;

inline constexpr std::size_t kNumImus = 4;
inline constexpr std::size_t kImuChannels = 9;
inline constexpr std::size_t kImuFrameSize = kNumImus * kImuChannels;
inline constexpr std::size_t kNumFlex = 2;

enum ImuSite : std::size_t { kLeftForearm = 0, kRightForearm, kBack, kWaist };
inline constexpr std::array<const char*, kNumImus> kImuSiteNames = {"left_forearm", "right_forearm",
                                                                   "back", "waist"};

/// Four IMU readings. Per IMU the 9 channels are the orientation's first
/// matrix column (3), its second column (3), then the gravity-free global
/// acceleration in m/s^2 (3). Stored at sensor precision (float32).
struct ImuFrame {
  std::array<float, kImuFrameSize> ch{};

  kin::Rot6D orientation(std::size_t imu) const;
  Mat3 rotation(std::size_t imu) const { return kin::to_matrix(orientation(imu)); }
  Vec3 acceleration(std::size_t imu) const;
  void set_orientation(std::size_t imu, const Mat3& r);
  void set_orientation(std::size_t imu, const kin::Rot6D& r);
  void set_acceleration(std::size_t imu, const Vec3& a);

  friend bool operator==(const ImuFrame&, const ImuFrame&) = default;
};

/// Raw bend-sensor readings in sensor units.
struct FlexFrame {
  float left = 0.0f;
  float right = 0.0f;
  float operator[](std::size_t i) const { return i == 0 ? left : right; }
  float& operator[](std::size_t i) { return i == 0 ? left : right; }
  friend bool operator==(const FlexFrame&, const FlexFrame&) = default;
};

/// Per-channel loose minus tight difference of two ImuFrames. Held in
/// double so that the difference of two float32 channels is exact.
struct DisplacementFrame {
  std::array<double, kImuFrameSize> ch{};
  friend bool operator==(const DisplacementFrame&, const DisplacementFrame&) = default;
};

struct ImuMount {
  std::size_t host_node = kin::kPelvis;
  Mat3 rotation_offset = Mat3::Identity();
  /// Sensor position in the host node's frame, meters.
  Vec3 position_offset = Vec3::Zero();
};

struct MountingSpec {
  std::array<ImuMount, kNumImus> imus;
  std::array<std::size_t, kNumFlex> flex_elbow = {kin::kLeftElbow, kin::kRightElbow};

  /// Forearm IMUs at 80% of the forearm, back IMU behind the chest, waist IMU
  /// behind the pelvis, each with a fixed non-trivial mounting rotation.
  static MountingSpec standard(const kin::Skeleton& skeleton);
  void validate() const;
};

/// Tight-worn IMU signals. Orientation = host bone global rotation composed
/// with the mounting offset; acceleration = second central difference of the
/// sensor point's global position (edge frames copy their neighbour).
/// Throws LengthError for fewer than 3 frames, ValidationError for dt <= 0.
std::vector<ImuFrame> synth_tight_imu(const kin::Skeleton& skeleton,
                                      std::span<const kin::PoseFrame> poses,
                                      const MountingSpec& mounting, double dt,
                                      std::span<const Vec3> root_translation = {});

/// Affine bend-sensor response: reading = gain * flexion + offset.
struct FlexSensorModel {
  double gain = 1.0;
  double offset = 0.0;
};

std::vector<FlexFrame> synth_flex(const kin::Skeleton& skeleton,
                                  std::span<const kin::PoseFrame> poses,
                                  const FlexSensorModel& model = {});

/// Per-channel loose - tight. Throws LengthError on length mismatch.
std::vector<DisplacementFrame> displacement(std::span<const ImuFrame> tight,
                                            std::span<const ImuFrame> loose);
DisplacementFrame displacement(const ImuFrame& tight, const ImuFrame& loose);

/// Per-channel tight + disp; the inverse of displacement().
std::vector<ImuFrame> apply_displacement(std::span<const ImuFrame> tight,
                                         std::span<const DisplacementFrame> disp);
ImuFrame apply_displacement(const ImuFrame& tight, const DisplacementFrame& disp);

/// Range-shifting distortion a garment introduces when donned:
/// reading -> s * tanh((g * x + b) / s). s = +inf gives the affine g * x + b.
struct WearDistortion {
  double gain = 1.0;
  double offset = 0.0;
  double saturation = 0.0;  // <= 0 or inf means no saturation
};

std::vector<FlexFrame> inject_primary_flex_displacement(std::span<const FlexFrame> flex,
                                                        const WearDistortion& left,
                                                        const WearDistortion& right);
double apply_wear_distortion(double x, const WearDistortion& wear);

}  // namespace flexpose::synth
