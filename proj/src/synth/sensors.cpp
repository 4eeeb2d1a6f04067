// SPDX-License-Identifier: Apache-2.0
#include "flexpose/synth/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flexpose/error.hpp"

namespace flexpose::synth {

using kin::AxisAngle;
using kin::to_matrix;

kin::Rot6D ImuFrame::orientation(std::size_t imu) const {
  const float* c = ch.data() + imu * kImuChannels;
  return {Vec3(c[0], c[1], c[2]), Vec3(c[3], c[4], c[5])};
}

Vec3 ImuFrame::acceleration(std::size_t imu) const {
  const float* c = ch.data() + imu * kImuChannels;
  return {c[6], c[7], c[8]};
}

void ImuFrame::set_orientation(std::size_t imu, const kin::Rot6D& r) {
  float* c = ch.data() + imu * kImuChannels;
  for (int i = 0; i < 3; ++i) {
    c[i] = static_cast<float>(r.a1[i]);
    c[3 + i] = static_cast<float>(r.a2[i]);
  }
}

void ImuFrame::set_orientation(std::size_t imu, const Mat3& r) { set_orientation(imu, kin::to_rot6d(r)); }

void ImuFrame::set_acceleration(std::size_t imu, const Vec3& a) {
  float* c = ch.data() + imu * kImuChannels;
  for (int i = 0; i < 3; ++i) c[6 + i] = static_cast<float>(a[i]);
}

MountingSpec MountingSpec::standard(const kin::Skeleton& skeleton) {
  MountingSpec m;
  const auto rot = [](double x, double y, double z) { return to_matrix(AxisAngle{Vec3(x, y, z)}); };
  m.imus[kLeftForearm] = {kin::kLeftElbow, rot(0.25, 0.0, 0.05), 0.8 * skeleton.offset[kin::kLeftWrist]};
  m.imus[kRightForearm] = {kin::kRightElbow, rot(-0.25, 0.0, -0.05),
                           0.8 * skeleton.offset[kin::kRightWrist]};
  // Trunk sensors face backwards.
  m.imus[kBack] = {kin::kChest, rot(0.0, std::numbers::pi, 0.0) * rot(0.1, 0.0, 0.0),
                   Vec3(0.0, 0.02, -0.10)};
  m.imus[kWaist] = {kin::kPelvis, rot(0.0, std::numbers::pi, 0.0) * rot(-0.1, 0.0, 0.0),
                    Vec3(0.0, 0.03, -0.11)};
  return m;
}

void MountingSpec::validate() const {
  if (imus[kLeftForearm].host_node != kin::kLeftElbow || imus[kRightForearm].host_node != kin::kRightElbow) {
    throw ValidationError("forearm IMUs must be hosted on the elbow nodes");
  }
  for (std::size_t i = 0; i < kNumImus; ++i) {
    if (imus[i].host_node >= kin::kNumNodes) throw ValidationError("IMU host node out of range");
    kin::validate_rotation(imus[i].rotation_offset);
    if (!imus[i].position_offset.allFinite()) throw ValidationError("IMU position offset not finite");
  }
  if (flex_elbow[0] != kin::kLeftElbow || flex_elbow[1] != kin::kRightElbow) {
    throw ValidationError("flex sensors must sit on the left and right elbows");
  }
}

std::vector<ImuFrame> synth_tight_imu(const kin::Skeleton& skeleton, std::span<const kin::PoseFrame> poses,
                                      const MountingSpec& mounting, double dt,
                                      std::span<const Vec3> root_translation) {
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (poses.size() < 3) throw LengthError("need at least 3 frames for second differences");
  if (!root_translation.empty() && root_translation.size() != poses.size()) {
    throw LengthError("root translation length differs from pose sequence");
  }
  const std::size_t n = poses.size();
  std::vector<ImuFrame> out(n);
  std::vector<std::array<Vec3, kNumImus>> pos(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 root = root_translation.empty() ? Vec3::Zero() : root_translation[k];
    const auto g = kin::forward_kinematics(skeleton, poses[k], root);
    for (std::size_t i = 0; i < kNumImus; ++i) {
      const auto& m = mounting.imus[i];
      const Mat3& host = g.rotation[m.host_node];
      out[k].set_orientation(i, Mat3(host * m.rotation_offset));
      pos[k][i] = g.endpoints.position[m.host_node] + host * m.position_offset;
    }
  }
  const double inv_dt2 = 1.0 / (dt * dt);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t c = std::clamp<std::size_t>(k, 1, n - 2);
    for (std::size_t i = 0; i < kNumImus; ++i) {
      const Vec3 a = (pos[c + 1][i] - 2.0 * pos[c][i] + pos[c - 1][i]) * inv_dt2;
      out[k].set_acceleration(i, a);
    }
  }
  return out;
}

std::vector<FlexFrame> synth_flex(const kin::Skeleton& skeleton, std::span<const kin::PoseFrame> poses,
                                  const FlexSensorModel& model) {
  std::vector<FlexFrame> out;
  out.reserve(poses.size());
  for (const auto& p : poses) {
    const auto f = kin::elbow_flexion(skeleton, p);
    out.push_back({static_cast<float>(model.gain * f.left + model.offset),
                   static_cast<float>(model.gain * f.right + model.offset)});
  }
  return out;
}

DisplacementFrame displacement(const ImuFrame& tight, const ImuFrame& loose) {
  DisplacementFrame d;
  for (std::size_t c = 0; c < kImuFrameSize; ++c) {
    d.ch[c] = static_cast<double>(loose.ch[c]) - static_cast<double>(tight.ch[c]);
  }
  return d;
}

std::vector<DisplacementFrame> displacement(std::span<const ImuFrame> tight, std::span<const ImuFrame> loose) {
  if (tight.size() != loose.size()) throw LengthError("tight and loose sequences differ in length");
  std::vector<DisplacementFrame> out(tight.size());
  for (std::size_t k = 0; k < tight.size(); ++k) out[k] = displacement(tight[k], loose[k]);
  return out;
}

ImuFrame apply_displacement(const ImuFrame& tight, const DisplacementFrame& disp) {
  ImuFrame out;
  for (std::size_t c = 0; c < kImuFrameSize; ++c) {
    out.ch[c] = static_cast<float>(static_cast<double>(tight.ch[c]) + disp.ch[c]);
  }
  return out;
}

std::vector<ImuFrame> apply_displacement(std::span<const ImuFrame> tight,
                                         std::span<const DisplacementFrame> disp) {
  if (tight.size() != disp.size()) throw LengthError("tight and displacement sequences differ in length");
  std::vector<ImuFrame> out(tight.size());
  for (std::size_t k = 0; k < tight.size(); ++k) out[k] = apply_displacement(tight[k], disp[k]);
  return out;
}

double apply_wear_distortion(double x, const WearDistortion& wear) {
  if (!(wear.gain > 0.0)) throw ValidationError("wear gain must be positive");
  const double y = wear.gain * x + wear.offset;
  const double s = wear.saturation;
  if (!(s > 0.0) || std::isinf(s)) return y;
  return s * std::tanh(y / s);
}

std::vector<FlexFrame> inject_primary_flex_displacement(std::span<const FlexFrame> flex,
                                                        const WearDistortion& left,
                                                        const WearDistortion& right) {
  std::vector<FlexFrame> out;
  out.reserve(flex.size());
  for (const auto& f : flex) {
    out.push_back({static_cast<float>(apply_wear_distortion(f.left, left)),
                   static_cast<float>(apply_wear_distortion(f.right, right))});
  }
  return out;
}

}  // namespace flexpose::synth
