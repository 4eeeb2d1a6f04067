// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "flexpose/kin/rotation.hpp"

namespace flexpose::kin {

inline constexpr std::size_t kNumNodes = 12;
inline constexpr std::size_t kNumJoints = 10;
/// Non-root endpoints, i.e. the positions a predictor regresses.
inline constexpr std::size_t kNumPositions = kNumNodes - 1;

enum Node : std::size_t {
  kPelvis = 0,
  kSpine1,
  kSpine2,
  kChest,
  kNeck,
  kHeadTop,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
};

/// Rotating joints in the fixed output order of every pose vector.
enum Joint : std::size_t {
  kJointPelvis = 0,
  kJointSpine1,
  kJointSpine2,
  kJointChest,
  kJointNeck,
  kJointLeftShoulder,
  kJointRightShoulder,
  kJointLeftElbow,
  kJointRightElbow,
  kJointHead,
};

/// Node that each joint rotates (the joint's rotation applies to the bones
/// leaving that node). The head joint sits on the head-top leaf, so it has
/// orientation but no positional effect.
inline constexpr std::array<std::size_t, kNumJoints> kJointNode = {
    kPelvis, kSpine1, kSpine2, kChest, kNeck, kLeftShoulder, kRightShoulder,
    kLeftElbow, kRightElbow, kHeadTop};

inline constexpr std::array<const char*, kNumJoints> kJointNames = {
    "pelvis", "spine1", "spine2", "chest", "neck",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "head"};

/// Hinge axis of each elbow in the rest (T-pose) frame; rotating about it
/// bends the forearm forward.
inline const Vec3 kLeftElbowAxis{0.0, -1.0, 0.0};
inline const Vec3 kRightElbowAxis{0.0, 1.0, 0.0};

struct Skeleton {
  std::array<std::string, kNumNodes> names;
  std::array<int, kNumNodes> parent;
  /// Rest-pose offset of each node from its parent, meters.
  std::array<Vec3, kNumNodes> offset;

  /// Default upper body in T-pose (y up, x to the wearer's left, z forward)
  /// with segment lengths proportional to stature in meters.
  static Skeleton upper_body(double stature = 1.75);

  /// Throws ValidationError unless the node list forms a tree rooted at the
  /// pelvis with positive bone lengths.
  void validate() const;
  double bone_length(std::size_t node) const { return offset[node].norm(); }

  static Skeleton from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static Skeleton load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Per-joint rotation vectors (radians) in joint order.
struct PoseFrame {
  std::array<Vec3, kNumJoints> theta;

  static PoseFrame identity();
  /// Wraps every joint's rotation angle into [0, pi].
  PoseFrame canonical() const;
};

/// Positions of all skeleton nodes, meters. The pelvis sits at the root
/// translation (origin unless supplied).
struct EndpointSet {
  std::array<Vec3, kNumNodes> position;
};

struct GlobalPose {
  std::array<Mat3, kNumNodes> rotation;
  EndpointSet endpoints;
};

GlobalPose forward_kinematics(const Skeleton& skeleton, const PoseFrame& pose,
                              const Vec3& root_translation = Vec3::Zero());
EndpointSet fk(const Skeleton& skeleton, const PoseFrame& pose);

struct ElbowFlexion {
  double left = 0.0;
  double right = 0.0;
};

/// Flexion = pi - angle between the elbow->shoulder and elbow->wrist vectors.
/// Straight arm is 0. Throws GeometryError on zero-length bones.
ElbowFlexion elbow_flexion(const Skeleton& skeleton, const PoseFrame& pose);
ElbowFlexion elbow_flexion(const EndpointSet& endpoints);

/// Flexion produced by a local elbow rotation r, given the rest offsets of
/// the elbow (shoulder->elbow) and wrist (elbow->wrist). If grad is non-null
/// it receives d(flexion)/dr.
double elbow_flexion_from_rotation(const Vec3& upper_offset, const Vec3& fore_offset,
                                   const Vec3& r, Vec3* grad = nullptr);

/// Reflection through the sagittal (x = 0) plane with left/right swapped.
PoseFrame mirror(const PoseFrame& pose);

}  // namespace flexpose::kin
