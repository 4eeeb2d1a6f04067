// SPDX-License-Identifier: Apache-2.0
#include "flexpose/kin/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "flexpose/error.hpp"

namespace flexpose::kin {

Skeleton Skeleton::upper_body(double stature) {
  if (!(stature > 0.0)) throw ValidationError("stature must be positive");
  const double h = stature;
  // Segment proportions after Drillis & Contini (fractions of stature).
  Skeleton s;
  s.names = {"pelvis", "spine1", "spine2", "chest", "neck", "head_top",
             "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
             "left_wrist", "right_wrist"};
  s.parent = {-1, kPelvis, kSpine1, kSpine2, kChest, kNeck,
              kChest, kChest, kLeftShoulder, kRightShoulder, kLeftElbow, kRightElbow};
  s.offset[kPelvis] = Vec3::Zero();
  s.offset[kSpine1] = {0.0, 0.057 * h, 0.0};
  s.offset[kSpine2] = {0.0, 0.074 * h, 0.0};
  s.offset[kChest] = {0.0, 0.074 * h, 0.0};
  s.offset[kNeck] = {0.0, 0.107 * h, 0.0};
  s.offset[kHeadTop] = {0.0, 0.130 * h, 0.0};
  s.offset[kLeftShoulder] = {0.129 * h, 0.083 * h, 0.0};
  s.offset[kRightShoulder] = {-0.129 * h, 0.083 * h, 0.0};
  s.offset[kLeftElbow] = {0.186 * h, 0.0, 0.0};
  s.offset[kRightElbow] = {-0.186 * h, 0.0, 0.0};
  s.offset[kLeftWrist] = {0.146 * h, 0.0, 0.0};
  s.offset[kRightWrist] = {-0.146 * h, 0.0, 0.0};
  return s;
}

void Skeleton::validate() const {
  if (parent[kPelvis] != -1) throw ValidationError("node 0 (pelvis) must be the root");
  for (std::size_t n = 1; n < kNumNodes; ++n) {
    // Parents precede children, which rules out cycles and extra roots.
    if (parent[n] < 0 || static_cast<std::size_t>(parent[n]) >= n) {
      throw ValidationError("node " + names[n] + " has invalid parent " + std::to_string(parent[n]));
    }
    if (!(offset[n].norm() > 0.0) || !offset[n].allFinite()) {
      throw ValidationError("bone to " + names[n] + " has non-positive length");
    }
  }
  // The elbow chains must hang off the shoulders.
  if (parent[kLeftElbow] != static_cast<int>(kLeftShoulder) ||
      parent[kRightElbow] != static_cast<int>(kRightShoulder) ||
      parent[kLeftWrist] != static_cast<int>(kLeftElbow) ||
      parent[kRightWrist] != static_cast<int>(kRightElbow)) {
    throw ValidationError("skeleton lacks shoulder-elbow-wrist chains");
  }
}

Skeleton Skeleton::from_json(const nlohmann::json& j) {
  const auto& nodes = j.at("nodes");
  if (nodes.size() != kNumNodes) {
    throw ValidationError("skeleton must list " + std::to_string(kNumNodes) + " nodes");
  }
  Skeleton s;
  for (std::size_t n = 0; n < kNumNodes; ++n) {
    const auto& node = nodes[n];
    s.names[n] = node.at("name").get<std::string>();
    s.parent[n] = node.at("parent").is_null() ? -1 : node.at("parent").get<int>();
    const auto off = node.at("offset").get<std::array<double, 3>>();
    s.offset[n] = {off[0], off[1], off[2]};
  }
  s.validate();
  return s;
}

nlohmann::json Skeleton::to_json() const {
  nlohmann::json j;
  j["units"] = "meters";
  j["nodes"] = nlohmann::json::array();
  for (std::size_t n = 0; n < kNumNodes; ++n) {
    nlohmann::json node;
    node["name"] = names[n];
    node["parent"] = parent[n] < 0 ? nlohmann::json(nullptr) : nlohmann::json(parent[n]);
    node["offset"] = {offset[n].x(), offset[n].y(), offset[n].z()};
    j["nodes"].push_back(node);
  }
  return j;
}

Skeleton Skeleton::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open skeleton file " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("skeleton file " + path.string() + ": " + e.what());
  }
}

void Skeleton::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write skeleton file " + path.string());
  out << to_json().dump(2) << "\n";
}

PoseFrame PoseFrame::identity() {
  PoseFrame p;
  p.theta.fill(Vec3::Zero());
  return p;
}

PoseFrame PoseFrame::canonical() const {
  PoseFrame p;
  for (std::size_t j = 0; j < kNumJoints; ++j) p.theta[j] = canonical_axis_angle(theta[j]);
  return p;
}

GlobalPose forward_kinematics(const Skeleton& skeleton, const PoseFrame& pose,
                              const Vec3& root_translation) {
  std::array<Mat3, kNumNodes> local;
  local.fill(Mat3::Identity());
  for (std::size_t j = 0; j < kNumJoints; ++j) local[kJointNode[j]] = to_matrix(AxisAngle{pose.theta[j]});

  GlobalPose out;
  out.rotation[kPelvis] = local[kPelvis];
  out.endpoints.position[kPelvis] = root_translation;
  for (std::size_t n = 1; n < kNumNodes; ++n) {
    const auto p = static_cast<std::size_t>(skeleton.parent[n]);
    out.rotation[n] = out.rotation[p] * local[n];
    out.endpoints.position[n] = out.endpoints.position[p] + out.rotation[p] * skeleton.offset[n];
  }
  return out;
}

EndpointSet fk(const Skeleton& skeleton, const PoseFrame& pose) {
  return forward_kinematics(skeleton, pose).endpoints;
}

namespace {

double vector_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double flexion_at(const EndpointSet& e, std::size_t shoulder, std::size_t elbow, std::size_t wrist) {
  const Vec3 upper = e.position[shoulder] - e.position[elbow];
  const Vec3 fore = e.position[wrist] - e.position[elbow];
  if (upper.norm() < 1e-12 || fore.norm() < 1e-12) throw GeometryError("zero-length arm bone");
  return std::numbers::pi - vector_angle(upper, fore);
}

}  // namespace

ElbowFlexion elbow_flexion(const EndpointSet& endpoints) {
  return {flexion_at(endpoints, kLeftShoulder, kLeftElbow, kLeftWrist),
          flexion_at(endpoints, kRightShoulder, kRightElbow, kRightWrist)};
}

ElbowFlexion elbow_flexion(const Skeleton& skeleton, const PoseFrame& pose) {
  return elbow_flexion(fk(skeleton, pose));
}

double elbow_flexion_from_rotation(const Vec3& upper_offset, const Vec3& fore_offset,
                                   const Vec3& r, Vec3* grad) {
  // In the shoulder frame the upper arm runs along upper_offset and the
  // forearm along R(r) fore_offset; flexion is the angle between the two.
  const double na = upper_offset.norm();
  const Vec3 v = to_matrix(AxisAngle{r}) * fore_offset;
  const double nv = v.norm();
  if (na < 1e-12 || nv < 1e-12) throw GeometryError("zero-length arm bone");
  const double angle = vector_angle(upper_offset, v);
  if (grad) {
    const double c = upper_offset.dot(v) / (na * nv);
    const double s = std::max(std::sqrt(std::max(0.0, 1.0 - c * c)), 1e-9);
    const Vec3 dc_dv = upper_offset / (na * nv) - c * v / (nv * nv);
    const Vec3 dangle_dv = -dc_dv / s;
    *grad = rotated_vector_jacobian(r, fore_offset).transpose() * dangle_dv;
  }
  return angle;
}

PoseFrame mirror(const PoseFrame& pose) {
  auto reflect = [](const Vec3& r) { return Vec3(r.x(), -r.y(), -r.z()); };
  PoseFrame out;
  for (std::size_t j = 0; j < kNumJoints; ++j) out.theta[j] = reflect(pose.theta[j]);
  std::swap(out.theta[kJointLeftShoulder], out.theta[kJointRightShoulder]);
  std::swap(out.theta[kJointLeftElbow], out.theta[kJointRightElbow]);
  return out;
}

}  // namespace flexpose::kin
