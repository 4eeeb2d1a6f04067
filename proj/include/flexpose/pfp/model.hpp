// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "flexpose/kin/skeleton.hpp"
#include "flexpose/nn/graph.hpp"
#include "flexpose/nn/layers.hpp"
#include "flexpose/nn/standardizer.hpp"
#include "flexpose/synth/sensors.hpp"

namespace flexpose::pfp {

inline constexpr std::size_t kPositionDim = 3 * kin::kNumPositions;    // 33
inline constexpr std::size_t kRotationDim = 3 * kin::kNumJoints;       // 30
inline constexpr std::size_t kElbowDim = 6;
inline constexpr std::size_t kOtherDim = kRotationDim - kElbowDim;     // 24
inline constexpr std::size_t kElbowInput = synth::kImuFrameSize + synth::kNumFlex + kPositionDim;  // 71
inline constexpr std::size_t kOtherInput = synth::kImuFrameSize + kPositionDim;                    // 69

/// Joints predicted by the other-rotation network, in its output order.
inline constexpr std::array<std::size_t, 8> kOtherJoints = {
    kin::kJointPelvis, kin::kJointSpine1,        kin::kJointSpine2,         kin::kJointChest,
    kin::kJointNeck,   kin::kJointLeftShoulder, kin::kJointRightShoulder, kin::kJointHead};

struct LossWeights {
  double position = 4.0;
  double rotation = 1.0;
  double elbow = 0.1;
  void validate() const;
};

struct PfpConfig {
  std::size_t hidden = 256;
  std::size_t layers = 2;
  LossWeights weights;
  /// Ablation switch: when false the flex input is replaced by zeros in
  /// both training and inference.
  bool use_flex = true;

  nlohmann::json to_json() const;
  static PfpConfig from_json(const nlohmann::json& j);
};

/// Per-sample network outputs: joint rotations (axis-angle, joint order) and
/// the 11 non-root endpoint positions relative to the pelvis.
struct PfpOutput {
  kin::PoseFrame pose;
  std::array<kin::Vec3, kin::kNumPositions> positions;
};

/// Pose fusion predictor: a position LSTM on the IMUs, an elbow LSTM on
/// flex + IMUs + positions and an LSTM for the remaining joints on
/// IMUs + positions. Inputs are standardized with stored statistics.
class PfpModel {
 public:
  struct State {
    nn::LstmStack::State position, elbow, other;
  };
  struct GraphState {
    nn::LstmStack::GraphState position, elbow, other;
  };
  struct GraphStep {
    nn::Var theta;  // B x 30, joint order
    nn::Var p;      // B x 33
  };
  struct Step {
    nn::Tensor theta;
    nn::Tensor p;
  };

  PfpModel() = default;
  PfpModel(const PfpConfig& config, const kin::Skeleton& skeleton, std::uint64_t seed);

  State zero_state(std::size_t batch) const;
  GraphState graph_state(nn::Graph& g, const State& s) const;
  State detach(const nn::Graph& g, const GraphState& s) const;

  /// Normalized inputs to network inputs. imu: B x 36 raw channels; flex:
  /// B x 2 calibrated degrees.
  nn::Tensor normalize_imu(const nn::Tensor& imu) const;
  nn::Tensor normalize_flex(const nn::Tensor& flex_deg) const;

  /// One step on the graph with already-normalized inputs.
  GraphStep step(nn::Graph& g, nn::Var imu_n, nn::Var flex_n, GraphState& state);
  /// One graph-free step with already-normalized inputs.
  Step infer_step(const nn::Tensor& imu_n, const nn::Tensor& flex_n, State& state) const;

  nn::ParameterList parameters();

  const PfpConfig& config() const { return config_; }
  const kin::Skeleton& skeleton() const { return skeleton_; }

  nn::Standardizer imu_norm{synth::kImuFrameSize};
  nn::Standardizer flex_norm{synth::kNumFlex};
  nn::Standardizer position_norm{kPositionDim};

 private:
  PfpConfig config_;
  kin::Skeleton skeleton_;
  nn::LstmStack position_lstm_, elbow_lstm_, other_lstm_;
  nn::Dense position_head_, elbow_head_, other_head_;
};

/// Assembles joint-order rotations from elbow (B x 6) and other (B x 24)
/// outputs.
nn::Var assemble_theta(nn::Graph& g, nn::Var elbow, nn::Var other);
nn::Tensor assemble_theta(const nn::Tensor& elbow, const nn::Tensor& other);

PfpOutput to_output(const nn::Tensor& theta, const nn::Tensor& p, std::size_t row = 0);

/// Single-stream, frame-at-a-time inference with its own recurrent state.
class PfpStream {
 public:
  explicit PfpStream(const PfpModel& model);
  /// Throws NumericError (leaving the state untouched) on non-finite input.
  PfpOutput push(const synth::ImuFrame& imu, const synth::FlexFrame& flex_deg);
  void reset();

 private:
  const PfpModel* model_;
  PfpModel::State state_;
};

void save_pfp(const std::filesystem::path& path, PfpModel& model, std::uint64_t seed = 0);
PfpModel load_pfp(const std::filesystem::path& path);

}  // namespace flexpose::pfp
