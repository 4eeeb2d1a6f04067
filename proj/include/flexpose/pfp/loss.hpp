// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flexpose/kin/skeleton.hpp"
#include "flexpose/nn/graph.hpp"
#include "flexpose/pfp/model.hpp"

namespace flexpose::pfp {

/// Elbow flexion (radians, B x 2: left, right) obtained through forward
/// kinematics from elbow rotations (B x 6), differentiable.
nn::Var elbow_flexion_op(nn::Graph& g, nn::Var elbow_theta, const kin::Skeleton& skeleton);
nn::Tensor elbow_flexion_values(const nn::Tensor& elbow_theta, const kin::Skeleton& skeleton);

/// Columns 21..26 of a joint-order rotation tensor.
nn::Var elbow_columns(nn::Graph& g, nn::Var theta);
nn::Tensor elbow_columns(const nn::Tensor& theta);

struct LossTerms {
  nn::Var total;
  nn::Var position;
  nn::Var rotation;
  nn::Var elbow;
};

/// total = w.position * MSE(p, gt_p) + w.rotation * MSE(theta, gt_theta)
///       + w.elbow * MSE(flexion(theta_elbow), gt_flexion).
LossTerms pfp_loss(nn::Graph& g, nn::Var theta, nn::Var p, const nn::Tensor& gt_theta, const nn::Tensor& gt_p,
                   const nn::Tensor& gt_flexion, const kin::Skeleton& skeleton, const LossWeights& weights);

}  // namespace flexpose::pfp
