// SPDX-License-Identifier: Apache-2.0
#include "flexpose/pfp/loss.hpp"

#include "flexpose/error.hpp"

namespace flexpose::pfp {

namespace {

constexpr std::size_t kElbowBegin = 3 * kin::kJointLeftElbow;

struct ArmGeometry {
  kin::Vec3 upper, fore;
};

std::array<ArmGeometry, 2> arms(const kin::Skeleton& s) {
  return {ArmGeometry{s.offset[kin::kLeftElbow], s.offset[kin::kLeftWrist]},
          ArmGeometry{s.offset[kin::kRightElbow], s.offset[kin::kRightWrist]}};
}

}  // namespace

nn::Tensor elbow_flexion_values(const nn::Tensor& elbow_theta, const kin::Skeleton& skeleton) {
  const auto geo = arms(skeleton);
  nn::Tensor out = nn::Tensor::matrix(elbow_theta.rows(), 2);
  for (std::size_t r = 0; r < elbow_theta.rows(); ++r)
    for (std::size_t s = 0; s < 2; ++s) {
      const kin::Vec3 v(elbow_theta(r, 3 * s), elbow_theta(r, 3 * s + 1), elbow_theta(r, 3 * s + 2));
      out(r, s) = kin::elbow_flexion_from_rotation(geo[s].upper, geo[s].fore, v);
    }
  return out;
}

nn::Var elbow_flexion_op(nn::Graph& g, nn::Var elbow_theta, const kin::Skeleton& skeleton) {
  const auto geo = arms(skeleton);
  const nn::Tensor& x = g.value(elbow_theta);
  if (x.cols() != kElbowDim) throw DimensionError("elbow flexion expects B x 6 rotations");
  nn::Tensor out = nn::Tensor::matrix(x.rows(), 2);
  nn::Tensor jac = nn::Tensor::matrix(x.rows(), kElbowDim);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t s = 0; s < 2; ++s) {
      const kin::Vec3 v(x(r, 3 * s), x(r, 3 * s + 1), x(r, 3 * s + 2));
      kin::Vec3 grad;
      out(r, s) = kin::elbow_flexion_from_rotation(geo[s].upper, geo[s].fore, v, &grad);
      for (int k = 0; k < 3; ++k) jac(r, 3 * s + k) = grad[k];
    }
  return g.custom({elbow_theta}, std::move(out),
                  [jac = std::move(jac)](const nn::Tensor& grad_out, const std::vector<const nn::Tensor*>&,
                                         const std::vector<nn::Tensor*>& grads) {
                    if (!grads[0]) return;
                    nn::Tensor& d = *grads[0];
                    for (std::size_t r = 0; r < jac.rows(); ++r)
                      for (std::size_t c = 0; c < kElbowDim; ++c) d(r, c) += grad_out(r, c / 3) * jac(r, c);
                  });
}

nn::Var elbow_columns(nn::Graph& g, nn::Var theta) { return g.slice_cols(theta, kElbowBegin, kElbowBegin + kElbowDim); }

nn::Tensor elbow_columns(const nn::Tensor& theta) {
  nn::Tensor out = nn::Tensor::matrix(theta.rows(), kElbowDim);
  for (std::size_t r = 0; r < theta.rows(); ++r)
    for (std::size_t c = 0; c < kElbowDim; ++c) out(r, c) = theta(r, kElbowBegin + c);
  return out;
}

LossTerms pfp_loss(nn::Graph& g, nn::Var theta, nn::Var p, const nn::Tensor& gt_theta, const nn::Tensor& gt_p,
                   const nn::Tensor& gt_flexion, const kin::Skeleton& skeleton, const LossWeights& weights) {
  LossTerms t;
  t.position = g.mse(p, g.constant(gt_p));
  t.rotation = g.mse(theta, g.constant(gt_theta));
  t.elbow = g.mse(elbow_flexion_op(g, elbow_columns(g, theta), skeleton), g.constant(gt_flexion));
  t.total = g.add(g.add(g.scale(t.position, weights.position), g.scale(t.rotation, weights.rotation)),
                  g.scale(t.elbow, weights.elbow));
  return t;
}

}  // namespace flexpose::pfp
