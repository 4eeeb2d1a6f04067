// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "flexpose/kin/skeleton.hpp"
#include "flexpose/nn/tensor.hpp"

namespace flexpose::eval {

/// Mean geodesic angle (degrees) over frames and all 10 joints.
double angular_error(std::span<const kin::PoseFrame> pred, std::span<const kin::PoseFrame> gt);

/// As angular_error restricted to the two elbow joints.
double elbow_angular_error(std::span<const kin::PoseFrame> pred, std::span<const kin::PoseFrame> gt);

/// Mean Euclidean distance (cm) over frames and the 11 non-root endpoints.
double positional_error(std::span<const kin::EndpointSet> pred, std::span<const kin::EndpointSet> gt);

/// Mean norm of the third finite difference times fps^3 (m/s^3), over all
/// frames and all 12 nodes. Throws LengthError for fewer than 4 frames.
double jitter(std::span<const kin::EndpointSet> positions, double fps);

/// Frechet distance between two Gaussians:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                        const Eigen::MatrixXd& cov_b);

/// Frechet distance between Gaussian fits of two sample sets (one sample per
/// row). Both covariances get eps * I added so that singular fits stay
/// well-defined.
double gaussian_frechet(const nn::Tensor& a, const nn::Tensor& b, double eps = 1e-6);

/// Windows (all the same shape) are flattened and projected to k dims by a
/// fixed Gaussian random projection drawn from `seed`, then compared with
/// gaussian_frechet. Throws LengthError if either set is empty.
double projected_frechet(std::span<const nn::Tensor> a, std::span<const nn::Tensor> b, std::size_t k = 64,
                         std::uint64_t seed = 0x5eed, double eps = 1e-6);

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE), capped at 100 dB.
double psnr(const nn::Tensor& a, const nn::Tensor& b, double peak);

struct SsimConfig {
  std::size_t window = 7;
  double dynamic_range = 1.0;
};

/// Mean SSIM over sliding windows along rows (time) for each column
/// (channel), averaged over channels.
double ssim(const nn::Tensor& a, const nn::Tensor& b, const SsimConfig& config = {});

}  // namespace flexpose::eval
