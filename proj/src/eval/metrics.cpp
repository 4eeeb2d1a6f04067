// SPDX-License-Identifier: Apache-2.0
#include "flexpose/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "flexpose/error.hpp"

namespace flexpose::eval {

namespace {

template <typename A, typename B>
void require_equal_lengths(const A& a, const B& b, const char* what) {
  if (a.size() != b.size()) {
    throw LengthError(std::string(what) + ": sequences differ in length (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
}

double joint_error(std::span<const kin::PoseFrame> pred, std::span<const kin::PoseFrame> gt,
                   std::span<const std::size_t> joints) {
  require_equal_lengths(pred, gt, "angular error");
  if (pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    for (std::size_t j : joints) {
      total += kin::geodesic_angle_deg(kin::to_quaternion(kin::AxisAngle{pred[k].theta[j]}),
                                       kin::to_quaternion(kin::AxisAngle{gt[k].theta[j]}));
    }
  }
  return total / static_cast<double>(pred.size() * joints.size());
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double trace_sqrt_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  // tr((A B)^{1/2}) = tr((A^{1/2} B A^{1/2})^{1/2}) for symmetric PSD A, B.
  const Eigen::MatrixXd ra = sqrt_psd(a);
  const Eigen::MatrixXd inner = ra * b * ra;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

void fit_gaussian(const nn::Tensor& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov, double eps) {
  const std::size_t n = x.rows(), d = x.cols();
  Eigen::MatrixXd m(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = x(r, c);
  mu = m.colwise().mean().transpose();
  const Eigen::MatrixXd centered = m.rowwise() - mu.transpose();
  cov = n > 1 ? Eigen::MatrixXd(centered.transpose() * centered / static_cast<double>(n - 1))
              : Eigen::MatrixXd::Zero(d, d);
  cov.diagonal().array() += eps;
}

}  // namespace

double angular_error(std::span<const kin::PoseFrame> pred, std::span<const kin::PoseFrame> gt) {
  static constexpr std::array<std::size_t, kin::kNumJoints> all = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  return joint_error(pred, gt, all);
}

double elbow_angular_error(std::span<const kin::PoseFrame> pred, std::span<const kin::PoseFrame> gt) {
  static constexpr std::array<std::size_t, 2> elbows = {kin::kJointLeftElbow, kin::kJointRightElbow};
  return joint_error(pred, gt, elbows);
}

double positional_error(std::span<const kin::EndpointSet> pred, std::span<const kin::EndpointSet> gt) {
  require_equal_lengths(pred, gt, "positional error");
  if (pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    for (std::size_t n = 1; n < kin::kNumNodes; ++n) total += (pred[k].position[n] - gt[k].position[n]).norm();
  }
  return 100.0 * total / static_cast<double>(pred.size() * kin::kNumPositions);
}

double jitter(std::span<const kin::EndpointSet> positions, double fps) {
  if (positions.size() < 4) throw LengthError("jitter needs at least 4 frames");
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  const double scale = fps * fps * fps;
  double total = 0.0;
  for (std::size_t k = 0; k + 3 < positions.size(); ++k) {
    for (std::size_t n = 0; n < kin::kNumNodes; ++n) {
      const kin::Vec3 d3 = positions[k + 3].position[n] - 3.0 * positions[k + 2].position[n] +
                           3.0 * positions[k + 1].position[n] - positions[k].position[n];
      total += d3.norm() * scale;
    }
  }
  return total / static_cast<double>((positions.size() - 3) * kin::kNumNodes);
}

double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                        const Eigen::MatrixXd& cov_b) {
  if (mu_a.size() != mu_b.size() || cov_a.rows() != mu_a.size() || cov_b.rows() != mu_b.size()) {
    throw DimensionError("Frechet distance: dimension mismatch");
  }
  // Averaging both orderings keeps the result exactly symmetric.
  const double cross = 0.5 * (trace_sqrt_product(cov_a, cov_b) + trace_sqrt_product(cov_b, cov_a));
  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

double gaussian_frechet(const nn::Tensor& a, const nn::Tensor& b, double eps) {
  if (a.rows() == 0 || b.rows() == 0) throw LengthError("Frechet distance needs non-empty sets");
  if (a.cols() != b.cols()) throw DimensionError("Frechet distance: feature counts differ");
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  fit_gaussian(a, mu_a, cov_a, eps);
  fit_gaussian(b, mu_b, cov_b, eps);
  return frechet_distance(mu_a, cov_a, mu_b, cov_b);
}

double projected_frechet(std::span<const nn::Tensor> a, std::span<const nn::Tensor> b, std::size_t k,
                         std::uint64_t seed, double eps) {
  if (a.empty() || b.empty()) throw LengthError("Frechet distance needs non-empty sets");
  const std::size_t dim = a.front().size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(k)));
  Eigen::MatrixXd proj(dim, k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < dim; ++r) proj(r, c) = normal(rng);
  auto project = [&](std::span<const nn::Tensor> set) {
    nn::Tensor out = nn::Tensor::matrix(set.size(), k);
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set[i].size() != dim) throw DimensionError("Frechet distance: windows differ in shape");
      const Eigen::Map<const Eigen::RowVectorXd> x(set[i].raw(), static_cast<Eigen::Index>(dim));
      const Eigen::RowVectorXd y = x * proj;
      for (std::size_t c = 0; c < k; ++c) out(i, c) = y(static_cast<Eigen::Index>(c));
    }
    return out;
  };
  return gaussian_frechet(project(a), project(b), eps);
}

double psnr(const nn::Tensor& a, const nn::Tensor& b, double peak) {
  nn::require_same_shape(a, b, "psnr");
  if (a.empty()) throw LengthError("psnr of empty windows");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const nn::Tensor& a, const nn::Tensor& b, const SsimConfig& config) {
  nn::require_same_shape(a, b, "ssim");
  if (a.empty()) throw LengthError("ssim of empty windows");
  const std::size_t rows = a.rows(), cols = a.cols();
  const std::size_t w = std::min(std::max<std::size_t>(config.window, 1), rows);
  const double c1 = std::pow(0.01 * config.dynamic_range, 2), c2 = std::pow(0.03 * config.dynamic_range, 2);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t s = 0; s + w <= rows; ++s) {
      double ma = 0, mb = 0;
      for (std::size_t r = s; r < s + w; ++r) {
        ma += a(r, c);
        mb += b(r, c);
      }
      ma /= w;
      mb /= w;
      double va = 0, vb = 0, cov = 0;
      for (std::size_t r = s; r < s + w; ++r) {
        va += (a(r, c) - ma) * (a(r, c) - ma);
        vb += (b(r, c) - mb) * (b(r, c) - mb);
        cov += (a(r, c) - ma) * (b(r, c) - mb);
      }
      va /= w;
      vb /= w;
      cov /= w;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace flexpose::eval
