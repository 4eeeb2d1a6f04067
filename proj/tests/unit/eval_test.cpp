// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "flexpose/error.hpp"
#include "flexpose/eval/metrics.hpp"
#include "flexpose/eval/report.hpp"
#include "flexpose/kin/rotation.hpp"
#include "flexpose/synth/motion.hpp"

using namespace flexpose;
using namespace flexpose::eval;
using kin::Vec3;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<kin::EndpointSet> endpoints_of(const synth::PoseSequence& seq) {
  const auto sk = kin::Skeleton::upper_body();
  std::vector<kin::EndpointSet> out;
  for (const auto& p : seq.frames) out.push_back(kin::fk(sk, p));
  return out;
}

std::vector<kin::EndpointSet> cubic_trajectory(double a, double fps, std::size_t n) {
  std::vector<kin::EndpointSet> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / fps;
    for (auto& p : out[k].position) p = Vec3::Zero();
    out[k].position[kin::kLeftWrist].x() = a * t * t * t;
  }
  return out;
}

nn::Tensor gaussian_rows(std::size_t n, std::size_t d, double mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, 1.0);
  nn::Tensor t = nn::Tensor::matrix(n, d);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = g(rng);
  return t;
}

}  // namespace

TEST(AngularError, IdenticalIsZero) {
  const auto seq = synth::generate_motion(synth::MotionStyle::kFree, 50, 60.0, 1);
  EXPECT_NEAR(angular_error(seq.frames, seq.frames), 0.0, 1e-9);
  EXPECT_NEAR(elbow_angular_error(seq.frames, seq.frames), 0.0, 1e-9);
}

TEST(AngularError, OneJointOffByThirtyGivesThree) {
  std::vector<kin::PoseFrame> gt(5, kin::PoseFrame::identity()), pred = gt;
  for (auto& p : pred) p.theta[kin::kJointNeck] = Vec3(0.0, 0.0, 30.0 * kDeg);
  EXPECT_NEAR(angular_error(pred, gt), 3.0, 1e-9);
}

TEST(AngularError, BothElbowsOffByTen) {
  const auto seq = synth::generate_motion(synth::MotionStyle::kBoxing, 20, 60.0, 2);
  auto pred = seq.frames;
  for (auto& p : pred) {
    for (auto j : {kin::kJointLeftElbow, kin::kJointRightElbow}) {
      const kin::Mat3 r = kin::to_matrix(kin::AxisAngle{p.theta[j]}) *
                          kin::to_matrix(kin::AxisAngle{Vec3(1, 2, 3).normalized() * 10.0 * kDeg});
      p.theta[j] = kin::to_axis_angle(r).v;
    }
  }
  EXPECT_NEAR(elbow_angular_error(pred, seq.frames), 10.0, 1e-6);
}

TEST(AngularError, LengthMismatchThrows) {
  std::vector<kin::PoseFrame> a(3, kin::PoseFrame::identity()), b(4, kin::PoseFrame::identity());
  EXPECT_THROW(angular_error(a, b), LengthError);
  EXPECT_THROW(elbow_angular_error(a, b), LengthError);
}

TEST(PositionalError, OneEndpointOffsetGivesOneCm) {
  const auto gt = endpoints_of(synth::generate_motion(synth::MotionStyle::kWalking, 10, 60.0, 3));
  auto pred = gt;
  EXPECT_DOUBLE_EQ(positional_error(pred, gt), 0.0);
  for (auto& e : pred) e.position[kin::kHeadTop] += Vec3(0.0, 0.11, 0.0);
  EXPECT_NEAR(positional_error(pred, gt), 1.0, 1e-9);
  pred.pop_back();
  EXPECT_THROW(positional_error(pred, gt), LengthError);
}

TEST(Jitter, ConstantVelocityIsZero) {
  std::vector<kin::EndpointSet> seq(10);
  for (std::size_t k = 0; k < seq.size(); ++k)
    for (std::size_t n = 0; n < kin::kNumNodes; ++n) seq[k].position[n] = Vec3(1, 2, 3) * (0.1 * k) + Vec3(n, 0, 0);
  EXPECT_NEAR(jitter(seq, 60.0), 0.0, 1e-9);
}

TEST(Jitter, CubicGivesSixA) {
  const double a = 2.0;
  // Only one of 12 endpoints moves, so the mean over endpoints is 6a/12.
  const double j = jitter(cubic_trajectory(a, 240.0, 100), 240.0) * kin::kNumNodes;
  EXPECT_NEAR(j, 6.0 * a, 0.01 * 6.0 * a);
}

TEST(Jitter, ScalesCubicallyWithTimeCompression) {
  const auto seq = endpoints_of(synth::generate_motion(synth::MotionStyle::kFree, 200, 60.0, 4));
  const double s = 2.5;
  EXPECT_NEAR(jitter(seq, 60.0 * s), s * s * s * jitter(seq, 60.0), 1e-9 * jitter(seq, 60.0 * s));
}

TEST(Jitter, TooShortThrows) {
  std::vector<kin::EndpointSet> seq(3);
  EXPECT_THROW(jitter(seq, 60.0), LengthError);
}

TEST(PoseMetrics, InvariantToGlobalRigidRotation) {
  const auto gt = endpoints_of(synth::generate_motion(synth::MotionStyle::kFree, 60, 60.0, 5));
  const auto pred = endpoints_of(synth::generate_motion(synth::MotionStyle::kFree, 60, 60.0, 6));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    const kin::Mat3 r = kin::to_matrix(kin::AxisAngle{Vec3(g(rng), g(rng), g(rng))});
    auto rg = gt, rp = pred;
    for (auto* set : {&rg, &rp})
      for (auto& e : *set)
        for (auto& p : e.position) p = r * p;
    EXPECT_NEAR(positional_error(rp, rg), positional_error(pred, gt), 1e-9);
    EXPECT_NEAR(jitter(rp, 60.0), jitter(pred, 60.0), 1e-9 * jitter(pred, 60.0));
  }
}

TEST(Frechet, IdenticalSetsAreZero) {
  const auto a = gaussian_rows(500, 4, 0.0, 1);
  EXPECT_NEAR(gaussian_frechet(a, a), 0.0, 1e-9);
}

TEST(Frechet, OneDimensionalMeanShift) {
  for (double m : {0.5, 1.0, 2.0}) {
    const auto a = gaussian_rows(20000, 1, 0.0, 11);
    const auto b = gaussian_rows(20000, 1, m, 12);
    EXPECT_NEAR(gaussian_frechet(a, b), m * m, 0.05);
  }
}

TEST(Frechet, ClosedFormMatchesKnownCovariances) {
  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(2), mu1(2);
  mu1 << 1.0, 2.0;
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Identity(2, 2), c1 = 4.0 * Eigen::MatrixXd::Identity(2, 2);
  // 5 + (2 + 8 - 2 * 2 * 2) = 7
  EXPECT_NEAR(frechet_distance(mu0, c0, mu1, c1), 7.0, 1e-12);
}

TEST(Frechet, SymmetricAndProjected) {
  std::vector<nn::Tensor> a, b;
  for (std::uint64_t s = 0; s < 80; ++s) {
    a.push_back(gaussian_rows(6, 5, 0.0, 100 + s));
    b.push_back(gaussian_rows(6, 5, 0.3, 300 + s));
  }
  const double ab = projected_frechet(a, b, 16, 9), ba = projected_frechet(b, a, 16, 9);
  EXPECT_NEAR(ab, ba, 1e-9);
  EXPECT_GT(ab, 0.0);
  EXPECT_NEAR(projected_frechet(a, a, 16, 9), 0.0, 1e-9);
  EXPECT_THROW(projected_frechet(a, {}, 16, 9), LengthError);
  // A single window has singular covariance; regularization keeps it finite.
  EXPECT_TRUE(std::isfinite(projected_frechet(std::span(a).first(1), b, 16, 9)));
}

TEST(Psnr, CapAndFormula) {
  const auto a = gaussian_rows(30, 4, 0.0, 21);
  EXPECT_DOUBLE_EQ(psnr(a, a, 1.0), kPsnrCap);
  auto b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += (i % 2 ? 0.1 : -0.1);
  EXPECT_NEAR(psnr(a, b, 2.0), 10.0 * std::log10(4.0 / 0.01), 1e-9);
  EXPECT_THROW(psnr(a, nn::Tensor::matrix(30, 3), 1.0), DimensionError);
}

TEST(Ssim, IdentityAndBounds) {
  const auto a = gaussian_rows(60, 36, 0.0, 31);
  EXPECT_DOUBLE_EQ(ssim(a, a, {7, 6.0}), 1.0);
  const auto b = gaussian_rows(60, 36, 0.0, 32);
  const double s = ssim(a, b, {7, 6.0});
  EXPECT_GE(s, -1.0);
  EXPECT_LT(s, 0.5);
  // Same local means, mirrored structure.
  const auto c = gaussian_rows(60, 36, 10.0, 33);
  auto mirrored = c;
  for (std::size_t i = 0; i < c.size(); ++i) mirrored[i] = 20.0 - c[i];
  EXPECT_LT(ssim(c, mirrored, {7, 6.0}), -0.9);
}

TEST(Reports, AggregateAndSerialize) {
  const auto sk = kin::Skeleton::upper_body();
  const auto gt = synth::generate_motion(synth::MotionStyle::kWalking, 40, 60.0, 41);
  const auto pred = synth::generate_motion(synth::MotionStyle::kWalking, 40, 60.0, 42);
  std::vector<SequenceMetrics> seqs = {evaluate_sequence("a", sk, pred.frames, gt.frames, 60.0),
                                       evaluate_sequence("b", sk, gt.frames, gt.frames, 60.0)};
  const auto report = aggregate(seqs);
  EXPECT_EQ(report.frames, 80u);
  EXPECT_NEAR(report.angular.mean, 0.5 * seqs[0].angular, 1e-12);
  EXPECT_NEAR(report.angular.std, seqs[0].angular / std::sqrt(2.0), 1e-12);
  EXPECT_GE(report.positional.mean, 0.0);
  const auto j = to_json(report);
  EXPECT_EQ(j["sequences"].size(), 2u);
  const auto path = std::filesystem::temp_directory_path() / "flexpose_eval_report.csv";
  write_csv(path, report);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 4);
  std::filesystem::remove(path);
}

TEST(Reports, GenerationMetrics) {
  std::vector<nn::Tensor> real;
  for (std::uint64_t s = 0; s < 20; ++s) real.push_back(gaussian_rows(60, 36, 0.0, 500 + s));
  const auto same = generation_metrics(real, real, {16, 3, 7});
  EXPECT_NEAR(same.frechet, 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(same.psnr, kPsnrCap);
  EXPECT_DOUBLE_EQ(same.ssim, 1.0);
  EXPECT_EQ(to_json(same)["windows"], 20);
}
