// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "flexpose/error.hpp"
#include "flexpose/pfp/loss.hpp"
#include "flexpose/pfp/model.hpp"
#include "flexpose/pfp/train.hpp"
#include "flexpose/synth/motion.hpp"
#include "flexpose/synth/sensors.hpp"
#include "support/gradcheck.hpp"

using namespace flexpose;
using namespace flexpose::pfp;

namespace {

const kin::Skeleton& skeleton() {
  static const kin::Skeleton s = kin::Skeleton::upper_body();
  return s;
}

PfpSequence make_sequence(std::uint64_t seed, std::size_t frames) {
  const auto motion = synth::generate_motion(synth::MotionStyle::kFree, frames, 60.0, seed);
  PfpSequence seq;
  seq.name = "seq" + std::to_string(seed);
  seq.poses = motion.frames;
  seq.imu = synth::synth_tight_imu(skeleton(), motion.frames, synth::MountingSpec::standard(skeleton()), motion.dt());
  seq.flex = synth::synth_flex(skeleton(), motion.frames, {180.0 / std::numbers::pi, 0.0});
  return seq;
}

PfpConfig small_config(std::size_t hidden = 8, std::size_t layers = 2) {
  PfpConfig c;
  c.hidden = hidden;
  c.layers = layers;
  return c;
}

nn::Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  nn::Tensor t = nn::Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

}  // namespace

TEST(PfpModel, OutputShapesAndJointOrder) {
  PfpModel model(small_config(), skeleton(), 1);
  auto state = model.zero_state(3);
  const auto out = model.infer_step(random_tensor(3, 36, 2), random_tensor(3, 2, 3), state);
  EXPECT_EQ(out.theta.rows(), 3u);
  EXPECT_EQ(out.theta.cols(), 30u);
  EXPECT_EQ(out.p.cols(), 33u);

  nn::Tensor elbow = nn::Tensor::matrix(1, 6), other = nn::Tensor::matrix(1, 24);
  for (std::size_t c = 0; c < 6; ++c) elbow[c] = 100 + c;
  for (std::size_t c = 0; c < 24; ++c) other[c] = c;
  const auto theta = assemble_theta(elbow, other);
  const auto pose = to_output(theta, nn::Tensor::matrix(1, 33)).pose;
  EXPECT_EQ(pose.theta[kin::kJointLeftElbow], kin::Vec3(100, 101, 102));
  EXPECT_EQ(pose.theta[kin::kJointRightElbow], kin::Vec3(103, 104, 105));
  EXPECT_EQ(pose.theta[kin::kJointHead], kin::Vec3(21, 22, 23));
  EXPECT_EQ(pose.theta[kin::kJointRightShoulder], kin::Vec3(18, 19, 20));
}

TEST(PfpModel, ZeroParametersGiveFiniteOutput) {
  PfpModel model(small_config(), skeleton(), 1);
  for (nn::Parameter* p : model.parameters()) p->value.fill(0.0);
  PfpStream stream(model);
  const auto seq = make_sequence(5, 20);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto out = stream.push(seq.imu[k], seq.flex[k]);
    for (const auto& r : out.pose.theta) EXPECT_TRUE(r.allFinite());
    for (const auto& p : out.positions) EXPECT_TRUE(p.allFinite());
  }
}

TEST(PfpModel, StreamingMatchesBatchedSequenceEvaluation) {
  PfpModel model(small_config(16), skeleton(), 7);
  std::vector<PfpSequence> seqs = {make_sequence(10, 50), make_sequence(11, 50), make_sequence(12, 50)};
  fit_normalizers(model, seqs);
  // Batched: all three sequences advance together.
  auto state = model.zero_state(3);
  std::vector<std::vector<PfpOutput>> batched(3);
  for (std::size_t k = 0; k < 50; ++k) {
    nn::Tensor imu = nn::Tensor::matrix(3, 36), flex = nn::Tensor::matrix(3, 2);
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t c = 0; c < 36; ++c) imu(b, c) = seqs[b].imu[k].ch[c];
      flex(b, 0) = seqs[b].flex[k].left;
      flex(b, 1) = seqs[b].flex[k].right;
    }
    const auto step = model.infer_step(model.normalize_imu(imu), model.normalize_flex(flex), state);
    for (std::size_t b = 0; b < 3; ++b) batched[b].push_back(to_output(step.theta, step.p, b));
  }
  for (std::size_t b = 0; b < 3; ++b) {
    const auto streamed = run_sequence(model, seqs[b]);
    for (std::size_t k = 0; k < 50; ++k) {
      for (std::size_t j = 0; j < kin::kNumJoints; ++j) ASSERT_EQ(streamed[k].pose.theta[j], batched[b][k].pose.theta[j]);
      for (std::size_t n = 0; n < kin::kNumPositions; ++n) ASSERT_EQ(streamed[k].positions[n], batched[b][k].positions[n]);
    }
  }
  // Same stream twice gives the same outputs.
  const auto again = run_sequence(model, seqs[0]);
  const auto first = run_sequence(model, seqs[0]);
  for (std::size_t k = 0; k < 50; ++k) EXPECT_EQ(again[k].pose.theta[3], first[k].pose.theta[3]);
}

TEST(PfpModel, GraphStepMatchesInference) {
  PfpModel model(small_config(8), skeleton(), 3);
  const auto imu = random_tensor(2, 36, 4), flex = random_tensor(2, 2, 5);
  auto state = model.zero_state(2);
  nn::Graph g;
  auto gs = model.graph_state(g, model.zero_state(2));
  for (int t = 0; t < 3; ++t) {
    const auto inf = model.infer_step(imu, flex, state);
    const auto gr = model.step(g, g.constant(imu), g.constant(flex), gs);
    for (std::size_t i = 0; i < inf.theta.size(); ++i) EXPECT_NEAR(g.value(gr.theta)[i], inf.theta[i], 1e-12);
    for (std::size_t i = 0; i < inf.p.size(); ++i) EXPECT_NEAR(g.value(gr.p)[i], inf.p[i], 1e-12);
  }
}

TEST(PfpModel, NonFiniteFrameRejectedWithoutStateChange) {
  PfpModel model(small_config(), skeleton(), 1);
  const auto seq = make_sequence(3, 10);
  PfpStream a(model), b(model);
  a.push(seq.imu[0], seq.flex[0]);
  b.push(seq.imu[0], seq.flex[0]);
  auto bad = seq.imu[1];
  bad.ch[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(a.push(bad, seq.flex[1]), NumericError);
  EXPECT_THROW(a.push(seq.imu[1], {std::numeric_limits<float>::infinity(), 0.0f}), NumericError);
  EXPECT_EQ(a.push(seq.imu[1], seq.flex[1]).pose.theta[0], b.push(seq.imu[1], seq.flex[1]).pose.theta[0]);
}

TEST(PfpModel, CheckpointRoundTrip) {
  PfpModel model(small_config(), skeleton(), 9);
  const std::vector<PfpSequence> seqs = {make_sequence(1, 30)};
  fit_normalizers(model, seqs);
  const auto path = std::filesystem::temp_directory_path() / "flexpose_pfp_test.ckpt";
  save_pfp(path, model, 9);
  const PfpModel loaded = load_pfp(path);
  std::filesystem::remove(path);
  EXPECT_EQ(loaded.config().hidden, model.config().hidden);
  const auto a = run_sequence(model, seqs[0]), b = run_sequence(loaded, seqs[0]);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].pose.theta[7], b[k].pose.theta[7]);
}

TEST(PfpLoss, PerfectPredictionIsZero) {
  const auto seq = make_sequence(4, 5);
  nn::Tensor theta = nn::Tensor::matrix(5, 30), p = nn::Tensor::matrix(5, 33);
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t j = 0; j < 10; ++j)
      for (int a = 0; a < 3; ++a) theta(k, 3 * j + a) = seq.poses[k].theta[j][a];
    const auto e = kin::fk(skeleton(), seq.poses[k]);
    for (std::size_t n = 1; n < 12; ++n)
      for (int a = 0; a < 3; ++a) p(k, 3 * (n - 1) + a) = e.position[n][a];
  }
  const auto flexion = elbow_flexion_values(elbow_columns(theta), skeleton());
  for (std::size_t k = 0; k < 5; ++k) {
    const auto f = kin::elbow_flexion(skeleton(), seq.poses[k]);
    EXPECT_NEAR(flexion(k, 0), f.left, 1e-9);
    EXPECT_NEAR(flexion(k, 1), f.right, 1e-9);
  }
  nn::Graph g;
  const auto terms = pfp_loss(g, g.constant(theta), g.constant(p), theta, p, flexion, skeleton(), {});
  EXPECT_DOUBLE_EQ(g.value(terms.total)[0], 0.0);
  EXPECT_DOUBLE_EQ(g.value(terms.position)[0], 0.0);
  EXPECT_DOUBLE_EQ(g.value(terms.rotation)[0], 0.0);
  EXPECT_DOUBLE_EQ(g.value(terms.elbow)[0], 0.0);
}

TEST(PfpLoss, SinglePositionCoordinateError) {
  nn::Tensor theta = nn::Tensor::matrix(1, 30), p = nn::Tensor::matrix(1, 33);
  theta[21 + 1] = 0.8;  // bent left elbow, away from the straight-arm singularity
  const auto flexion = elbow_flexion_values(elbow_columns(theta), skeleton());
  nn::Tensor p_hat = p;
  p_hat[17] += 0.1;
  nn::Graph g;
  const auto terms = pfp_loss(g, g.constant(theta), g.constant(p_hat), theta, p, flexion, skeleton(), {});
  EXPECT_NEAR(g.value(terms.position)[0], 0.01 / 33.0, 1e-15);
  EXPECT_NEAR(g.value(terms.total)[0], 4.0 * 0.01 / 33.0, 1e-15);
  EXPECT_DOUBLE_EQ(LossWeights{}.position, 4.0);
  EXPECT_DOUBLE_EQ(LossWeights{}.rotation, 1.0);
  EXPECT_DOUBLE_EQ(LossWeights{}.elbow, 0.1);
}

TEST(PfpLoss, ElbowFlexionGradientMatchesFiniteDifferences) {
  // Bent elbows with off-axis components, away from the zero-angle singularity.
  nn::Parameter theta("theta", nn::Tensor::from_rows({{0.1, -0.9, 0.2, -0.15, 1.1, 0.05},
                                                      {0.3, -0.4, -0.1, 0.2, 0.7, -0.3}}));
  const nn::Tensor target = nn::Tensor::from_rows({{0.5, 1.3}, {0.2, 0.4}});
  const double err = test_support::gradient_check({&theta}, [&](nn::Graph& g) {
    return g.mse(elbow_flexion_op(g, g.param(theta), skeleton()), g.constant(target));
  });
  EXPECT_LT(err, 1e-3);
}

TEST(PfpLoss, FullModelGradientCheck) {
  PfpModel model(small_config(4, 2), skeleton(), 21);
  const auto imu = random_tensor(2, 36, 1), flex = random_tensor(2, 2, 2);
  nn::Tensor gt_theta = random_tensor(2, 30, 3, 0.5), gt_p = random_tensor(2, 33, 4, 0.5);
  for (std::size_t r = 0; r < 2; ++r) gt_theta(r, 22) = 1.0;
  const auto gt_flex = elbow_flexion_values(elbow_columns(gt_theta), skeleton());
  const double err = test_support::gradient_check(model.parameters(), [&](nn::Graph& g) {
    auto state = model.graph_state(g, model.zero_state(2));
    nn::Var total;
    for (int t = 0; t < 2; ++t) {
      const auto out = model.step(g, g.constant(imu), g.constant(flex), state);
      // Offset the elbow outputs so the flexion stays away from zero.
      const nn::Tensor shift = [] {
        nn::Tensor s = nn::Tensor::matrix(2, 30);
        s(0, 22) = s(1, 22) = 0.9;
        s(0, 25) = s(1, 25) = -0.9;
        return s;
      }();
      const nn::Var theta = g.add(out.theta, g.constant(shift));
      const auto terms = pfp_loss(g, theta, out.p, gt_theta, gt_p, gt_flex, skeleton(), {});
      total = t == 0 ? terms.total : g.add(total, terms.total);
    }
    return total;
  });
  EXPECT_LT(err, 1e-3);
}

TEST(PfpTrain, DivergenceRestoresLastFiniteParameters) {
  PfpModel model(small_config(), skeleton(), 4);
  std::vector<PfpSequence> seqs = {make_sequence(1, 30)};
  // The head joint has no positional effect, so normalizer fitting stays finite.
  seqs[0].poses[10].theta[kin::kJointHead].x() = std::numeric_limits<double>::quiet_NaN();
  std::vector<nn::Tensor> before;
  for (const nn::Parameter* p : model.parameters()) before.push_back(p->value);
  PfpTrainOptions opt;
  opt.iterations = 3;
  opt.batch = 2;
  opt.subsequence = 30;
  EXPECT_THROW(train_pfp(model, seqs, opt, 1), TrainingError);
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(params[i]->value, before[i]);
}

TEST(PfpTrain, SixteenSequenceOverfitProbe) {
  std::vector<PfpSequence> seqs;
  for (std::uint64_t s = 0; s < 16; ++s) seqs.push_back(make_sequence(100 + s, 24));
  PfpModel model(small_config(48, 2), skeleton(), 5);
  PfpTrainOptions opt;
  opt.iterations = 1500;
  opt.batch = 16;
  opt.subsequence = 24;
  opt.learning_rate = 3e-3;
  opt.weight_decay = 0.0;
  const auto start = std::chrono::steady_clock::now();
  const auto report = train_pfp(model, seqs, opt, 6);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("overfit probe: initial %.4g final %.4g (%.1f s)\n", report.initial_loss(), report.total.back(), secs);
  EXPECT_LT(report.total.back(), 1e-3);
  EXPECT_LT(report.final_loss(), report.initial_loss());
}
