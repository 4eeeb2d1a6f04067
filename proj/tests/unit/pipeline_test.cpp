// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "flexpose/error.hpp"
#include "flexpose/pipeline/dataset.hpp"
#include "flexpose/pipeline/experiment.hpp"
#include "flexpose/runtime/calibration.hpp"

using namespace flexpose;
using kin::Mat3;
using kin::Vec3;

namespace {

Mat3 rot(const Vec3& v) { return kin::to_matrix(kin::AxisAngle{v}); }

std::vector<synth::ImuFrame> constant_stream(const std::array<Mat3, synth::kNumImus>& r, std::size_t n) {
  synth::ImuFrame f;
  for (std::size_t i = 0; i < synth::kNumImus; ++i) {
    f.set_orientation(i, r[i]);
    f.set_acceleration(i, Vec3(0.1 * i, -0.2, 0.3));
  }
  return std::vector<synth::ImuFrame>(n, f);
}

pipeline::SynthConfig small_synth() {
  pipeline::SynthConfig c;
  c.motion_frames = 240;
  return c;
}

const kin::Skeleton& skeleton() {
  static const kin::Skeleton sk = kin::Skeleton::upper_body(1.75);
  return sk;
}

}  // namespace

TEST(TposeCalibration, ConstantOrientationGivesInverseReference) {
  std::array<Mat3, synth::kNumImus> r;
  for (std::size_t i = 0; i < synth::kNumImus; ++i) r[i] = rot(Vec3(0.3 * i, -0.5, 0.2 + 0.1 * i));
  const auto frames = constant_stream(r, 300);
  const auto refs = runtime::tpose_calibrate(frames, 60.0);
  for (std::size_t i = 0; i < synth::kNumImus; ++i) {
    EXPECT_LT((refs.ref[i] - r[i].transpose()).norm(), 1e-6);
    const auto n = runtime::normalize_frame(frames[7], refs);
    EXPECT_LT(kin::geodesic_angle_deg(n.rotation(i), Mat3::Identity()), 1e-4);
    EXPECT_EQ(n.acceleration(i), frames[7].acceleration(i));
  }
}

TEST(TposeCalibration, NoisyTposeNormalizesBelowOneDegree) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.002);
  std::array<Mat3, synth::kNumImus> r;
  for (std::size_t i = 0; i < synth::kNumImus; ++i) r[i] = rot(Vec3(1.0, 0.2 * i, -0.4));
  auto frames = constant_stream(r, 300);
  for (auto& f : frames)
    for (std::size_t i = 0; i < synth::kNumImus; ++i)
      f.set_orientation(i, Mat3(rot(Vec3(noise(rng), noise(rng), noise(rng))) * r[i]));
  const auto refs = runtime::tpose_calibrate(frames, 60.0);
  for (const auto& f : frames) {
    const auto n = runtime::normalize_frame(f, refs);
    for (std::size_t i = 0; i < synth::kNumImus; ++i)
      EXPECT_LT(kin::geodesic_angle_deg(n.rotation(i), Mat3::Identity()), 1.0);
  }
}

TEST(TposeCalibration, RejectsUnstableOrShortWindow) {
  std::array<Mat3, synth::kNumImus> r;
  r.fill(Mat3::Identity());
  auto frames = constant_stream(r, 300);
  EXPECT_THROW(runtime::tpose_calibrate(std::span(frames).first(200), 60.0), CalibrationError);
  frames[150].set_orientation(2, rot(Vec3(0.0, 0.0, 0.12)));  // about 6.9 degrees
  EXPECT_THROW(runtime::tpose_calibrate(frames, 60.0), CalibrationError);
  frames[150].set_orientation(2, rot(Vec3(0.0, 0.0, 0.07)));  // about 4 degrees
  EXPECT_NO_THROW(runtime::tpose_calibrate(frames, 60.0));
}

TEST(Session, PrepareInputWithoutFlexCalibrationZeroesFlex) {
  runtime::SessionCalibration cal;
  std::array<Mat3, synth::kNumImus> r;
  r.fill(Mat3::Identity());
  const auto f = constant_stream(r, 1)[0];
  const auto in = runtime::prepare_input(f, {0.4f, 0.7f}, cal);
  EXPECT_EQ(in.flex_deg.left, 0.0f);
  EXPECT_EQ(in.flex_deg.right, 0.0f);
}

TEST(Dataset, RecordingLayoutAndDeterminism) {
  const auto cfg = small_synth();
  const auto a = pipeline::synth_recording(cfg, skeleton(), synth::MotionStyle::kBoxing, 11, "a");
  const auto b = pipeline::synth_recording(cfg, skeleton(), synth::MotionStyle::kBoxing, 11, "a");
  EXPECT_EQ(a.size(), cfg.calibration_frames() + cfg.motion_frames);
  EXPECT_EQ(a.calibration_frames, 360u);
  EXPECT_EQ(a.tight, b.tight);
  EXPECT_EQ(a.loose, b.loose);
  EXPECT_EQ(a.flex_raw, b.flex_raw);
  EXPECT_NE(a.tight, a.loose);
  // The motion starts from the rest pose.
  for (const auto& r : a.poses[a.calibration_frames].theta) EXPECT_EQ(r.norm(), 0.0);
}

TEST(TposeCalibration, SyntheticLooseTposeNormalizesBelowOneDegree) {
  const auto cfg = small_synth();
  const auto rec = pipeline::synth_recording(cfg, skeleton(), synth::MotionStyle::kWalking, 21, "tp");
  const std::size_t n = 300;
  const auto refs = runtime::tpose_calibrate(std::span(rec.loose).first(n), 60.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto f = runtime::normalize_frame(rec.loose[k], refs);
    for (std::size_t i = 0; i < synth::kNumImus; ++i)
      EXPECT_LT(kin::geodesic_angle_deg(f.rotation(i), Mat3::Identity()), 1.0);
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto cfg = small_synth();
  const auto recs = pipeline::synth_recordings(cfg, skeleton(), 2, 40, "rt");
  const auto dir = std::filesystem::temp_directory_path() / "flexpose_dataset_rt";
  std::filesystem::remove_all(dir);
  pipeline::save_dataset(dir, recs, cfg, skeleton());
  const auto ds = pipeline::load_dataset(dir);
  ASSERT_EQ(ds.recordings.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& x = ds.recordings[i];
    EXPECT_EQ(x.name, recs[i].name);
    EXPECT_EQ(x.tight, recs[i].tight);
    EXPECT_EQ(x.loose, recs[i].loose);
    EXPECT_EQ(x.flex_raw, recs[i].flex_raw);
    for (std::size_t k = 0; k < x.size(); ++k)
      for (std::size_t j = 0; j < kin::kNumJoints; ++j) EXPECT_EQ(x.poses[k].theta[j], recs[i].poses[k].theta[j]);
  }
  EXPECT_EQ(ds.config.motion_frames, cfg.motion_frames);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, MalformedCsvIsRejected) {
  const auto path = std::filesystem::temp_directory_path() / "flexpose_bad_flex.csv";
  {
    std::ofstream out(path);
    out << "left,right\n0.1,0.2\n0.3\n";
  }
  EXPECT_THROW(pipeline::read_flex_csv(path), IoError);
  std::filesystem::remove(path);
}

TEST(Experiment, TightSequenceIsCalibrated) {
  const auto cfg = small_synth();
  const auto rec = pipeline::synth_recording(cfg, skeleton(), synth::MotionStyle::kFree, 5, "t");
  const auto plan = pipeline::plan_for(cfg);
  const auto seq = pipeline::to_pfp_sequence(rec, pipeline::ImuSource::kTight, plan);
  EXPECT_EQ(seq.size(), cfg.motion_frames);
  // First motion frame is the rest pose: normalized orientations are identity
  // and calibrated flex is near zero degrees.
  for (std::size_t i = 0; i < synth::kNumImus; ++i)
    EXPECT_LT(kin::geodesic_angle_deg(seq.imu[0].rotation(i), Mat3::Identity()), 1e-3);
  EXPECT_NEAR(seq.flex[0].left, 0.0, 1.0);
  EXPECT_NEAR(seq.flex[0].right, 0.0, 1.0);
  // Calibrated flex tracks the true flexion despite the wear distortion.
  const auto truth = synth::synth_flex(skeleton(), seq.poses, {180.0 / M_PI, 0.0});
  for (std::size_t k = 0; k < seq.size(); k += 17) {
    EXPECT_NEAR(seq.flex[k].left, truth[k].left, 3.0);
    EXPECT_NEAR(seq.flex[k].right, truth[k].right, 3.0);
  }
}

TEST(Experiment, DisplacementWindowsReproduceLoose) {
  const auto cfg = small_synth();
  const auto recs = pipeline::synth_recordings(cfg, skeleton(), 2, 60, "d");
  const auto w = pipeline::displacement_windows(recs, 60, 60);
  EXPECT_EQ(w.size(), 8u);
  const auto disp = dldm::concat_windows(std::span(w).first(4), 240);
  const auto loose = synth::apply_displacement(std::span(recs[0].tight).subspan(360), disp);
  for (std::size_t k = 0; k < 240; ++k) EXPECT_EQ(loose[k], recs[0].loose[360 + k]);
}

TEST(Experiment, AugmentedSequenceIsDeterministic) {
  const auto cfg = small_synth();
  const auto recs = pipeline::synth_recordings(cfg, skeleton(), 2, 80, "g");
  dldm::DldmConfig dc;
  dc.vae.window = 8;
  dc.vae.latent = 4;
  dc.vae.hidden = 16;
  dc.denoiser.hidden = 32;
  dc.denoiser.time_dim = 8;
  dc.diffusion_steps = 10;
  dc.vae_train = {5, 8, 1e-3, 1.0};
  dc.ldm_train = {5, 16, 1e-3, 1.0};
  dldm::DldmModel model(dc, 1);
  const auto windows = pipeline::displacement_windows(recs, 8, 8);
  dldm::train_vae(model, windows, 2);
  dldm::train_ldm(model, windows, 3);
  const auto plan = pipeline::plan_for(cfg);
  const auto a = pipeline::augmented_sequence(recs[0], model, 9, plan);
  const auto b = pipeline::augmented_sequence(recs[0], model, 9, plan);
  const auto tight = pipeline::to_pfp_sequence(recs[0], pipeline::ImuSource::kTight, plan);
  EXPECT_EQ(a.imu, b.imu);
  EXPECT_EQ(a.size(), tight.size());
  EXPECT_NE(a.imu, tight.imu);
  EXPECT_EQ(a.flex, tight.flex);
}
