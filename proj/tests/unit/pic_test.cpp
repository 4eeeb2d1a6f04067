// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "flexpose/error.hpp"
#include "flexpose/pic/calibrator.hpp"
#include "flexpose/synth/motion.hpp"

using namespace flexpose;
using namespace flexpose::pic;

namespace {

std::vector<double> ramp(double from, double to, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = from + (to - from) * k / static_cast<double>(n - 1);
  return v;
}

}  // namespace

TEST(Percentile, MatchesLinearInterpolationOracle) {
  const std::vector<double> v = {3.0, 1.0, 4.0, 1.0, 5.0};
  // Sorted 1 1 3 4 5; position q/100 * 4.
  EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(v, 50.0), 3.0);
  EXPECT_DOUBLE_EQ(percentile(v, 62.5), 3.5);
  EXPECT_DOUBLE_EQ(percentile(v, 100.0), 5.0);
  EXPECT_THROW(percentile({}, 50.0), LengthError);
}

TEST(CaptureRange, TrimmedRampEndpoints) {
  const auto r = capture_range(ramp(0.1, 0.7, 601), 60.0);
  EXPECT_NEAR(r.raw_min, 0.13, 1e-9);
  EXPECT_NEAR(r.raw_max, 0.67, 1e-9);
  EXPECT_EQ(r.target_min, 0.0);
  EXPECT_EQ(r.target_max, 90.0);
}

TEST(CaptureRange, ConstantSignalIsDegenerate) {
  const std::vector<double> flat(60, 0.4);
  EXPECT_THROW(capture_range(flat, 60.0), CalibrationError);
  // A span below 5% of full scale also counts as no bend.
  EXPECT_THROW(capture_range(ramp(0.4, 0.44, 60), 60.0), CalibrationError);
}

TEST(CaptureRange, WindowShorterThanOneSecondRejected) {
  EXPECT_THROW(capture_range(ramp(0.1, 0.7, 59), 60.0), CalibrationError);
  EXPECT_NO_THROW(capture_range(ramp(0.1, 0.7, 60), 60.0));
}

TEST(PicApply, Examples) {
  EXPECT_DOUBLE_EQ(pic_apply(37.0, {0.0, 90.0, 0.0, 90.0}), 37.0);
  const CalibrationRange r{0.1, 0.7, 0.0, 90.0};
  EXPECT_NEAR(pic_apply(0.25, r), 22.5, 1e-12);
  EXPECT_DOUBLE_EQ(pic_apply(0.1, r), 0.0);
  EXPECT_DOUBLE_EQ(pic_apply(0.7, r), 90.0);
  // Extrapolates instead of clamping.
  EXPECT_NEAR(pic_apply(0.8, r), 105.0, 1e-12);
  EXPECT_THROW(pic_apply(0.3, {0.5, 0.5, 0.0, 90.0}), CalibrationError);
}

TEST(PicApply, AffineDistortionIsRemovedExactly) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> gain(0.2, 5.0), offset(-2.0, 2.0), x(0.0, 1.6);
  const auto gesture = ramp(0.0, 1.5, 120);
  const CalibrationRange clean = capture_range(gesture, 60.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double g = gain(rng), b = offset(rng);
    std::vector<double> distorted(gesture.size());
    for (std::size_t k = 0; k < gesture.size(); ++k) distorted[k] = g * gesture[k] + b;
    PicConfig cfg;
    cfg.full_scale_span = g;
    const CalibrationRange worn = capture_range(distorted, 60.0, cfg);
    for (int s = 0; s < 20; ++s) {
      const double v = x(rng);
      EXPECT_NEAR(pic_apply(g * v + b, worn), pic_apply(v, clean), 1e-9);
    }
  }
}

TEST(PicApply, MonotoneAndIdempotent) {
  const CalibrationRange r{0.2, 0.9, 0.0, 90.0};
  double prev = -1e300;
  for (double raw = -1.0; raw < 2.0; raw += 0.01) {
    const double y = pic_apply(raw, r);
    EXPECT_GT(y, prev);
    prev = y;
  }
  const CalibrationRange id{0.0, 90.0, 0.0, 90.0};
  for (double deg = -10.0; deg < 120.0; deg += 3.3) EXPECT_DOUBLE_EQ(pic_apply(deg, id), deg);
}

TEST(ElbowCalibration, GestureRecoversPhysicalAngle) {
  const kin::Skeleton s = kin::Skeleton::upper_body();
  const auto seq = synth::generate_calibration_gesture(60.0, 0.0, 1.0);
  const auto clean = synth::synth_flex(s, seq.frames);
  const synth::WearDistortion left{0.6, 0.3, 0.0}, right{1.4, -0.2, 0.0};
  const auto worn = synth::inject_primary_flex_displacement(clean, left, right);
  const auto cal = capture_elbow_calibration(worn, 60.0);
  for (double rad : {0.0, 0.4, 1.0, 1.5707963267948966}) {
    const synth::FlexFrame raw{static_cast<float>(synth::apply_wear_distortion(rad, left)),
                               static_cast<float>(synth::apply_wear_distortion(rad, right))};
    const auto deg = pic_apply(raw, cal);
    EXPECT_NEAR(deg[0], rad * 180.0 / 3.141592653589793, 1e-3);
    EXPECT_NEAR(deg[1], rad * 180.0 / 3.141592653589793, 1e-3);
  }
}
