// SPDX-License-Identifier: Apache-2.0
#include "flexpose/synth/motion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "flexpose/error.hpp"

namespace flexpose::synth {

using kin::Vec3;

MotionStyle parse_motion_style(const std::string& name) {
  if (name == "walking") return MotionStyle::kWalking;
  if (name == "boxing") return MotionStyle::kBoxing;
  if (name == "free") return MotionStyle::kFree;
  throw ValidationError("unknown motion style '" + name + "'");
}

const char* motion_style_name(MotionStyle style) {
  switch (style) {
    case MotionStyle::kWalking: return "walking";
    case MotionStyle::kBoxing: return "boxing";
    case MotionStyle::kFree: return "free";
  }
  return "free";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kHarmonics = 2;

struct Wave {
  std::array<double, kHarmonics> amp{}, freq{}, phase{};
  double operator()(double t) const {
    double v = 0.0;
    for (int m = 0; m < kHarmonics; ++m) v += amp[m] * std::sin(kTwoPi * freq[m] * t + phase[m]);
    return v;
  }
};

struct StyleRanges {
  double f_lo, f_hi;
  double trunk_amp, neck_amp, head_amp, yaw_amp;
  double shoulder_amp;
  double elbow_center_lo, elbow_center_hi, elbow_amp_lo, elbow_amp_hi;
};

StyleRanges ranges_for(MotionStyle style) {
  switch (style) {
    case MotionStyle::kWalking: return {0.7, 1.3, 0.06, 0.12, 0.2, 0.35, 0.45, 0.3, 0.7, 0.15, 0.4};
    case MotionStyle::kBoxing: return {1.0, 2.5, 0.12, 0.15, 0.25, 0.4, 0.35, 1.0, 1.5, 0.6, 1.0};
    case MotionStyle::kFree: return {0.3, 2.0, 0.15, 0.2, 0.3, 0.6, 0.7, 0.3, 1.6, 0.3, 0.9};
  }
  return ranges_for(MotionStyle::kFree);
}

}  // namespace

PoseSequence generate_motion(MotionStyle style, std::size_t frames, double fps, std::uint64_t seed) {
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const StyleRanges r = ranges_for(style);

  auto make_wave = [&](double amp, double f_lo, double f_hi) {
    Wave w;
    const double split = uni(0.5, 0.8);
    w.amp = {amp * split * uni(0.6, 1.0), amp * (1.0 - split) * uni(0.6, 1.0)};
    for (int m = 0; m < kHarmonics; ++m) {
      w.freq[m] = uni(f_lo, f_hi) * (m + 1);
      w.phase[m] = uni(0.0, kTwoPi);
    }
    return w;
  };

  std::array<Vec3, kin::kNumJoints> base;
  base.fill(Vec3::Zero());
  std::array<std::array<Wave, 3>, kin::kNumJoints> waves{};
  auto set_waves = [&](std::size_t j, double amp, double f_lo, double f_hi) {
    for (auto& w : waves[j]) w = make_wave(amp, f_lo, f_hi);
  };

  // Pelvis: slow heading drift plus small tilt.
  set_waves(kin::kJointPelvis, r.trunk_amp, r.f_lo, r.f_hi);
  waves[kin::kJointPelvis][1] = make_wave(r.yaw_amp, 0.05, 0.3);
  for (auto j : {kin::kJointSpine1, kin::kJointSpine2, kin::kJointChest}) set_waves(j, r.trunk_amp, r.f_lo, r.f_hi);
  set_waves(kin::kJointNeck, r.neck_amp, r.f_lo * 0.5, r.f_hi);
  set_waves(kin::kJointHead, r.head_amp, r.f_lo * 0.5, r.f_hi);
  set_waves(kin::kJointLeftShoulder, r.shoulder_amp, r.f_lo, r.f_hi);
  set_waves(kin::kJointRightShoulder, r.shoulder_amp, r.f_lo, r.f_hi);

  switch (style) {
    case MotionStyle::kWalking:
      base[kin::kJointLeftShoulder] = Vec3(uni(-0.2, 0.2), uni(-0.2, 0.2), uni(-1.4, -1.1));
      base[kin::kJointRightShoulder] = Vec3(uni(-0.2, 0.2), uni(-0.2, 0.2), uni(1.1, 1.4));
      break;
    case MotionStyle::kBoxing:
      base[kin::kJointLeftShoulder] = Vec3(uni(-0.2, 0.2), uni(-1.3, -0.9), uni(-0.5, -0.1));
      base[kin::kJointRightShoulder] = Vec3(uni(-0.2, 0.2), uni(0.9, 1.3), uni(0.1, 0.5));
      break;
    case MotionStyle::kFree:
      base[kin::kJointLeftShoulder] = Vec3(uni(-0.6, 0.6), uni(-1.2, 0.6), uni(-1.3, 0.4));
      base[kin::kJointRightShoulder] = Vec3(uni(-0.6, 0.6), uni(-0.6, 1.2), uni(-0.4, 1.3));
      break;
  }

  std::array<double, 2> elbow_center{};
  std::array<Wave, 2> elbow_wave{};
  for (int side = 0; side < 2; ++side) {
    elbow_center[side] = uni(r.elbow_center_lo, r.elbow_center_hi);
    elbow_wave[side] = make_wave(uni(r.elbow_amp_lo, r.elbow_amp_hi), r.f_lo, r.f_hi);
  }

  PoseSequence seq;
  seq.fps = fps;
  seq.frames.resize(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k) / fps;
    auto& pose = seq.frames[k];
    for (std::size_t j = 0; j < kin::kNumJoints; ++j) {
      pose.theta[j] = base[j] + Vec3(waves[j][0](t), waves[j][1](t), waves[j][2](t));
    }
    const double fl = std::clamp(elbow_center[0] + elbow_wave[0](t), 0.0, 2.5);
    const double fr = std::clamp(elbow_center[1] + elbow_wave[1](t), 0.0, 2.5);
    pose.theta[kin::kJointLeftElbow] = fl * kin::kLeftElbowAxis;
    pose.theta[kin::kJointRightElbow] = fr * kin::kRightElbowAxis;
  }
  return seq;
}

PoseSequence generate_calibration_gesture(double fps, double tpose_seconds, double flex_seconds) {
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  const auto n_tpose = static_cast<std::size_t>(std::lround(tpose_seconds * fps));
  const auto n_flex = static_cast<std::size_t>(std::lround(flex_seconds * fps));
  PoseSequence seq;
  seq.fps = fps;
  seq.frames.assign(n_tpose + n_flex, kin::PoseFrame::identity());
  auto smooth = [](double x) { return x * x * (3.0 - 2.0 * x); };
  for (std::size_t k = 0; k < n_flex; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n_flex);
    double level = 0.0;
    if (u < 0.2) level = 0.0;
    else if (u < 0.45) level = smooth((u - 0.2) / 0.25);
    else if (u < 0.7) level = 1.0;
    else if (u < 0.95) level = 1.0 - smooth((u - 0.7) / 0.25);
    const double angle = level * std::numbers::pi / 2.0;
    auto& pose = seq.frames[n_tpose + k];
    pose.theta[kin::kJointLeftElbow] = angle * kin::kLeftElbowAxis;
    pose.theta[kin::kJointRightElbow] = angle * kin::kRightElbowAxis;
  }
  return seq;
}

void write_pose_csv(const std::filesystem::path& path, const PoseSequence& seq) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pose file " + path.string());
  for (std::size_t j = 0; j < kin::kNumJoints; ++j) {
    for (const char* axis : {"_x", "_y", "_z"}) {
      out << (j == 0 && axis[1] == 'x' ? "" : ",") << kin::kJointNames[j] << axis;
    }
  }
  out << "\n";
  char buf[32];
  for (const auto& pose : seq.frames) {
    std::string line;
    for (std::size_t j = 0; j < kin::kNumJoints; ++j) {
      for (int a = 0; a < 3; ++a) {
        if (j != 0 || a != 0) line += ',';
        auto res = std::to_chars(buf, buf + sizeof buf, pose.theta[j][a]);
        line.append(buf, res.ptr);
      }
    }
    out << line << "\n";
  }
  if (!out) throw IoError("failed writing pose file " + path.string());
}

PoseSequence read_pose_csv(const std::filesystem::path& path, double fps) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file " + path.string());
  PoseSequence seq;
  seq.fps = fps;
  std::string line;
  if (!std::getline(in, line)) throw IoError("pose file " + path.string() + " is empty");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 3 * kin::kNumJoints> v{};
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      if (count >= v.size()) { ++count; break; }
      auto res = std::from_chars(p, comma, v[count]);
      if (res.ec != std::errc() || res.ptr != comma) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number");
      }
      ++count;
      p = comma + 1;
    }
    if (count != v.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 30 columns");
    }
    kin::PoseFrame pose;
    for (std::size_t j = 0; j < kin::kNumJoints; ++j) pose.theta[j] = Vec3(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
    seq.frames.push_back(pose);
  }
  return seq;
}

}  // namespace flexpose::synth
