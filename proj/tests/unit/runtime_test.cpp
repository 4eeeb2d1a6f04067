// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "flexpose/error.hpp"
#include "flexpose/pfp/train.hpp"
#include "flexpose/pipeline/experiment.hpp"
#include "flexpose/runtime/queue.hpp"
#include "flexpose/runtime/session.hpp"
#include "flexpose/runtime/stream.hpp"
#include "flexpose/runtime/wire.hpp"

using namespace flexpose;
using namespace flexpose::runtime;

namespace {

WireFrame random_frame(std::mt19937_64& rng) {
  WireFrame f;
  f.id = rng();
  f.timestamp_us = rng();
  for (float& v : f.imu.ch) v = std::bit_cast<float>(static_cast<std::uint32_t>(rng() & 0x7f7fffffu));
  f.flex.left = std::bit_cast<float>(static_cast<std::uint32_t>(rng() & 0xbf7fffffu));
  f.flex.right = -1.5f;
  return f;
}

const kin::Skeleton& skeleton() {
  static const kin::Skeleton sk = kin::Skeleton::upper_body(1.75);
  return sk;
}

pipeline::SynthConfig synth_config(std::size_t motion_frames) {
  pipeline::SynthConfig c;
  c.motion_frames = motion_frames;
  return c;
}

struct Fixture {
  pipeline::SynthConfig cfg;
  pipeline::Recording rec;
  pfp::PfpModel model;
  std::vector<WireFrame> frames;
};

Fixture make_fixture(std::size_t motion_frames, std::uint64_t seed) {
  Fixture fx;
  fx.cfg = synth_config(motion_frames);
  fx.rec = pipeline::synth_recording(fx.cfg, skeleton(), synth::MotionStyle::kFree, seed, "rt");
  pfp::PfpConfig pc;
  pc.hidden = 16;
  pc.layers = 2;
  fx.model = pfp::PfpModel(pc, skeleton(), seed);
  const auto seq = pipeline::to_pfp_sequence(fx.rec, pipeline::ImuSource::kLoose, pipeline::plan_for(fx.cfg));
  pfp::fit_normalizers(fx.model, std::span(&seq, 1));
  fx.frames = make_frames(fx.rec.loose, fx.rec.flex_raw, fx.cfg.fps, 1000);
  return fx;
}

SessionOptions session_options(const pipeline::SynthConfig& cfg) {
  SessionOptions o;
  o.plan = pipeline::plan_for(cfg);
  return o;
}

std::vector<PoseRecord> offline_records(const Fixture& fx) {
  const auto seq = pipeline::to_pfp_sequence(fx.rec, pipeline::ImuSource::kLoose, pipeline::plan_for(fx.cfg));
  const auto out = pfp::run_batch(fx.model, std::span(&seq, 1))[0];
  std::vector<PoseRecord> r;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& f = fx.frames[fx.rec.calibration_frames + k];
    r.push_back(to_record(f.id, f.timestamp_us, out[k]));
  }
  return r;
}

}  // namespace

TEST(Wire, RoundTripRandomFrames) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto f = random_frame(rng);
    const auto bytes = encode_frame(f);
    EXPECT_EQ(decode_frame(bytes), f);
    EXPECT_EQ(encode_frame(decode_frame(bytes)), bytes);
  }
}

TEST(Wire, BoundaryValuesAreByteExact) {
  WireFrame f;
  f.id = std::numeric_limits<std::uint64_t>::max();
  f.timestamp_us = 0;
  f.imu.ch.fill(std::numeric_limits<float>::max());
  f.imu.ch[3] = std::numeric_limits<float>::lowest();
  f.imu.ch[4] = std::numeric_limits<float>::denorm_min();
  f.flex = {0.0f, -0.0f};
  const auto bytes = encode_frame(f);
  const auto back = decode_frame(bytes);
  EXPECT_EQ(back.id, f.id);
  EXPECT_EQ(encode_frame(back), bytes);
  EXPECT_TRUE(std::signbit(back.flex.right));
  // Little-endian layout of the id field.
  for (int i = 4; i < 12; ++i) EXPECT_EQ(bytes[i], 0xff);
  // NaN payloads survive too.
  auto raw = bytes;
  raw[20] = 0x01; raw[21] = 0x00; raw[22] = 0xc0; raw[23] = 0x7f;
  EXPECT_EQ(encode_frame(decode_frame(raw)), raw);
}

TEST(Wire, RejectsBadMagicAndShortRead) {
  auto bytes = encode_frame(WireFrame{});
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_frame(bad), ProtocolError);
  EXPECT_THROW(decode_frame(std::span(bytes).first(171)), ProtocolError);
}

TEST(Wire, ZeroPayloadDecodesToZeroSensors) {
  WireBytes bytes{};
  std::copy(kWireMagic.begin(), kWireMagic.end(), bytes.begin());
  const auto f = decode_frame(bytes);
  EXPECT_EQ(f.id, 0u);
  EXPECT_EQ(f.timestamp_us, 0u);
  for (float v : f.imu.ch) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(f.flex.left, 0.0f);
  EXPECT_EQ(f.flex.right, 0.0f);
}

TEST(Queue, DropOldestKeepsNewest) {
  BoundedQueue<int> q(3, OverflowPolicy::kDropOldest);
  for (int i = 0; i < 5; ++i) q.push(i);
  q.close();
  EXPECT_EQ(q.dropped(), 2u);
  EXPECT_EQ(*q.pop(), 2);
  EXPECT_EQ(*q.pop(), 3);
  EXPECT_EQ(*q.pop(), 4);
  EXPECT_FALSE(q.pop());
}

TEST(Session, OnlineEqualsOfflineBatch) {
  const auto fx = make_fixture(300, 3);
  Session session(fx.model, session_options(fx.cfg));
  std::vector<PoseRecord> online;
  for (const auto& f : fx.frames) {
    auto r = session.push(f);
    if (r.pose) online.push_back(*r.pose);
  }
  EXPECT_EQ(session.phase(), Phase::kRunning);
  const auto offline = offline_records(fx);
  ASSERT_EQ(online.size(), offline.size());
  for (std::size_t k = 0; k < online.size(); ++k) ASSERT_EQ(online[k], offline[k]) << "frame " << k;
}

TEST(Session, PhasesAdvanceInOrder) {
  const auto fx = make_fixture(10, 4);
  auto opt = session_options(fx.cfg);
  opt.auto_start = false;
  Session session(fx.model, opt);
  EXPECT_EQ(session.push(fx.frames[0]).event, Session::Event::kIgnored);
  session.start();
  std::vector<Phase> seen;
  for (std::size_t k = 1; k < fx.frames.size(); ++k) {
    session.push(fx.frames[k]);
    if (seen.empty() || seen.back() != session.phase()) seen.push_back(session.phase());
  }
  const std::vector<Phase> expected = {Phase::kTposeCalibrating, Phase::kElbowCalibrating, Phase::kRunning};
  EXPECT_EQ(seen, expected);
}

TEST(Session, OutOfOrderFrameIsSkipped) {
  const auto fx = make_fixture(60, 5);
  Session session(fx.model, session_options(fx.cfg));
  std::size_t poses = 0;
  for (std::size_t k = 0; k < fx.frames.size(); ++k) {
    if (session.push(fx.frames[k]).pose) ++poses;
    if (k == fx.frames.size() - 20) {
      const auto r = session.push(fx.frames[k - 3]);
      EXPECT_EQ(r.event, Session::Event::kSkipped);
      EXPECT_EQ(session.phase(), Phase::kRunning);
    }
  }
  EXPECT_EQ(poses, 60u);
  EXPECT_EQ(session.skipped(), 1u);
}

TEST(Session, UnstableTposeReturnsToIdle) {
  auto fx = make_fixture(10, 6);
  const kin::Mat3 kick = kin::to_matrix(kin::AxisAngle{kin::Vec3(0.0, 0.2, 0.0)});
  fx.frames[100].imu.set_orientation(2, kin::Mat3(kick * fx.frames[100].imu.rotation(2)));
  auto opt = session_options(fx.cfg);
  opt.auto_start = false;
  Session session(fx.model, opt);
  session.start();
  Session::Result last;
  for (std::size_t k = 0; k < opt.plan.tpose_frames(); ++k) last = session.push(fx.frames[k]);
  EXPECT_EQ(last.event, Session::Event::kFailed);
  EXPECT_EQ(session.phase(), Phase::kIdle);
  EXPECT_NE(session.last_failure().find("unstable"), std::string::npos);
}

TEST(Session, DegenerateFlexWindowReturnsToIdle) {
  auto fx = make_fixture(10, 7);
  auto opt = session_options(fx.cfg);
  for (std::size_t k = opt.plan.tpose_frames(); k < opt.plan.total_frames(); ++k) fx.frames[k].flex = {0.3f, 0.3f};
  opt.auto_start = false;
  Session session(fx.model, opt);
  session.start();
  Session::Result last;
  for (std::size_t k = 0; k < opt.plan.total_frames(); ++k) last = session.push(fx.frames[k]);
  EXPECT_EQ(last.event, Session::Event::kFailed);
  EXPECT_EQ(session.phase(), Phase::kIdle);
}

TEST(Session, StrictModeRefusesImuOnly) {
  const auto fx = make_fixture(10, 8);
  auto opt = session_options(fx.cfg);
  opt.calibrate_flex = false;
  opt.auto_start = false;
  {
    Session session(fx.model, opt);
    session.start();
    for (std::size_t k = 0; k < opt.plan.tpose_frames(); ++k) session.push(fx.frames[k]);
    EXPECT_EQ(session.phase(), Phase::kIdle);
  }
  opt.allow_imu_only = true;
  Session session(fx.model, opt);
  session.start();
  for (std::size_t k = 0; k < opt.plan.tpose_frames(); ++k) session.push(fx.frames[k]);
  EXPECT_EQ(session.phase(), Phase::kRunning);
  EXPECT_FALSE(session.calibration().flex.has_value());
  EXPECT_TRUE(session.push(fx.frames[opt.plan.tpose_frames()]).pose.has_value());
}

TEST(Stream, SixtySecondsGiveExactlyThirtySixHundredPoses) {
  const auto fx = make_fixture(3600, 9);
  const auto path = std::filesystem::temp_directory_path() / "flexpose_rt_session.fxs";
  write_session_file(path, fx.frames);
  EXPECT_EQ(read_session_file(path), fx.frames);
  FileReplaySource src(path);
  StreamOptions opt;
  opt.session = session_options(fx.cfg);
  std::vector<PoseRecord> got;
  const auto stats = run_stream(src, fx.model, opt, [&](const PoseRecord& r) { got.push_back(r); });
  EXPECT_EQ(stats.poses_out, 3600u);
  EXPECT_EQ(stats.dropped, 0u);
  EXPECT_EQ(got.size(), 3600u);
  EXPECT_EQ(got, offline_records(fx));
  std::filesystem::remove(path);
}

TEST(Stream, TcpSourceDeliversAllFrames) {
  const auto fx = make_fixture(120, 10);
  TcpSource src(0);
  std::thread client([&] { send_frames("127.0.0.1", src.port(), fx.frames); });
  StreamOptions opt;
  opt.session = session_options(fx.cfg);
  opt.buffer_seconds = 1e6;  // no drops for this check
  std::vector<PoseRecord> got;
  const auto stats = run_stream(src, fx.model, opt, [&](const PoseRecord& r) { got.push_back(r); });
  client.join();
  EXPECT_EQ(stats.frames_in, fx.frames.size());
  EXPECT_EQ(got, offline_records(fx));
}

TEST(PoseOutput, TextAndBinaryMirror) {
  const auto fx = make_fixture(30, 11);
  const auto records = offline_records(fx);
  const auto dir = std::filesystem::temp_directory_path();
  {
    PoseWriter w(dir / "flexpose_poses.txt", dir / "flexpose_poses.bin");
    for (const auto& r : records) w.write(r);
    w.flush();
  }
  EXPECT_EQ(read_pose_binary(dir / "flexpose_poses.bin"), records);
  std::ifstream in(dir / "flexpose_poses.txt");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::uint64_t id = 0;
    ss >> id;
    EXPECT_EQ(id, records[lines].id);
    double v = 0;
    std::size_t n = 0;
    while (ss >> v) {
      EXPECT_EQ(v, n < 30 ? records[lines].theta[n] : records[lines].position[n - 30]);
      ++n;
    }
    EXPECT_EQ(n, 63u);
    ++lines;
  }
  EXPECT_EQ(lines, records.size());
}
