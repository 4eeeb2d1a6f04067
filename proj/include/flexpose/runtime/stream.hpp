// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flexpose/runtime/queue.hpp"
#include "flexpose/runtime/session.hpp"
#include "flexpose/runtime/wire.hpp"

namespace flexpose::runtime {

/// Produces wire frames until exhausted (nullopt).
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<WireFrame> next() = 0;
  /// Live sources cannot be slowed down, so the runner drops old frames
  /// rather than blocking them.
  virtual bool live() const = 0;
};

/// Session file: a plain concatenation of 172-byte wire frames.
void write_session_file(const std::filesystem::path& path, std::span<const WireFrame> frames);
std::vector<WireFrame> read_session_file(const std::filesystem::path& path);

/// Frames for a recorded stream, ids from first_id, timestamps at 1/fps.
std::vector<WireFrame> make_frames(std::span<const synth::ImuFrame> imu, std::span<const synth::FlexFrame> flex,
                                   double fps, std::uint64_t first_id = 0);

class FileReplaySource : public FrameSource {
 public:
  /// pace_fps > 0 releases frames on a wall-clock schedule and makes the
  /// source live; 0 replays as fast as the consumer accepts.
  explicit FileReplaySource(const std::filesystem::path& path, double pace_fps = 0.0);
  std::optional<WireFrame> next() override;
  bool live() const override { return pace_fps_ > 0.0; }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
  double pace_fps_;
  std::uint64_t count_ = 0;
  std::optional<std::chrono::steady_clock::time_point> start_;
};

/// Accepts one client on the given TCP port and reads frames until it
/// disconnects. A trailing partial frame raises ProtocolError.
class TcpSource : public FrameSource {
 public:
  explicit TcpSource(std::uint16_t port);
  ~TcpSource() override;
  TcpSource(const TcpSource&) = delete;
  TcpSource& operator=(const TcpSource&) = delete;
  std::optional<WireFrame> next() override;
  bool live() const override { return true; }
  std::uint16_t port() const { return port_; }
  /// Blocks until a client connects.
  void accept_client();

 private:
  int listen_fd_ = -1;
  int client_fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Sends frames to host:port over TCP (used by tests and the stream demo).
void send_frames(const std::string& host, std::uint16_t port, std::span<const WireFrame> frames, double pace_fps = 0.0);

/// Text pose stream: "id t0..t29 p0..p32", space-separated, one line per
/// frame. The optional binary mirror stores id and timestamp (u64, host order)
/// followed by the 63 values as float64.
class PoseWriter {
 public:
  explicit PoseWriter(const std::filesystem::path& text, const std::optional<std::filesystem::path>& binary = {});
  void write(const PoseRecord& r);
  void flush();

 private:
  std::ofstream text_;
  std::optional<std::ofstream> binary_;
};

std::vector<PoseRecord> read_pose_binary(const std::filesystem::path& path);

struct StreamOptions {
  SessionOptions session;
  /// Reader to worker buffer, seconds of frames at plan.fps.
  double buffer_seconds = 0.5;
};

struct StreamStats {
  std::size_t frames_in = 0;
  std::size_t poses_out = 0;
  std::size_t dropped = 0;
  std::size_t skipped = 0;
  double wall_seconds = 0.0;
  double throughput_fps = 0.0;
  /// Per-pose latency from frame receipt to inference finished, ms.
  double latency_p50_ms = 0.0;
  double latency_p99_ms = 0.0;
  double latency_max_ms = 0.0;
  /// Inference time alone (worker compute per frame), ms.
  double compute_p99_ms = 0.0;
  Phase final_phase = Phase::kIdle;
  std::string failure;
};

/// Reader, inference worker and writer threads joined by bounded queues.
/// Every emitted pose goes to sink on the writer thread.
StreamStats run_stream(FrameSource& source, const pfp::PfpModel& model, const StreamOptions& options,
                       const std::function<void(const PoseRecord&)>& sink);

}  // namespace flexpose::runtime
