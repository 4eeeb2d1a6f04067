// SPDX-License-Identifier: Apache-2.0
#include "flexpose/runtime/stream.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <thread>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fmt/format.h>

#include "flexpose/error.hpp"
#include "flexpose/log.hpp"

namespace flexpose::runtime {

using Clock = std::chrono::steady_clock;

void write_session_file(const std::filesystem::path& path, std::span<const WireFrame> frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write session file " + path.string());
  for (const auto& f : frames) {
    const auto b = encode_frame(f);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }
  if (!out) throw IoError("failed writing session file " + path.string());
}

std::vector<WireFrame> read_session_file(const std::filesystem::path& path) {
  FileReplaySource src(path);
  std::vector<WireFrame> out;
  while (auto f = src.next()) out.push_back(*f);
  return out;
}

std::vector<WireFrame> make_frames(std::span<const synth::ImuFrame> imu, std::span<const synth::FlexFrame> flex,
                                   double fps, std::uint64_t first_id) {
  if (imu.size() != flex.size()) throw LengthError("imu and flex streams differ in length");
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  std::vector<WireFrame> out(imu.size());
  for (std::size_t k = 0; k < imu.size(); ++k) {
    out[k].id = first_id + k;
    out[k].timestamp_us = static_cast<std::uint64_t>(std::llround(1e6 * static_cast<double>(k) / fps));
    out[k].imu = imu[k];
    out[k].flex = flex[k];
  }
  return out;
}

FileReplaySource::FileReplaySource(const std::filesystem::path& path, double pace_fps)
    : in_(path, std::ios::binary), path_(path), pace_fps_(pace_fps) {
  if (!in_) throw IoError("cannot open session file " + path.string());
}

std::optional<WireFrame> FileReplaySource::next() {
  WireBytes buf;
  in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got == 0) return std::nullopt;
  if (got < buf.size()) {
    throw ProtocolError(fmt::format("{}: truncated frame at end ({} bytes)", path_.string(), got));
  }
  if (pace_fps_ > 0.0) {
    if (!start_) start_ = Clock::now();
    const auto due = *start_ + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>(static_cast<double>(count_) / pace_fps_));
    std::this_thread::sleep_until(due);
  }
  ++count_;
  return decode_frame(buf);
}

TcpSource::TcpSource(std::uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError(fmt::format("socket: {}", std::strerror(errno)));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 1) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw IoError(fmt::format("cannot listen on port {}: {}", port, err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpSource::~TcpSource() {
  if (client_fd_ >= 0) ::close(client_fd_);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpSource::accept_client() {
  if (client_fd_ >= 0) return;
  client_fd_ = ::accept(listen_fd_, nullptr, nullptr);
  if (client_fd_ < 0) throw IoError(fmt::format("accept: {}", std::strerror(errno)));
  spdlog::info("stream: client connected on port {}", port_);
}

std::optional<WireFrame> TcpSource::next() {
  accept_client();
  WireBytes buf;
  std::size_t got = 0;
  while (got < buf.size()) {
    const ssize_t n = ::recv(client_fd_, buf.data() + got, buf.size() - got, 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(fmt::format("recv: {}", std::strerror(errno)));
    }
    got += static_cast<std::size_t>(n);
  }
  if (got == 0) return std::nullopt;
  if (got < buf.size()) throw ProtocolError(fmt::format("connection closed mid-frame ({} bytes)", got));
  return decode_frame(buf);
}

void send_frames(const std::string& host, std::uint16_t port, std::span<const WireFrame> frames, double pace_fps) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw IoError("cannot resolve " + host);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd >= 0) ::close(fd);
    throw IoError(fmt::format("cannot connect to {}:{}", host, port));
  }
  const auto start = Clock::now();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (pace_fps > 0.0) {
      std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(
                                                std::chrono::duration<double>(static_cast<double>(k) / pace_fps)));
    }
    const auto b = encode_frame(frames[k]);
    std::size_t sent = 0;
    while (sent < b.size()) {
      const ssize_t n = ::send(fd, b.data() + sent, b.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        ::close(fd);
        throw IoError(fmt::format("send: {}", std::strerror(errno)));
      }
      sent += static_cast<std::size_t>(n);
    }
  }
  ::close(fd);
}

PoseWriter::PoseWriter(const std::filesystem::path& text, const std::optional<std::filesystem::path>& binary)
    : text_(text) {
  if (!text_) throw IoError("cannot write pose stream " + text.string());
  if (binary) {
    binary_.emplace(*binary, std::ios::binary);
    if (!*binary_) throw IoError("cannot write pose mirror " + binary->string());
  }
}

void PoseWriter::write(const PoseRecord& r) {
  std::string line = std::to_string(r.id);
  char buf[32];
  auto append = [&](double v) {
    line += ' ';
    line.append(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  for (double v : r.theta) append(v);
  for (double v : r.position) append(v);
  line += '\n';
  text_ << line;
  if (binary_) {
    binary_->write(reinterpret_cast<const char*>(&r.id), sizeof r.id);
    binary_->write(reinterpret_cast<const char*>(&r.timestamp_us), sizeof r.timestamp_us);
    binary_->write(reinterpret_cast<const char*>(r.theta.data()), sizeof r.theta);
    binary_->write(reinterpret_cast<const char*>(r.position.data()), sizeof r.position);
  }
}

void PoseWriter::flush() {
  text_.flush();
  if (binary_) binary_->flush();
  if (!text_ || (binary_ && !*binary_)) throw IoError("failed writing pose stream");
}

std::vector<PoseRecord> read_pose_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PoseRecord> out;
  PoseRecord r;
  while (in.read(reinterpret_cast<char*>(&r.id), sizeof r.id)) {
    in.read(reinterpret_cast<char*>(&r.timestamp_us), sizeof r.timestamp_us);
    in.read(reinterpret_cast<char*>(r.theta.data()), sizeof r.theta);
    in.read(reinterpret_cast<char*>(r.position.data()), sizeof r.position);
    if (!in) throw IoError(path.string() + ": truncated pose record");
    out.push_back(r);
  }
  return out;
}

namespace {

struct Timed {
  WireFrame frame;
  Clock::time_point received;
};

double quantile_ms(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

}  // namespace

StreamStats run_stream(FrameSource& source, const pfp::PfpModel& model, const StreamOptions& options,
                       const std::function<void(const PoseRecord&)>& sink) {
  const auto capacity =
      static_cast<std::size_t>(std::max(1.0, std::round(options.buffer_seconds * options.session.plan.fps)));
  const auto policy = source.live() ? OverflowPolicy::kDropOldest : OverflowPolicy::kBlock;
  BoundedQueue<Timed> frames(capacity, policy);
  BoundedQueue<PoseRecord> poses(capacity, OverflowPolicy::kBlock);

  StreamStats stats;
  std::vector<double> latency, compute;
  std::exception_ptr reader_error, worker_error, writer_error;
  Session session(model, options.session);

  const auto start = Clock::now();
  std::thread reader([&] {
    try {
      while (auto f = source.next()) {
        ++stats.frames_in;
        if (!frames.push({*f, Clock::now()})) break;
      }
    } catch (...) {
      reader_error = std::current_exception();
    }
    frames.close();
  });
  std::thread writer([&] {
    try {
      while (auto p = poses.pop()) sink(*p);
    } catch (...) {
      writer_error = std::current_exception();
      poses.close();
      frames.close();
    }
  });
  std::thread worker([&] {
    try {
      while (auto item = frames.pop()) {
        const auto t0 = Clock::now();
        auto result = session.push(item->frame);
        if (result.pose) {
          const auto t1 = Clock::now();
          latency.push_back(std::chrono::duration<double, std::milli>(t1 - item->received).count());
          compute.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
          ++stats.poses_out;
          if (!poses.push(std::move(*result.pose))) break;
        }
      }
    } catch (...) {
      worker_error = std::current_exception();
      frames.close();
    }
    poses.close();
  });
  reader.join();
  worker.join();
  writer.join();
  if (reader_error) std::rethrow_exception(reader_error);
  if (worker_error) std::rethrow_exception(worker_error);
  if (writer_error) std::rethrow_exception(writer_error);

  stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  stats.dropped = frames.dropped();
  if (stats.dropped) spdlog::warn("stream: dropped {} frames under backpressure", stats.dropped);
  stats.skipped = session.skipped();
  stats.throughput_fps = stats.wall_seconds > 0 ? static_cast<double>(stats.frames_in) / stats.wall_seconds : 0.0;
  stats.latency_p50_ms = quantile_ms(latency, 0.5);
  stats.latency_p99_ms = quantile_ms(latency, 0.99);
  stats.latency_max_ms = latency.empty() ? 0.0 : *std::max_element(latency.begin(), latency.end());
  stats.compute_p99_ms = quantile_ms(compute, 0.99);
  stats.final_phase = session.phase();
  stats.failure = session.last_failure();
  return stats;
}

}  // namespace flexpose::runtime
