// SPDX-License-Identifier: Apache-2.0
#include "flexpose/runtime/wire.hpp"

#include <algorithm>
#include <bit>

#include <fmt/format.h>

#include "flexpose/error.hpp"

namespace flexpose::runtime {

namespace {

template <typename U>
void put(std::uint8_t*& p, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) *p++ = static_cast<std::uint8_t>(v >> (8 * i));
}

template <typename U>
U get(const std::uint8_t*& p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(*p++) << (8 * i);
  return v;
}

}  // namespace

WireBytes encode_frame(const WireFrame& frame) {
  WireBytes out{};
  std::uint8_t* p = out.data();
  p = std::copy(kWireMagic.begin(), kWireMagic.end(), p);
  put(p, frame.id);
  put(p, frame.timestamp_us);
  for (float v : frame.imu.ch) put(p, std::bit_cast<std::uint32_t>(v));
  put(p, std::bit_cast<std::uint32_t>(frame.flex.left));
  put(p, std::bit_cast<std::uint32_t>(frame.flex.right));
  return out;
}

WireFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireFrameSize) {
    throw ProtocolError(fmt::format("short frame: {} of {} bytes", bytes.size(), kWireFrameSize));
  }
  if (!std::equal(kWireMagic.begin(), kWireMagic.end(), bytes.begin())) throw ProtocolError("bad frame magic");
  const std::uint8_t* p = bytes.data() + kWireMagic.size();
  WireFrame f;
  f.id = get<std::uint64_t>(p);
  f.timestamp_us = get<std::uint64_t>(p);
  for (float& v : f.imu.ch) v = std::bit_cast<float>(get<std::uint32_t>(p));
  f.flex.left = std::bit_cast<float>(get<std::uint32_t>(p));
  f.flex.right = std::bit_cast<float>(get<std::uint32_t>(p));
  return f;
}

}  // namespace flexpose::runtime
