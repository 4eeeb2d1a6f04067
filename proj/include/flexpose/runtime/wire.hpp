// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "flexpose/synth/sensors.hpp"

namespace flexpose::runtime {

inline constexpr std::array<std::uint8_t, 4> kWireMagic = {'F', 'X', 'P', '1'};
inline constexpr std::size_t kWireFrameSize = 4 + 8 + 8 + 4 * synth::kImuFrameSize + 4 * synth::kNumFlex;
static_assert(kWireFrameSize == 172);

/// One sensor sample as sent by the garment. All fields little-endian.
struct WireFrame {
  std::uint64_t id = 0;
  std::uint64_t timestamp_us = 0;
  synth::ImuFrame imu;
  synth::FlexFrame flex;

  friend bool operator==(const WireFrame&, const WireFrame&) = default;
};

using WireBytes = std::array<std::uint8_t, kWireFrameSize>;

WireBytes encode_frame(const WireFrame& frame);
/// Throws ProtocolError on a short buffer or wrong magic.
WireFrame decode_frame(std::span<const std::uint8_t> bytes);

}  // namespace flexpose::runtime
