// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "flexpose/synth/sensors.hpp"

namespace flexpose::synth {

/// Loose-garment response of one IMU. The rotational offset phi follows
/// phi'' + 2 zeta omega phi' + omega^2 phi = omega^2 u, u = gain * a_host + n,
/// with n white noise of std drive_noise.
struct ClothSurrogateParams {
  double omega = 12.0;         // rad/s
  double zeta = 0.25;
  double drive_gain = 0.02;    // rad per m/s^2
  double max_swing = 0.35;     // rad
  double accel_noise = 0.3;    // m/s^2
  double drive_noise = 0.01;   // rad
  double lever_arm = 0.05;     // m, sensor hang below its attachment

  /// Throws ValidationError unless omega > 0, 0 < zeta <= 1,
  /// max_swing in (0, pi/4] and the gains and noise levels are non-negative.
  void validate() const;
};

struct SurrogateConfig {
  std::array<ClothSurrogateParams, kNumImus> imu{};
  double dt = 1.0 / 60.0;
  int substeps = 4;

  void validate() const;
  static SurrogateConfig uniform(const ClothSurrogateParams& p, double dt = 1.0 / 60.0);
};

/// A 3-DoF linear damped oscillator advanced with classic RK4.
class DampedOscillator {
 public:
  DampedOscillator(double omega, double zeta) : omega_(omega), zeta_(zeta) {}

  /// Advances by dt with the input u held constant.
  void step(const Vec3& u, double dt);
  Vec3 acceleration(const Vec3& u) const;

  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();

 private:
  double omega_;
  double zeta_;
};

/// Loose-worn IMU signals derived from tight ones. Deterministic given seed.
std::vector<ImuFrame> loose_surrogate(std::span<const ImuFrame> tight, const SurrogateConfig& config,
                                      std::uint64_t seed);

/// Same as loose_surrogate but also returns the per-frame rotational offsets.
std::vector<ImuFrame> loose_surrogate(std::span<const ImuFrame> tight, const SurrogateConfig& config,
                                      std::uint64_t seed,
                                      std::vector<std::array<Vec3, kNumImus>>* offsets);

}  // namespace flexpose::synth
