// SPDX-License-Identifier: Apache-2.0
#include "flexpose/synth/surrogate.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "flexpose/error.hpp"

namespace flexpose::synth {

void ClothSurrogateParams::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw ValidationError("surrogate omega must be positive");
  if (!(zeta > 0.0 && zeta <= 1.0)) throw ValidationError("surrogate zeta must lie in (0, 1]");
  if (!(max_swing > 0.0 && max_swing <= std::numbers::pi / 4.0)) {
    throw ValidationError("surrogate max swing must lie in (0, pi/4]");
  }
  if (!(drive_gain >= 0.0) || !(accel_noise >= 0.0) || !(drive_noise >= 0.0) || !(lever_arm >= 0.0)) {
    throw ValidationError("surrogate gains and noise levels must be non-negative");
  }
}

void SurrogateConfig::validate() const {
  if (!(dt > 0.0)) throw ValidationError("surrogate dt must be positive");
  if (substeps < 1) throw ValidationError("surrogate substeps must be >= 1");
  for (const auto& p : imu) p.validate();
}

SurrogateConfig SurrogateConfig::uniform(const ClothSurrogateParams& p, double dt) {
  SurrogateConfig c;
  c.imu.fill(p);
  c.dt = dt;
  return c;
}

Vec3 DampedOscillator::acceleration(const Vec3& u) const {
  return omega_ * omega_ * (u - position) - 2.0 * zeta_ * omega_ * velocity;
}

void DampedOscillator::step(const Vec3& u, double dt) {
  const double w2 = omega_ * omega_;
  const double c = 2.0 * zeta_ * omega_;
  auto acc = [&](const Vec3& x, const Vec3& v) -> Vec3 { return w2 * (u - x) - c * v; };
  const Vec3 x0 = position, v0 = velocity;
  const Vec3 k1x = v0, k1v = acc(x0, v0);
  const Vec3 k2x = v0 + 0.5 * dt * k1v, k2v = acc(x0 + 0.5 * dt * k1x, v0 + 0.5 * dt * k1v);
  const Vec3 k3x = v0 + 0.5 * dt * k2v, k3v = acc(x0 + 0.5 * dt * k2x, v0 + 0.5 * dt * k2v);
  const Vec3 k4x = v0 + dt * k3v, k4v = acc(x0 + dt * k3x, v0 + dt * k3v);
  position = x0 + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  velocity = v0 + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
}

namespace {

// Keeps |phi| <= limit; at the limit the outward velocity is removed.
void clamp_swing(DampedOscillator& osc, double limit) {
  const double n = osc.position.norm();
  if (n <= limit) return;
  const Vec3 dir = osc.position / n;
  osc.position = dir * limit;
  const double radial = osc.velocity.dot(dir);
  if (radial > 0.0) osc.velocity -= radial * dir;
}

}  // namespace

std::vector<ImuFrame> loose_surrogate(std::span<const ImuFrame> tight, const SurrogateConfig& config,
                                      std::uint64_t seed) {
  return loose_surrogate(tight, config, seed, nullptr);
}

std::vector<ImuFrame> loose_surrogate(std::span<const ImuFrame> tight, const SurrogateConfig& config,
                                      std::uint64_t seed,
                                      std::vector<std::array<Vec3, kNumImus>>* offsets) {
  config.validate();
  const std::size_t n = tight.size();
  std::vector<ImuFrame> out(tight.begin(), tight.end());
  if (offsets) offsets->assign(n, {});
  const double h = config.dt / config.substeps;
  const Vec3 hang(0.0, -1.0, 0.0);

  for (std::size_t i = 0; i < kNumImus; ++i) {
    const auto& p = config.imu[i];
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto noise3 = [&](double sigma) -> Vec3 {
      if (sigma == 0.0) return Vec3::Zero();
      const double x = normal(rng), y = normal(rng), z = normal(rng);
      return sigma * Vec3(x, y, z);
    };

    DampedOscillator osc(p.omega, p.zeta);
    for (std::size_t k = 0; k < n; ++k) {
      const Vec3 u = p.drive_gain * tight[k].acceleration(i) + noise3(p.drive_noise);
      const Vec3 phi = osc.position;
      const Vec3 phi_dd = osc.acceleration(u);
      if (offsets) (*offsets)[k][i] = phi;

      // Rotate both stored columns; phi = 0 leaves them bit-identical.
      const Mat3 r = kin::to_matrix(kin::AxisAngle{phi});
      const kin::Rot6D o = tight[k].orientation(i);
      out[k].set_orientation(i, kin::Rot6D{r * o.a1, r * o.a2});
      const Vec3 induced = phi_dd.cross(p.lever_arm * hang);
      out[k].set_acceleration(i, tight[k].acceleration(i) + induced + noise3(p.accel_noise));

      for (int s = 0; s < config.substeps; ++s) {
        osc.step(u, h);
        clamp_swing(osc, p.max_swing);
      }
    }
  }
  return out;
}

}  // namespace flexpose::synth
