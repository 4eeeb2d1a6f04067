// SPDX-License-Identifier: Apache-2.0
#include "flexpose/pipeline/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "flexpose/error.hpp"

namespace flexpose::pipeline {

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json styles_json = nlohmann::json::array();
  for (auto s : styles) styles_json.push_back(synth::motion_style_name(s));
  const auto& s = surrogate;
  return {{"fps", fps},
          {"tpose_seconds", tpose_seconds},
          {"flex_seconds", flex_seconds},
          {"motion_frames", motion_frames},
          {"blend_frames", blend_frames},
          {"styles", styles_json},
          {"stature", stature},
          {"surrogate",
           {{"omega", s.omega},
            {"zeta", s.zeta},
            {"drive_gain", s.drive_gain},
            {"max_swing", s.max_swing},
            {"accel_noise", s.accel_noise},
            {"drive_noise", s.drive_noise},
            {"lever_arm", s.lever_arm}}},
          {"flex_sensor", {{"gain", flex_sensor.gain}, {"offset", flex_sensor.offset}}},
          {"wear_gain_min", wear_gain_min},
          {"wear_gain_max", wear_gain_max},
          {"wear_offset_max", wear_offset_max}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.fps = j.value("fps", c.fps);
  c.tpose_seconds = j.value("tpose_seconds", c.tpose_seconds);
  c.flex_seconds = j.value("flex_seconds", c.flex_seconds);
  c.motion_frames = j.value("motion_frames", c.motion_frames);
  c.blend_frames = j.value("blend_frames", c.blend_frames);
  if (j.contains("styles")) {
    c.styles.clear();
    for (const auto& s : j["styles"]) c.styles.push_back(synth::parse_motion_style(s.get<std::string>()));
  }
  c.stature = j.value("stature", c.stature);
  if (j.contains("surrogate")) {
    const auto& s = j["surrogate"];
    auto& p = c.surrogate;
    p.omega = s.value("omega", p.omega);
    p.zeta = s.value("zeta", p.zeta);
    p.drive_gain = s.value("drive_gain", p.drive_gain);
    p.max_swing = s.value("max_swing", p.max_swing);
    p.accel_noise = s.value("accel_noise", p.accel_noise);
    p.drive_noise = s.value("drive_noise", p.drive_noise);
    p.lever_arm = s.value("lever_arm", p.lever_arm);
  }
  if (j.contains("flex_sensor")) {
    c.flex_sensor.gain = j["flex_sensor"].value("gain", c.flex_sensor.gain);
    c.flex_sensor.offset = j["flex_sensor"].value("offset", c.flex_sensor.offset);
  }
  c.wear_gain_min = j.value("wear_gain_min", c.wear_gain_min);
  c.wear_gain_max = j.value("wear_gain_max", c.wear_gain_max);
  c.wear_offset_max = j.value("wear_offset_max", c.wear_offset_max);
  if (!(c.fps > 0.0)) throw ValidationError("fps must be positive");
  if (c.styles.empty()) throw ValidationError("at least one motion style is required");
  if (!(c.wear_gain_min > 0.0) || c.wear_gain_max < c.wear_gain_min) throw ValidationError("bad wear gain range");
  c.surrogate.validate();
  return c;
}

std::size_t SynthConfig::calibration_frames() const {
  return static_cast<std::size_t>(std::lround(tpose_seconds * fps)) +
         static_cast<std::size_t>(std::lround(flex_seconds * fps));
}

void Recording::validate() const {
  if (tight.size() != size() || loose.size() != size() || flex_raw.size() != size()) {
    throw LengthError(fmt::format("recording '{}': stream lengths differ", name));
  }
  if (calibration_frames > size()) throw LengthError(fmt::format("recording '{}' is shorter than its calibration", name));
}

Recording synth_recording(const SynthConfig& config, const kin::Skeleton& skeleton, synth::MotionStyle style,
                          std::uint64_t seed, const std::string& name) {
  Recording rec;
  rec.name = name;
  rec.style = style;
  rec.seed = seed;
  rec.fps = config.fps;
  const auto gesture = synth::generate_calibration_gesture(config.fps, config.tpose_seconds, config.flex_seconds);
  auto motion = synth::generate_motion(style, config.motion_frames, config.fps, seed);
  // Fade the motion in from the rest pose so the recording has no jump.
  const std::size_t blend = std::min(config.blend_frames, motion.size());
  for (std::size_t k = 0; k < blend; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(blend);
    const double w = u * u * (3.0 - 2.0 * u);
    for (auto& r : motion.frames[k].theta) r *= w;
  }
  rec.calibration_frames = gesture.size();
  rec.poses = gesture.frames;
  rec.poses.insert(rec.poses.end(), motion.frames.begin(), motion.frames.end());

  const double dt = 1.0 / config.fps;
  rec.tight = synth::synth_tight_imu(skeleton, rec.poses, synth::MountingSpec::standard(skeleton), dt);
  rec.loose = synth::loose_surrogate(rec.tight, synth::SurrogateConfig::uniform(config.surrogate, dt),
                                     seed ^ 0x9e3779b97f4a7c15ULL);

  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::uniform_real_distribution<double> gain(config.wear_gain_min, config.wear_gain_max);
  std::uniform_real_distribution<double> offset(-config.wear_offset_max, config.wear_offset_max);
  const synth::WearDistortion left{gain(rng), offset(rng), 0.0};
  const synth::WearDistortion right{gain(rng), offset(rng), 0.0};
  rec.flex_raw = synth::inject_primary_flex_displacement(synth::synth_flex(skeleton, rec.poses, config.flex_sensor),
                                                         left, right);
  return rec;
}

std::vector<Recording> synth_recordings(const SynthConfig& config, const kin::Skeleton& skeleton, std::size_t count,
                                        std::uint64_t seed_base, const std::string& prefix) {
  std::vector<Recording> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto style = config.styles[i % config.styles.size()];
    out.push_back(synth_recording(config, skeleton, style, seed_base + i,
                                  fmt::format("{}{:04d}_{}", prefix, i, synth::motion_style_name(style))));
  }
  return out;
}

namespace {

template <std::size_t N>
void write_float_rows(const std::filesystem::path& path, const std::vector<std::string>& header,
                      std::size_t rows, const auto& row_at) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  char buf[32];
  std::string line;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::array<float, N> v = row_at(r);
    line.clear();
    for (std::size_t c = 0; c < N; ++c) {
      if (c) line += ',';
      line.append(buf, std::to_chars(buf, buf + sizeof buf, v[c]).ptr);
    }
    out << line << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

template <std::size_t N>
std::vector<std::array<float, N>> read_float_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
  std::vector<std::array<float, N>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<float, N> v{};
    const char* p = line.data();
    const char* end = p + line.size();
    for (std::size_t c = 0; c < N; ++c) {
      const char* stop = std::find(p, end, ',');
      const auto res = std::from_chars(p, stop, v[c]);
      if (res.ec != std::errc() || res.ptr != stop || (c + 1 < N && stop == end) || (c + 1 == N && stop != end)) {
        throw IoError(fmt::format("{}:{}: expected {} numeric columns", path.string(), line_no, N));
      }
      p = stop + 1;
    }
    rows.push_back(v);
  }
  return rows;
}

std::vector<std::string> imu_header() {
  std::vector<std::string> h;
  for (const char* site : synth::kImuSiteNames)
    for (const char* ch : {"a1x", "a1y", "a1z", "a2x", "a2y", "a2z", "ax", "ay", "az"})
      h.push_back(fmt::format("{}_{}", site, ch));
  return h;
}

}  // namespace

void write_imu_csv(const std::filesystem::path& path, std::span<const synth::ImuFrame> frames) {
  write_float_rows<synth::kImuFrameSize>(path, imu_header(), frames.size(), [&](std::size_t r) { return frames[r].ch; });
}

std::vector<synth::ImuFrame> read_imu_csv(const std::filesystem::path& path) {
  std::vector<synth::ImuFrame> out;
  for (const auto& row : read_float_rows<synth::kImuFrameSize>(path)) out.push_back({row});
  return out;
}

void write_flex_csv(const std::filesystem::path& path, std::span<const synth::FlexFrame> frames) {
  write_float_rows<synth::kNumFlex>(path, {"left", "right"}, frames.size(), [&](std::size_t r) {
    return std::array<float, 2>{frames[r].left, frames[r].right};
  });
}

std::vector<synth::FlexFrame> read_flex_csv(const std::filesystem::path& path) {
  std::vector<synth::FlexFrame> out;
  for (const auto& row : read_float_rows<synth::kNumFlex>(path)) out.push_back({row[0], row[1]});
  return out;
}

void save_dataset(const std::filesystem::path& dir, std::span<const Recording> recordings,
                  const SynthConfig& config, const kin::Skeleton& skeleton) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "flexpose-dataset";
  manifest["version"] = 1;
  manifest["config"] = config.to_json();
  manifest["skeleton"] = skeleton.to_json();
  manifest["recordings"] = nlohmann::json::array();
  for (const auto& rec : recordings) {
    rec.validate();
    synth::PoseSequence poses;
    poses.fps = rec.fps;
    poses.frames = rec.poses;
    synth::write_pose_csv(dir / (rec.name + ".poses.csv"), poses);
    write_imu_csv(dir / (rec.name + ".tight.csv"), rec.tight);
    write_imu_csv(dir / (rec.name + ".loose.csv"), rec.loose);
    write_flex_csv(dir / (rec.name + ".flex.csv"), rec.flex_raw);
    manifest["recordings"].push_back({{"name", rec.name},
                                      {"style", synth::motion_style_name(rec.style)},
                                      {"seed", rec.seed},
                                      {"fps", rec.fps},
                                      {"frames", rec.size()},
                                      {"calibration_frames", rec.calibration_frames}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest in " + dir.string() + ": " + e.what());
  }
  Dataset ds;
  ds.config = SynthConfig::from_json(manifest.at("config"));
  ds.skeleton = kin::Skeleton::from_json(manifest.at("skeleton"));
  for (const auto& entry : manifest.at("recordings")) {
    Recording rec;
    rec.name = entry.at("name").get<std::string>();
    rec.style = synth::parse_motion_style(entry.at("style").get<std::string>());
    rec.seed = entry.at("seed").get<std::uint64_t>();
    rec.fps = entry.at("fps").get<double>();
    rec.calibration_frames = entry.at("calibration_frames").get<std::size_t>();
    rec.poses = synth::read_pose_csv(dir / (rec.name + ".poses.csv"), rec.fps).frames;
    rec.tight = read_imu_csv(dir / (rec.name + ".tight.csv"));
    rec.loose = read_imu_csv(dir / (rec.name + ".loose.csv"));
    rec.flex_raw = read_flex_csv(dir / (rec.name + ".flex.csv"));
    rec.validate();
    if (rec.size() != entry.at("frames").get<std::size_t>()) {
      throw IoError(fmt::format("recording '{}' has {} frames, manifest says {}", rec.name, rec.size(),
                                entry.at("frames").get<std::size_t>()));
    }
    ds.recordings.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace flexpose::pipeline
