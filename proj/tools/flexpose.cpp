// SPDX-License-Identifier: Apache-2.0
// flexpose command-line front end.
#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "flexpose/dldm/model.hpp"
#include "flexpose/error.hpp"
#include "flexpose/eval/report.hpp"
#include "flexpose/log.hpp"
#include "flexpose/pfp/model.hpp"
#include "flexpose/pfp/train.hpp"
#include "flexpose/pipeline/dataset.hpp"
#include "flexpose/pipeline/experiment.hpp"
#include "flexpose/runtime/session.hpp"
#include "flexpose/runtime/stream.hpp"

namespace fs = std::filesystem;
using namespace flexpose;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  json config = json::object();

  json section(const char* name) const { return config.contains(name) ? config[name] : json::object(); }
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw IoError("bad config " + path + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

pipeline::ImuSource parse_source(const std::string& s) {
  if (s == "tight") return pipeline::ImuSource::kTight;
  if (s == "loose") return pipeline::ImuSource::kLoose;
  throw ValidationError("unknown IMU source '" + s + "' (tight, loose)");
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON configuration file");
  cmd->add_option("--seed", c.seed, "Random seed");
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string out = "data";
  std::size_t train = 0, test = 0;
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  const json s = c.section("synth");
  const auto cfg = pipeline::SynthConfig::from_json(s);
  const auto skeleton = kin::Skeleton::upper_body(cfg.stature);
  const std::size_t n_train = a.train ? a.train : s.value("train_recordings", std::size_t{24});
  const std::size_t n_test = a.test ? a.test : s.value("test_recordings", std::size_t{8});
  const fs::path out(a.out);
  // Disjoint seed ranges keep test subjects unseen.
  const std::uint64_t train_base = c.seed * 1000003ULL;
  const std::uint64_t test_base = train_base + 500000ULL;
  spdlog::info("synthesizing {} train and {} test recordings of {} motion frames", n_train, n_test,
               cfg.motion_frames);
  const auto train = pipeline::synth_recordings(cfg, skeleton, n_train, train_base, "train");
  pipeline::save_dataset(out / "train", train, cfg, skeleton);
  const auto test = pipeline::synth_recordings(cfg, skeleton, n_test, test_base, "test");
  pipeline::save_dataset(out / "test", test, cfg, skeleton);
  // Loose-worn session files for replay, one per test recording.
  for (const auto& r : test) {
    runtime::write_session_file(out / "test" / (r.name + ".fxs"), runtime::make_frames(r.loose, r.flex_raw, r.fps));
  }
  spdlog::info("wrote {}", out.string());
  return 0;
}

// ---- train-dldm ------------------------------------------------------------

struct DldmArgs {
  std::string data = "data/train";
  std::string out = "models/dldm.bin";
};

int cmd_train_dldm(const Common& c, const DldmArgs& a) {
  const json s = c.section("dldm");
  const auto cfg = dldm::DldmConfig::from_json(s);
  const auto ds = pipeline::load_dataset(a.data);
  const std::size_t stride = s.value("window_stride", cfg.vae.window / 2);
  const auto windows = pipeline::displacement_windows(ds.recordings, cfg.vae.window, stride);
  spdlog::info("training DLDM on {} windows of {} frames", windows.size(), cfg.vae.window);
  dldm::DldmModel model(cfg, c.seed);
  const auto vae = dldm::train_vae(model, windows, c.seed + 1);
  spdlog::info("VAE loss {:.5g} -> {:.5g}", vae.initial_loss(), vae.final_loss());
  const auto ldm = dldm::train_ldm(model, windows, c.seed + 2);
  spdlog::info("denoiser loss {:.5g} -> {:.5g}", ldm.initial_loss(), ldm.final_loss());
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  dldm::save_dldm(model, a.out);
  spdlog::info("wrote {}", a.out);
  return 0;
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string model = "models/dldm.bin";
  std::string out = "samples.csv";
  std::size_t count = 64;
  bool vae_only = false;
  std::string compare;  // dataset whose displacement windows serve as reference
  std::string report;
};

int cmd_sample(const Common& c, const SampleArgs& a) {
  const auto model = dldm::load_dldm(a.model);
  const auto gen = dldm::sample(model, a.count, c.seed,
                                a.vae_only ? dldm::SampleMode::kVaeOnly : dldm::SampleMode::kDiffusion);
  dldm::write_windows_csv(gen, a.out);
  spdlog::info("wrote {} windows to {}", gen.size(), a.out);
  if (a.compare.empty()) return 0;

  const auto ds = pipeline::load_dataset(a.compare);
  const std::size_t w = model.config.vae.window;
  const auto real = pipeline::displacement_windows(ds.recordings, w, w);
  const auto base = dldm::gaussian_baseline(model.window_norm, a.count, w, c.seed + 7);
  auto values = [](const std::vector<dldm::DisplacementWindow>& ws) {
    std::vector<nn::Tensor> v;
    for (const auto& x : ws) v.push_back(x.values);
    return v;
  };
  const auto real_v = values(real);
  const eval::GenMetricsConfig gc{c.section("eval").value("projection_dim", std::size_t{64}), c.seed ^ 0x5eedULL, 7};
  const json report = {{"generated", eval::to_json(eval::generation_metrics(values(gen), real_v, gc))},
                       {"gaussian_baseline", eval::to_json(eval::generation_metrics(values(base), real_v, gc))}};
  std::cout << report.dump(2) << "\n";
  if (!a.report.empty()) write_json(a.report, report);
  return 0;
}

// ---- train-pfp ---------------------------------------------------------------

struct PfpArgs {
  std::string data = "data/train";
  std::string source = "augmented";
  std::string dldm = "models/dldm.bin";
  std::string out = "models/pfp.bin";
  bool no_flex = false;
};

std::vector<pfp::PfpSequence> training_sequences(const pipeline::Dataset& ds, const std::string& source,
                                                 const std::string& dldm_path, std::uint64_t seed) {
  const auto plan = pipeline::plan_for(ds.config);
  if (source != "augmented") return pipeline::to_pfp_sequences(ds.recordings, parse_source(source), plan);
  const auto model = dldm::load_dldm(dldm_path);
  std::vector<pfp::PfpSequence> out;
  for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
    out.push_back(pipeline::augmented_sequence(ds.recordings[i], model, seed * 7919ULL + i, plan));
  }
  return out;
}

int cmd_train_pfp(const Common& c, const PfpArgs& a) {
  const json s = c.section("pfp");
  auto cfg = pfp::PfpConfig::from_json(s.value("model", json::object()));
  if (a.no_flex) cfg.use_flex = false;
  const auto opt = pfp::PfpTrainOptions::from_json(s.value("train", json::object()));
  const auto ds = pipeline::load_dataset(a.data);
  const auto seqs = training_sequences(ds, a.source, a.dldm, c.seed);
  std::size_t frames = 0;
  for (const auto& q : seqs) frames += q.size();
  spdlog::info("training PFP on {} {} sequences ({} frames), flex {}", seqs.size(), a.source, frames,
               cfg.use_flex ? "on" : "off");
  pfp::PfpModel model(cfg, ds.skeleton, c.seed);
  const auto report = pfp::train_pfp(model, seqs, opt, c.seed + 1, [&](std::size_t it, const pfp::PfpTrainReport& r) {
    if ((it + 1) % 100 == 0) spdlog::info("iteration {}/{} loss {:.5g}", it + 1, opt.iterations, r.total.back());
  });
  spdlog::info("loss {:.5g} -> {:.5g}", report.initial_loss(), report.final_loss());
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  pfp::save_pfp(a.out, model, c.seed);
  spdlog::info("wrote {}", a.out);
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string data = "data/test";
  std::string model = "models/pfp.bin";
  std::string source = "loose";
  std::string out = "report";
};

int cmd_eval(const Common&, const EvalArgs& a) {
  const auto model = pfp::load_pfp(a.model);
  const auto ds = pipeline::load_dataset(a.data);
  const auto seqs = pipeline::to_pfp_sequences(ds.recordings, parse_source(a.source), pipeline::plan_for(ds.config));
  const auto report = pipeline::evaluate_pfp(model, seqs);
  const json j = eval::to_json(report);
  json summary = j;
  summary.erase("sequences");
  std::cout << summary.dump(2) << "\n";
  const fs::path out(a.out);
  fs::create_directories(out);
  write_json(out / "metrics.json", j);
  eval::write_csv(out / "metrics.csv", report);
  spdlog::info("wrote {}", out.string());
  return 0;
}

// ---- stream / replay / calibrate-check -------------------------------------------

struct StreamArgs {
  std::string model = "models/pfp.bin";
  std::string session;
  int port = 9750;
  double pace = 0.0;
  std::string out = "poses.txt";
  std::string binary;
  std::string stats;
  bool allow_imu_only = false;
  bool skip_flex = false;
};

runtime::StreamOptions stream_options(const Common& c, const StreamArgs& a) {
  const json s = c.section("stream");
  runtime::StreamOptions o;
  o.session.plan.fps = s.value("fps", 60.0);
  o.session.plan.tpose.seconds = s.value("tpose_seconds", 5.0);
  o.session.plan.tpose.max_deviation_deg = s.value("max_tpose_deviation_deg", 5.0);
  o.session.plan.flex_seconds = s.value("flex_seconds", 1.0);
  o.session.calibrate_flex = !(a.skip_flex || s.value("skip_flex_calibration", false));
  o.session.allow_imu_only = a.allow_imu_only || s.value("allow_imu_only", false);
  o.buffer_seconds = s.value("buffer_seconds", 0.5);
  return o;
}

json stats_json(const runtime::StreamStats& st) {
  return {{"frames_in", st.frames_in},           {"poses_out", st.poses_out},
          {"dropped", st.dropped},               {"skipped", st.skipped},
          {"wall_seconds", st.wall_seconds},     {"throughput_fps", st.throughput_fps},
          {"latency_p50_ms", st.latency_p50_ms}, {"latency_p99_ms", st.latency_p99_ms},
          {"latency_max_ms", st.latency_max_ms}, {"compute_p99_ms", st.compute_p99_ms},
          {"final_phase", runtime::phase_name(st.final_phase)}, {"failure", st.failure}};
}

int run_with_source(runtime::FrameSource& src, const Common& c, const StreamArgs& a) {
  const auto model = pfp::load_pfp(a.model);
  std::optional<fs::path> bin;
  if (!a.binary.empty()) bin = a.binary;
  runtime::PoseWriter writer(a.out, bin);
  const auto stats = runtime::run_stream(src, model, stream_options(c, a), [&](const runtime::PoseRecord& r) {
    writer.write(r);
  });
  writer.flush();
  const json j = stats_json(stats);
  std::cout << j.dump(2) << "\n";
  if (!a.stats.empty()) write_json(a.stats, j);
  return stats.final_phase == runtime::Phase::kRunning ? 0 : 2;
}

int cmd_stream(const Common& c, const StreamArgs& a) {
  if (a.port < 0 || a.port > 65535) throw ValidationError("port out of range");
  runtime::TcpSource src(static_cast<std::uint16_t>(a.port));
  spdlog::info("waiting for a sensor client on port {}", src.port());
  return run_with_source(src, c, a);
}

int cmd_replay(const Common& c, const StreamArgs& a) {
  if (a.session.empty()) throw ValidationError("--session is required");
  runtime::FileReplaySource src(a.session, a.pace);
  return run_with_source(src, c, a);
}

int cmd_calibrate_check(const Common& c, const StreamArgs& a) {
  if (a.session.empty()) throw ValidationError("--session is required");
  const auto opt = stream_options(c, a).session;
  const auto frames = runtime::read_session_file(a.session);
  // Calibration only needs the prefix; an untrained model is enough.
  const pfp::PfpModel model(pfp::PfpConfig{8, 1, {}, true}, kin::Skeleton::upper_body(), c.seed);
  runtime::Session session(model, opt);
  for (const auto& f : frames) {
    const auto r = session.push(f);
    if (r.event == runtime::Session::Event::kFailed || session.phase() == runtime::Phase::kRunning) break;
  }
  json j = {{"phase", runtime::phase_name(session.phase())}, {"failure", session.last_failure()}};
  if (session.phase() == runtime::Phase::kRunning) {
    json refs = json::array();
    for (const auto& r : session.calibration().imu.ref) {
      json m = json::array();
      for (int i = 0; i < 3; ++i) m.push_back({r(i, 0), r(i, 1), r(i, 2)});
      refs.push_back(m);
    }
    j["imu_references"] = refs;
    if (session.calibration().flex) {
      json ranges = json::array();
      for (const auto& s : session.calibration().flex->side) ranges.push_back({{"raw_min", s.raw_min}, {"raw_max", s.raw_max}});
      j["flex_ranges"] = ranges;
    }
  }
  std::cout << j.dump(2) << "\n";
  return session.phase() == runtime::Phase::kRunning ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging_from_env();
  CLI::App app{"Sensor-fusion motion capture: data synthesis, training, evaluation and streaming"};
  app.require_subcommand(1);
  Common common;

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Synthesize train/test recordings and replay sessions");
  add_common(synth, common);
  synth->add_option("--out", synth_args.out, "Output directory");
  synth->add_option("--train", synth_args.train, "Number of training recordings");
  synth->add_option("--test", synth_args.test, "Number of test recordings");

  DldmArgs dldm_args;
  auto* train_dldm = app.add_subcommand("train-dldm", "Train the displacement generator");
  add_common(train_dldm, common);
  train_dldm->add_option("--data", dldm_args.data, "Training dataset directory");
  train_dldm->add_option("--out", dldm_args.out, "Checkpoint path");

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "Generate displacement windows");
  add_common(sample, common);
  sample->add_option("--model", sample_args.model, "DLDM checkpoint");
  sample->add_option("--out", sample_args.out, "Output CSV");
  sample->add_option("--count", sample_args.count, "Number of windows");
  sample->add_flag("--vae-only", sample_args.vae_only, "Decode prior draws without diffusion");
  sample->add_option("--compare", sample_args.compare, "Dataset to score the samples against");
  sample->add_option("--report", sample_args.report, "Write the comparison JSON here");

  PfpArgs pfp_args;
  auto* train_pfp = app.add_subcommand("train-pfp", "Train the pose fusion predictor");
  add_common(train_pfp, common);
  train_pfp->add_option("--data", pfp_args.data, "Training dataset directory");
  train_pfp->add_option("--source", pfp_args.source, "tight, loose or augmented")
      ->check(CLI::IsMember({"tight", "loose", "augmented"}));
  train_pfp->add_option("--dldm", pfp_args.dldm, "DLDM checkpoint for augmented training");
  train_pfp->add_option("--out", pfp_args.out, "Checkpoint path");
  train_pfp->add_flag("--no-flex", pfp_args.no_flex, "Zero the flex inputs");

  EvalArgs eval_args;
  auto* evaluate = app.add_subcommand("eval", "Evaluate a predictor on a dataset");
  add_common(evaluate, common);
  evaluate->add_option("--data", eval_args.data, "Dataset directory");
  evaluate->add_option("--model", eval_args.model, "PFP checkpoint");
  evaluate->add_option("--source", eval_args.source, "tight or loose")->check(CLI::IsMember({"tight", "loose"}));
  evaluate->add_option("--out", eval_args.out, "Report directory");

  StreamArgs stream_args;
  auto add_stream_opts = [&](CLI::App* cmd) {
    add_common(cmd, common);
    cmd->add_option("--model", stream_args.model, "PFP checkpoint");
    cmd->add_option("--out", stream_args.out, "Pose text output");
    cmd->add_option("--binary", stream_args.binary, "Binary pose mirror");
    cmd->add_option("--stats", stream_args.stats, "Write stream statistics JSON here");
    cmd->add_flag("--allow-imu-only", stream_args.allow_imu_only, "Run without flex calibration");
    cmd->add_flag("--skip-flex", stream_args.skip_flex, "Skip the elbow gesture phase");
  };
  auto* stream = app.add_subcommand("stream", "Serve live frames from a TCP client");
  add_stream_opts(stream);
  stream->add_option("--port", stream_args.port, "TCP port (0 picks a free one)");
  auto* replay = app.add_subcommand("replay", "Stream a recorded session file");
  add_stream_opts(replay);
  replay->add_option("--session", stream_args.session, "Session file")->required();
  replay->add_option("--pace", stream_args.pace, "Replay rate in frames/s (0 = as fast as possible)");
  auto* calib = app.add_subcommand("calibrate-check", "Run only the calibration phases of a session file");
  add_common(calib, common);
  calib->add_option("--session", stream_args.session, "Session file")->required();
  calib->add_flag("--allow-imu-only", stream_args.allow_imu_only, "Run without flex calibration");
  calib->add_flag("--skip-flex", stream_args.skip_flex, "Skip the elbow gesture phase");

  CLI11_PARSE(app, argc, argv);
  try {
    common.config = load_config(common.config_path);
    if (synth->parsed()) return cmd_synth(common, synth_args);
    if (train_dldm->parsed()) return cmd_train_dldm(common, dldm_args);
    if (sample->parsed()) return cmd_sample(common, sample_args);
    if (train_pfp->parsed()) return cmd_train_pfp(common, pfp_args);
    if (evaluate->parsed()) return cmd_eval(common, eval_args);
    if (stream->parsed()) return cmd_stream(common, stream_args);
    if (replay->parsed()) return cmd_replay(common, stream_args);
    if (calib->parsed()) return cmd_calibrate_check(common, stream_args);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
