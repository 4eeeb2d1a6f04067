// SPDX-License-Identifier: Apache-2.0
#include "flexpose/pipeline/experiment.hpp"

#include "flexpose/error.hpp"

namespace flexpose::pipeline {

runtime::CalibrationPlan plan_for(const SynthConfig& config) {
  runtime::CalibrationPlan plan;
  plan.fps = config.fps;
  plan.tpose.seconds = config.tpose_seconds;
  plan.flex_seconds = config.flex_seconds;
  return plan;
}

namespace {

void check_layout(const Recording& rec, const runtime::CalibrationPlan& plan) {
  rec.validate();
  if (plan.total_frames() != rec.calibration_frames) {
    throw ValidationError("recording '" + rec.name + "' calibration layout does not match the plan");
  }
}

pfp::PfpSequence assemble(const Recording& rec, std::span<const synth::ImuFrame> motion_imu,
                          const runtime::SessionCalibration& cal) {
  pfp::PfpSequence seq;
  seq.name = rec.name;
  seq.fps = rec.fps;
  const std::size_t off = rec.calibration_frames;
  seq.imu.reserve(motion_imu.size());
  seq.flex.reserve(motion_imu.size());
  for (std::size_t k = 0; k < motion_imu.size(); ++k) {
    auto in = runtime::prepare_input(motion_imu[k], rec.flex_raw[off + k], cal);
    seq.imu.push_back(in.imu);
    seq.flex.push_back(in.flex_deg);
  }
  seq.poses.assign(rec.poses.begin() + static_cast<std::ptrdiff_t>(off), rec.poses.end());
  return seq;
}

}  // namespace

pfp::PfpSequence to_pfp_sequence(const Recording& rec, ImuSource source, const runtime::CalibrationPlan& plan) {
  check_layout(rec, plan);
  const auto& imu = source == ImuSource::kTight ? rec.tight : rec.loose;
  const auto cal = runtime::calibrate_session(imu, rec.flex_raw, plan);
  return assemble(rec, std::span(imu).subspan(rec.calibration_frames), cal);
}

std::vector<pfp::PfpSequence> to_pfp_sequences(std::span<const Recording> recs, ImuSource source,
                                               const runtime::CalibrationPlan& plan) {
  std::vector<pfp::PfpSequence> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(to_pfp_sequence(r, source, plan));
  return out;
}

pfp::PfpSequence augmented_sequence(const Recording& rec, const dldm::DldmModel& model, std::uint64_t seed,
                                    const runtime::CalibrationPlan& plan) {
  check_layout(rec, plan);
  const auto cal = runtime::calibrate_session(rec.tight, rec.flex_raw, plan);
  const std::size_t n = rec.motion_frames();
  const std::size_t w = model.config.vae.window;
  const auto windows = dldm::sample(model, (n + w - 1) / w, seed);
  const auto disp = dldm::concat_windows(windows, n);
  const auto loose = synth::apply_displacement(std::span(rec.tight).subspan(rec.calibration_frames), disp);
  return assemble(rec, loose, cal);
}

std::vector<dldm::DisplacementWindow> displacement_windows(std::span<const Recording> recs, std::size_t window,
                                                           std::size_t stride) {
  std::vector<dldm::DisplacementWindow> out;
  for (const auto& r : recs) {
    r.validate();
    const auto d = synth::displacement(std::span(r.tight).subspan(r.calibration_frames),
                                       std::span(r.loose).subspan(r.calibration_frames));
    auto w = dldm::make_windows(d, window, stride, r.fps);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

eval::PoseMetricsReport evaluate_pfp(const pfp::PfpModel& model, std::span<const pfp::PfpSequence> sequences) {
  std::vector<eval::SequenceMetrics> rows;
  rows.reserve(sequences.size());
  for (const auto& seq : sequences) {
    const auto out = pfp::run_sequence(model, seq);
    std::vector<kin::PoseFrame> pred;
    pred.reserve(out.size());
    for (const auto& o : out) pred.push_back(o.pose);
    rows.push_back(eval::evaluate_sequence(seq.name, model.skeleton(), pred, seq.poses, seq.fps));
  }
  return eval::aggregate(std::move(rows));
}

}  // namespace flexpose::pipeline
