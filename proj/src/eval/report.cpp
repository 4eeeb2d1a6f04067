// SPDX-License-Identifier: Apache-2.0
#include "flexpose/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "flexpose/error.hpp"
#include "flexpose/eval/metrics.hpp"

namespace flexpose::eval {

SequenceMetrics evaluate_sequence(const std::string& name, const kin::Skeleton& skeleton,
                                  std::span<const kin::PoseFrame> pred, std::span<const kin::PoseFrame> gt,
                                  double fps) {
  if (pred.size() != gt.size()) throw LengthError("sequence '" + name + "': prediction and truth differ in length");
  std::vector<kin::EndpointSet> pp, gp;
  pp.reserve(pred.size());
  gp.reserve(gt.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    pp.push_back(kin::fk(skeleton, pred[k]));
    gp.push_back(kin::fk(skeleton, gt[k]));
  }
  SequenceMetrics m;
  m.name = name;
  m.frames = pred.size();
  m.angular = angular_error(pred, gt);
  m.elbow = elbow_angular_error(pred, gt);
  m.positional = positional_error(pp, gp);
  m.jitter = pp.size() >= 4 ? jitter(pp, fps) : 0.0;
  return m;
}

namespace {

MeanStd summarize(const std::vector<SequenceMetrics>& seqs, double SequenceMetrics::*field) {
  MeanStd out;
  double weighted = 0.0, frames = 0.0;
  for (const auto& s : seqs) {
    weighted += s.*field * static_cast<double>(s.frames);
    frames += static_cast<double>(s.frames);
  }
  out.mean = frames > 0 ? weighted / frames : 0.0;
  if (seqs.size() > 1) {
    double mu = 0.0;
    for (const auto& s : seqs) mu += s.*field;
    mu /= static_cast<double>(seqs.size());
    double ss = 0.0;
    for (const auto& s : seqs) ss += (s.*field - mu) * (s.*field - mu);
    out.std = std::sqrt(ss / static_cast<double>(seqs.size() - 1));
  }
  return out;
}

nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

PoseMetricsReport aggregate(std::vector<SequenceMetrics> sequences) {
  PoseMetricsReport r;
  r.sequences = std::move(sequences);
  for (const auto& s : r.sequences) r.frames += s.frames;
  r.angular = summarize(r.sequences, &SequenceMetrics::angular);
  r.elbow = summarize(r.sequences, &SequenceMetrics::elbow);
  r.positional = summarize(r.sequences, &SequenceMetrics::positional);
  r.jitter = summarize(r.sequences, &SequenceMetrics::jitter);
  return r;
}

nlohmann::json to_json(const PoseMetricsReport& report) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : report.sequences) {
    seqs.push_back({{"name", s.name},
                    {"frames", s.frames},
                    {"angular_deg", s.angular},
                    {"elbow_deg", s.elbow},
                    {"positional_cm", s.positional},
                    {"jitter", s.jitter}});
  }
  return {{"frames", report.frames},
          {"angular_deg", to_json(report.angular)},
          {"elbow_deg", to_json(report.elbow)},
          {"positional_cm", to_json(report.positional)},
          {"jitter", to_json(report.jitter)},
          {"sequences", seqs}};
}

void write_csv(const std::filesystem::path& path, const PoseMetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "sequence,frames,angular_deg,elbow_deg,positional_cm,jitter\n";
  for (const auto& s : report.sequences) {
    out << fmt::format("{},{},{},{},{},{}\n", s.name, s.frames, s.angular, s.elbow, s.positional, s.jitter);
  }
  out << fmt::format("aggregate,{},{},{},{},{}\n", report.frames, report.angular.mean, report.elbow.mean,
                     report.positional.mean, report.jitter.mean);
  if (!out) throw IoError("failed writing " + path.string());
}

GenMetricsReport generation_metrics(std::span<const nn::Tensor> generated, std::span<const nn::Tensor> real,
                                    const GenMetricsConfig& config) {
  if (generated.empty() || real.empty()) throw LengthError("generation metrics need non-empty window sets");
  double lo = real.front()[0], hi = lo;
  for (const auto& w : real) {
    const auto [mn, mx] = std::minmax_element(w.data().begin(), w.data().end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
  }
  const double range = hi > lo ? hi - lo : 1.0;
  GenMetricsReport r;
  r.frechet = projected_frechet(generated, real, config.projection_dim, config.projection_seed);
  r.windows = std::min(generated.size(), real.size());
  const SsimConfig sc{config.ssim_window, range};
  for (std::size_t i = 0; i < r.windows; ++i) {
    r.psnr += psnr(generated[i], real[i], range);
    r.ssim += ssim(generated[i], real[i], sc);
  }
  r.psnr /= static_cast<double>(r.windows);
  r.ssim /= static_cast<double>(r.windows);
  return r;
}

nlohmann::json to_json(const GenMetricsReport& report) {
  return {{"frechet_projected", report.frechet},
          {"psnr_db", report.psnr},
          {"ssim", report.ssim},
          {"windows", report.windows}};
}

void write_csv(const std::filesystem::path& path, const GenMetricsReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frechet_projected,psnr_db,ssim,windows\n";
  out << fmt::format("{},{},{},{}\n", report.frechet, report.psnr, report.ssim, report.windows);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace flexpose::eval
