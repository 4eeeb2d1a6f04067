// SPDX-License-Identifier: Apache-2.0
#include "flexpose/pfp/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "flexpose/error.hpp"
#include "flexpose/nn/adam.hpp"
#include "flexpose/pfp/loss.hpp"

namespace flexpose::pfp {

void PfpSequence::validate() const {
  if (flex.size() != imu.size() || poses.size() != imu.size()) {
    throw LengthError(fmt::format("sequence '{}': imu/flex/pose lengths {}/{}/{} differ", name, imu.size(),
                                  flex.size(), poses.size()));
  }
}

nlohmann::json PfpTrainOptions::to_json() const {
  return {{"iterations", iterations},       {"batch", batch},         {"subsequence", subsequence},
          {"learning_rate", learning_rate}, {"weight_decay", weight_decay}, {"clip_norm", clip_norm},
          {"snapshot_every", snapshot_every}};
}

PfpTrainOptions PfpTrainOptions::from_json(const nlohmann::json& j) {
  PfpTrainOptions o;
  o.iterations = j.value("iterations", o.iterations);
  o.batch = j.value("batch", o.batch);
  o.subsequence = j.value("subsequence", o.subsequence);
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.weight_decay = j.value("weight_decay", o.weight_decay);
  o.clip_norm = j.value("clip_norm", o.clip_norm);
  o.snapshot_every = j.value("snapshot_every", o.snapshot_every);
  if (o.batch == 0 || o.subsequence == 0) throw ValidationError("batch and subsequence must be positive");
  return o;
}

namespace {

double tenth_mean(const std::vector<double>& v, bool tail) {
  if (v.empty()) return 0.0;
  const std::size_t n = std::max<std::size_t>(1, v.size() / 10);
  const auto begin = tail ? v.end() - static_cast<std::ptrdiff_t>(n) : v.begin();
  return std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
}

// Frame-major copies of one sequence, inputs already normalized.
struct Prepared {
  nn::Tensor imu_n, flex_n, theta, p, flexion;
};

nn::Tensor positions_row_major(const kin::EndpointSet& e) {
  nn::Tensor t = nn::Tensor::matrix(1, kPositionDim);
  for (std::size_t n = 1; n < kin::kNumNodes; ++n)
    for (int k = 0; k < 3; ++k) t[3 * (n - 1) + k] = e.position[n][k];
  return t;
}

Prepared prepare(const PfpModel& model, const PfpSequence& seq) {
  seq.validate();
  const std::size_t n = seq.size();
  nn::Tensor imu = nn::Tensor::matrix(n, synth::kImuFrameSize), flex = nn::Tensor::matrix(n, synth::kNumFlex);
  Prepared out{{}, {}, nn::Tensor::matrix(n, kRotationDim), nn::Tensor::matrix(n, kPositionDim), {}};
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t c = 0; c < synth::kImuFrameSize; ++c) imu(k, c) = seq.imu[k].ch[c];
    flex(k, 0) = seq.flex[k].left;
    flex(k, 1) = seq.flex[k].right;
    for (std::size_t j = 0; j < kin::kNumJoints; ++j)
      for (int a = 0; a < 3; ++a) out.theta(k, 3 * j + a) = seq.poses[k].theta[j][a];
    const nn::Tensor p = positions_row_major(kin::fk(model.skeleton(), seq.poses[k]));
    std::copy_n(p.raw(), kPositionDim, out.p.row(k).data());
  }
  out.imu_n = model.normalize_imu(imu);
  out.flex_n = model.normalize_flex(flex);
  out.flexion = elbow_flexion_values(elbow_columns(out.theta), model.skeleton());
  return out;
}

nn::Tensor gather(const std::vector<Prepared>& data, nn::Tensor Prepared::*field,
                  const std::vector<std::pair<std::size_t, std::size_t>>& starts, std::size_t t) {
  const std::size_t cols = (data[starts[0].first].*field).cols();
  nn::Tensor out = nn::Tensor::matrix(starts.size(), cols);
  for (std::size_t b = 0; b < starts.size(); ++b) {
    const nn::Tensor& src = data[starts[b].first].*field;
    std::copy_n(src.row(starts[b].second + t).data(), cols, out.row(b).data());
  }
  return out;
}

}  // namespace

double PfpTrainReport::initial_loss() const { return tenth_mean(total, false); }
double PfpTrainReport::final_loss() const { return tenth_mean(total, true); }

void fit_normalizers(PfpModel& model, std::span<const PfpSequence> sequences) {
  nn::StatsAccumulator imu(synth::kImuFrameSize), flex(synth::kNumFlex), pos(kPositionDim);
  std::vector<double> row(synth::kImuFrameSize);
  for (const auto& seq : sequences) {
    seq.validate();
    for (std::size_t k = 0; k < seq.size(); ++k) {
      for (std::size_t c = 0; c < synth::kImuFrameSize; ++c) row[c] = seq.imu[k].ch[c];
      imu.add(row);
      const std::array<double, 2> f = {seq.flex[k].left * std::numbers::pi / 180.0,
                                       seq.flex[k].right * std::numbers::pi / 180.0};
      flex.add(f);
      pos.add(positions_row_major(kin::fk(model.skeleton(), seq.poses[k])).data());
    }
  }
  if (imu.count() == 0) throw LengthError("no frames to fit normalizers on");
  // A floor keeps near-constant channels (e.g. a static sensor axis) from
  // being blown up.
  model.imu_norm = imu.finish(1e-3);
  model.flex_norm = flex.finish(1e-3);
  model.position_norm = pos.finish(1e-3);
}

PfpTrainReport train_pfp(PfpModel& model, std::span<const PfpSequence> sequences, const PfpTrainOptions& options,
                         std::uint64_t seed, const PfpProgress& progress) {
  if (sequences.empty()) throw LengthError("no training sequences");
  fit_normalizers(model, sequences);
  std::size_t shortest = sequences.front().size();
  for (const auto& s : sequences) shortest = std::min(shortest, s.size());
  const std::size_t len = std::min(options.subsequence, shortest);
  if (len == 0) throw LengthError("empty training sequence");

  std::vector<Prepared> data;
  std::vector<double> weights;
  for (const auto& s : sequences) {
    data.push_back(prepare(model, s));
    weights.push_back(static_cast<double>(s.size() - len + 1));
  }

  nn::Rng rng(seed);
  std::discrete_distribution<std::size_t> pick_seq(weights.begin(), weights.end());
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = options.learning_rate;
  adam_cfg.weight_decay = options.weight_decay;
  const nn::ParameterList params = model.parameters();
  nn::Adam adam(params, adam_cfg);

  std::vector<nn::Tensor> snapshot;
  auto take_snapshot = [&] {
    snapshot.clear();
    for (const nn::Parameter* p : params) snapshot.push_back(p->value);
  };
  auto diverged = [&](std::size_t it, const std::string& why) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snapshot[i];
    return TrainingError(fmt::format("PFP training diverged at iteration {} ({}); last finite parameters restored",
                                     it, why));
  };
  take_snapshot();

  PfpTrainReport report;
  const double inv_len = 1.0 / static_cast<double>(len);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    std::vector<std::pair<std::size_t, std::size_t>> starts(options.batch);
    for (auto& st : starts) {
      st.first = pick_seq(rng);
      st.second = std::uniform_int_distribution<std::size_t>(0, data[st.first].imu_n.rows() - len)(rng);
    }
    nn::Graph g;
    auto state = model.graph_state(g, model.zero_state(options.batch));
    std::vector<nn::Var> totals;
    double lp = 0.0, lr = 0.0, le = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const nn::Var imu = g.constant(gather(data, &Prepared::imu_n, starts, t));
      const nn::Var flex = g.constant(gather(data, &Prepared::flex_n, starts, t));
      const auto out = model.step(g, imu, flex, state);
      const auto terms = pfp_loss(g, out.theta, out.p, gather(data, &Prepared::theta, starts, t),
                                  gather(data, &Prepared::p, starts, t), gather(data, &Prepared::flexion, starts, t),
                                  model.skeleton(), model.config().weights);
      totals.push_back(terms.total);
      lp += g.value(terms.position)[0];
      lr += g.value(terms.rotation)[0];
      le += g.value(terms.elbow)[0];
    }
    nn::Var loss = totals.front();
    for (std::size_t t = 1; t < totals.size(); ++t) loss = g.add(loss, totals[t]);
    loss = g.scale(loss, inv_len);
    const double value = g.value(loss)[0];
    if (!std::isfinite(value)) throw diverged(it, "non-finite loss");
    adam.zero_grad();
    try {
      g.backward(loss);
    } catch (const NumericError& e) {
      throw diverged(it, e.what());
    }
    nn::clip_grad_norm(params, options.clip_norm);
    adam.step();
    report.total.push_back(value);
    report.position.push_back(lp * inv_len);
    report.rotation.push_back(lr * inv_len);
    report.elbow.push_back(le * inv_len);
    if (options.snapshot_every > 0 && (it + 1) % options.snapshot_every == 0) {
      bool finite = true;
      for (const nn::Parameter* p : params) finite = finite && p->value.all_finite();
      if (!finite) throw diverged(it, "non-finite parameters");
      take_snapshot();
    }
    if (progress) progress(it, report);
  }
  return report;
}

std::vector<PfpOutput> run_sequence(const PfpModel& model, const PfpSequence& sequence) {
  sequence.validate();
  PfpStream stream(model);
  std::vector<PfpOutput> out;
  out.reserve(sequence.size());
  for (std::size_t k = 0; k < sequence.size(); ++k) out.push_back(stream.push(sequence.imu[k], sequence.flex[k]));
  return out;
}

std::vector<std::vector<PfpOutput>> run_batch(const PfpModel& model, std::span<const PfpSequence> sequences) {
  const std::size_t b = sequences.size();
  std::size_t longest = 0;
  for (const auto& s : sequences) {
    s.validate();
    longest = std::max(longest, s.size());
  }
  std::vector<std::vector<PfpOutput>> out(b);
  for (std::size_t i = 0; i < b; ++i) out[i].reserve(sequences[i].size());
  if (b == 0) return out;
  auto state = model.zero_state(b);
  for (std::size_t k = 0; k < longest; ++k) {
    nn::Tensor imu = nn::Tensor::matrix(b, synth::kImuFrameSize), flex = nn::Tensor::matrix(b, synth::kNumFlex);
    for (std::size_t i = 0; i < b; ++i) {
      if (k >= sequences[i].size()) continue;
      for (std::size_t c = 0; c < synth::kImuFrameSize; ++c) imu(i, c) = sequences[i].imu[k].ch[c];
      flex(i, 0) = sequences[i].flex[k].left;
      flex(i, 1) = sequences[i].flex[k].right;
    }
    const auto step = model.infer_step(model.normalize_imu(imu), model.normalize_flex(flex), state);
    for (std::size_t i = 0; i < b; ++i)
      if (k < sequences[i].size()) out[i].push_back(to_output(step.theta, step.p, i));
  }
  return out;
}

}  // namespace flexpose::pfp
