// SPDX-License-Identifier: Apache-2.0
#include "flexpose/pfp/model.hpp"

#include <cmath>
#include <numbers>

#include "flexpose/error.hpp"
#include "flexpose/nn/checkpoint.hpp"

namespace flexpose::pfp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Per-column (x - mean) / std on the graph, so predicted positions can be fed
// to the downstream networks on the same scale as their training inputs.
nn::Var standardize_op(nn::Graph& g, nn::Var x, const nn::Standardizer& norm) {
  nn::Tensor out = norm.apply(g.value(x));
  const std::vector<double> std = norm.std();
  return g.custom({x}, std::move(out),
                  [std](const nn::Tensor& grad_out, const std::vector<const nn::Tensor*>&,
                        const std::vector<nn::Tensor*>& grads) {
                    if (!grads[0]) return;
                    const std::size_t m = std.size();
                    for (std::size_t i = 0; i < grad_out.size(); ++i) (*grads[0])[i] += grad_out[i] / std[i % m];
                  });
}

}  // namespace

void LossWeights::validate() const {
  if (!(position >= 0.0) || !(rotation >= 0.0) || !(elbow >= 0.0)) {
    throw ValidationError("loss weights must be non-negative");
  }
}

nlohmann::json PfpConfig::to_json() const {
  return {{"hidden", hidden},
          {"layers", layers},
          {"use_flex", use_flex},
          {"weights", {{"position", weights.position}, {"rotation", weights.rotation}, {"elbow", weights.elbow}}}};
}

PfpConfig PfpConfig::from_json(const nlohmann::json& j) {
  PfpConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.use_flex = j.value("use_flex", c.use_flex);
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    c.weights.position = w.value("position", c.weights.position);
    c.weights.rotation = w.value("rotation", c.weights.rotation);
    c.weights.elbow = w.value("elbow", c.weights.elbow);
  }
  c.weights.validate();
  if (c.hidden == 0 || c.layers == 0) throw ValidationError("network size must be positive");
  return c;
}

PfpModel::PfpModel(const PfpConfig& config, const kin::Skeleton& skeleton, std::uint64_t seed)
    : config_(config), skeleton_(skeleton) {
  config_.weights.validate();
  skeleton_.validate();
  nn::Rng rng(seed);
  position_lstm_ = nn::LstmStack("pfp.position", synth::kImuFrameSize, config.hidden, config.layers, rng);
  position_head_ = nn::Dense("pfp.position.head", config.hidden, kPositionDim, rng);
  elbow_lstm_ = nn::LstmStack("pfp.elbow", kElbowInput, config.hidden, config.layers, rng);
  elbow_head_ = nn::Dense("pfp.elbow.head", config.hidden, kElbowDim, rng);
  other_lstm_ = nn::LstmStack("pfp.other", kOtherInput, config.hidden, config.layers, rng);
  other_head_ = nn::Dense("pfp.other.head", config.hidden, kOtherDim, rng);
}

PfpModel::State PfpModel::zero_state(std::size_t batch) const {
  return {position_lstm_.zero_state(batch), elbow_lstm_.zero_state(batch), other_lstm_.zero_state(batch)};
}

PfpModel::GraphState PfpModel::graph_state(nn::Graph& g, const State& s) const {
  return {position_lstm_.graph_state(g, s.position), elbow_lstm_.graph_state(g, s.elbow),
          other_lstm_.graph_state(g, s.other)};
}

PfpModel::State PfpModel::detach(const nn::Graph& g, const GraphState& s) const {
  return {position_lstm_.detach(g, s.position), elbow_lstm_.detach(g, s.elbow), other_lstm_.detach(g, s.other)};
}

nn::Tensor PfpModel::normalize_imu(const nn::Tensor& imu) const { return imu_norm.apply(imu); }

nn::Tensor PfpModel::normalize_flex(const nn::Tensor& flex_deg) const {
  if (!config_.use_flex) return nn::Tensor::matrix(flex_deg.rows(), synth::kNumFlex);
  nn::Tensor rad = flex_deg;
  for (std::size_t i = 0; i < rad.size(); ++i) rad[i] *= kDegToRad;
  return flex_norm.apply(rad);
}

PfpModel::GraphStep PfpModel::step(nn::Graph& g, nn::Var imu_n, nn::Var flex_n, GraphState& state) {
  const nn::Var p = position_head_.forward(g, position_lstm_.step(g, imu_n, state.position));
  const nn::Var p_n = standardize_op(g, p, position_norm);
  const nn::Var elbow_in = g.concat_cols({flex_n, imu_n, p_n});
  const nn::Var elbow = elbow_head_.forward(g, elbow_lstm_.step(g, elbow_in, state.elbow));
  const nn::Var other_in = g.concat_cols({imu_n, p_n});
  const nn::Var other = other_head_.forward(g, other_lstm_.step(g, other_in, state.other));
  return {assemble_theta(g, elbow, other), p};
}

PfpModel::Step PfpModel::infer_step(const nn::Tensor& imu_n, const nn::Tensor& flex_n, State& state) const {
  const std::size_t b = imu_n.rows();
  nn::Tensor p = position_head_.infer(position_lstm_.infer_step(imu_n, state.position));
  const nn::Tensor p_n = position_norm.apply(p);
  nn::Tensor elbow_in = nn::Tensor::matrix(b, kElbowInput), other_in = nn::Tensor::matrix(b, kOtherInput);
  for (std::size_t r = 0; r < b; ++r) {
    double* e = elbow_in.row(r).data();
    double* o = other_in.row(r).data();
    for (std::size_t c = 0; c < synth::kNumFlex; ++c) *e++ = flex_n(r, c);
    for (std::size_t c = 0; c < synth::kImuFrameSize; ++c) *e++ = *o++ = imu_n(r, c);
    for (std::size_t c = 0; c < kPositionDim; ++c) *e++ = *o++ = p_n(r, c);
  }
  const nn::Tensor elbow = elbow_head_.infer(elbow_lstm_.infer_step(elbow_in, state.elbow));
  const nn::Tensor other = other_head_.infer(other_lstm_.infer_step(other_in, state.other));
  return {assemble_theta(elbow, other), std::move(p)};
}

nn::ParameterList PfpModel::parameters() {
  nn::ParameterList out;
  auto append = [&out](const nn::ParameterList& ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  append(position_lstm_.parameters());
  append(position_head_.parameters());
  append(elbow_lstm_.parameters());
  append(elbow_head_.parameters());
  append(other_lstm_.parameters());
  append(other_head_.parameters());
  return out;
}

nn::Var assemble_theta(nn::Graph& g, nn::Var elbow, nn::Var other) {
  // Other joints 0..6 precede the elbows (7, 8); the head (9) follows.
  return g.concat_cols({g.slice_cols(other, 0, 21), elbow, g.slice_cols(other, 21, kOtherDim)});
}

nn::Tensor assemble_theta(const nn::Tensor& elbow, const nn::Tensor& other) {
  nn::Tensor theta = nn::Tensor::matrix(elbow.rows(), kRotationDim);
  for (std::size_t r = 0; r < elbow.rows(); ++r) {
    for (std::size_t c = 0; c < 21; ++c) theta(r, c) = other(r, c);
    for (std::size_t c = 0; c < kElbowDim; ++c) theta(r, 21 + c) = elbow(r, c);
    for (std::size_t c = 21; c < kOtherDim; ++c) theta(r, kElbowDim + c) = other(r, c);
  }
  return theta;
}

PfpOutput to_output(const nn::Tensor& theta, const nn::Tensor& p, std::size_t row) {
  PfpOutput out;
  for (std::size_t j = 0; j < kin::kNumJoints; ++j)
    out.pose.theta[j] = kin::Vec3(theta(row, 3 * j), theta(row, 3 * j + 1), theta(row, 3 * j + 2));
  for (std::size_t n = 0; n < kin::kNumPositions; ++n)
    out.positions[n] = kin::Vec3(p(row, 3 * n), p(row, 3 * n + 1), p(row, 3 * n + 2));
  return out;
}

PfpStream::PfpStream(const PfpModel& model) : model_(&model), state_(model.zero_state(1)) {}

PfpOutput PfpStream::push(const synth::ImuFrame& imu, const synth::FlexFrame& flex_deg) {
  nn::Tensor x = nn::Tensor::matrix(1, synth::kImuFrameSize);
  for (std::size_t c = 0; c < synth::kImuFrameSize; ++c) x[c] = imu.ch[c];
  nn::Tensor f = nn::Tensor::matrix(1, synth::kNumFlex);
  f[0] = flex_deg.left;
  f[1] = flex_deg.right;
  if (!x.all_finite() || !f.all_finite()) throw NumericError("non-finite sensor frame rejected");
  PfpModel::State next = state_;
  const auto step = model_->infer_step(model_->normalize_imu(x), model_->normalize_flex(f), next);
  state_ = std::move(next);
  return to_output(step.theta, step.p);
}

void PfpStream::reset() { state_ = model_->zero_state(1); }

void save_pfp(const std::filesystem::path& path, PfpModel& model, std::uint64_t seed) {
  nn::CheckpointMeta meta;
  meta.kind = "pfp";
  meta.seed = seed;
  meta.extra = {{"config", model.config().to_json()}, {"skeleton", model.skeleton().to_json()}};
  std::vector<nn::NamedTensor> tensors;
  for (const auto* part : {&model.imu_norm, &model.flex_norm, &model.position_norm}) {
    const char* prefix = part == &model.imu_norm ? "norm.imu" : part == &model.flex_norm ? "norm.flex" : "norm.position";
    for (auto& t : part->to_tensors(prefix)) tensors.push_back(std::move(t));
  }
  for (const nn::Parameter* p : model.parameters()) tensors.push_back({p->name, p->value});
  nn::save_checkpoint(path, meta, tensors);
}

PfpModel load_pfp(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.meta.kind != "pfp") throw IoError(path.string() + " is a '" + ckpt.meta.kind + "' checkpoint, not pfp");
  PfpModel model(PfpConfig::from_json(ckpt.meta.extra.at("config")),
                 kin::Skeleton::from_json(ckpt.meta.extra.at("skeleton")), 0);
  model.imu_norm = nn::Standardizer::from_checkpoint(ckpt, "norm.imu");
  model.flex_norm = nn::Standardizer::from_checkpoint(ckpt, "norm.flex");
  model.position_norm = nn::Standardizer::from_checkpoint(ckpt, "norm.position");
  nn::load_parameters(ckpt, model.parameters());
  return model;
}

}  // namespace flexpose::pfp
