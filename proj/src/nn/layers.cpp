// SPDX-License-Identifier: Apache-2.0
#include "flexpose/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "flexpose/error.hpp"
#include "flexpose/nn/kernels.hpp"

namespace flexpose::nn {

void xavier_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : w.data()) v = dist(rng);
}

Tensor random_orthogonal(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign fix makes the distribution uniform over O(n).
  for (Eigen::Index c = 0; c < q.cols(); ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  Tensor out = Tensor::matrix(n, n);
  for (std::size_t r2 = 0; r2 < n; ++r2)
    for (std::size_t c = 0; c < n; ++c)
      out(r2, c) = q(static_cast<Eigen::Index>(r2), static_cast<Eigen::Index>(c));
  return out;
}

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", Tensor::matrix(in, out)),
      bias(name + ".bias", Tensor::vector(out)) {
  xavier_uniform(weight.value, in, out, rng);
}

Var Dense::forward(Graph& g, Var x) {
  return g.add_bias(g.matmul(x, g.param(weight)), g.param(bias));
}

Tensor Dense::infer(const Tensor& x) const { return dense_forward(x, weight.value, bias.value); }

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.cols() != w.rows()) {
    throw DimensionError("dense_forward: input " + x.shape_string() + " vs weight " +
                         w.shape_string());
  }
  if (b.size() != w.cols()) {
    throw DimensionError("dense_forward: bias " + b.shape_string() + " vs weight " +
                         w.shape_string());
  }
  return kernels::affine(x, w, b);
}

LstmLayer::LstmLayer(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng)
    : w_input(name + ".w_input", Tensor::matrix(input, 4 * hidden)),
      w_recurrent(name + ".w_recurrent", Tensor::matrix(hidden, 4 * hidden)),
      bias(name + ".bias", Tensor::vector(4 * hidden)) {
  const std::size_t cols = 4 * hidden;
  for (std::size_t gate = 0; gate < 4; ++gate) {
    Tensor block = Tensor::matrix(input, hidden);
    xavier_uniform(block, input, hidden, rng);
    for (std::size_t r = 0; r < input; ++r)
      for (std::size_t j = 0; j < hidden; ++j) w_input.value[r * cols + gate * hidden + j] = block(r, j);
    const Tensor q = random_orthogonal(hidden, rng);
    for (std::size_t r = 0; r < hidden; ++r)
      for (std::size_t j = 0; j < hidden; ++j) w_recurrent.value[r * cols + gate * hidden + j] = q(r, j);
  }
  for (std::size_t j = 0; j < hidden; ++j) bias.value[hidden + j] = 1.0;
}

std::pair<Var, Var> LstmLayer::step(Graph& g, Var x, Var h, Var c) {
  const std::size_t hidden = hidden_size();
  Var gates = g.add_bias(g.add(g.matmul(x, g.param(w_input)), g.matmul(h, g.param(w_recurrent))),
                         g.param(bias));
  Var hc = g.lstm_cell(gates, c);
  return {g.slice_cols(hc, 0, hidden), g.slice_cols(hc, hidden, 2 * hidden)};
}

LstmState LstmLayer::infer_step(const Tensor& x, const LstmState& state) const {
  return lstm_step(x, state, w_input.value, w_recurrent.value, bias.value);
}

LstmState lstm_step(const Tensor& x, const LstmState& prev, const Tensor& w_input,
                    const Tensor& w_recurrent, const Tensor& bias) {
  const std::size_t hidden = w_recurrent.rows();
  if (prev.h.cols() != hidden || prev.c.cols() != hidden || prev.h.rows() != x.rows()) {
    throw DimensionError("lstm_step: state " + prev.h.shape_string() + " vs hidden " +
                         std::to_string(hidden));
  }
  Tensor gates;
  kernels::matmul(x, w_input, gates);
  Tensor rec;
  kernels::matmul(prev.h, w_recurrent, rec);
  for (std::size_t i = 0; i < gates.size(); ++i) gates[i] += rec[i];
  const std::size_t m = gates.cols();
  for (std::size_t r = 0; r < gates.rows(); ++r)
    for (std::size_t j = 0; j < m; ++j) gates[r * m + j] += bias[j];
  LstmState next;
  kernels::lstm_cell_forward(gates, prev.c, next.h, next.c);
  return next;
}

LstmStack::LstmStack(const std::string& name, std::size_t input, std::size_t hidden,
                     std::size_t layers, Rng& rng) {
  for (std::size_t l = 0; l < layers; ++l)
    layers_.emplace_back(name + ".lstm" + std::to_string(l), l == 0 ? input : hidden, hidden, rng);
}

LstmStack::State LstmStack::zero_state(std::size_t batch) const {
  State s;
  for (const auto& layer : layers_) s.push_back(LstmState::zeros(batch, layer.hidden_size()));
  return s;
}

LstmStack::GraphState LstmStack::graph_state(Graph& g, const State& s) const {
  GraphState gs;
  for (const auto& layer_state : s) {
    gs.h.push_back(g.constant(layer_state.h));
    gs.c.push_back(g.constant(layer_state.c));
  }
  return gs;
}

Var LstmStack::step(Graph& g, Var x, GraphState& state) {
  Var input = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto [h, c] = layers_[l].step(g, input, state.h[l], state.c[l]);
    state.h[l] = h;
    state.c[l] = c;
    input = h;
  }
  return input;
}

Tensor LstmStack::infer_step(const Tensor& x, State& state) const {
  const Tensor* input = &x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    state[l] = layers_[l].infer_step(*input, state[l]);
    input = &state[l].h;
  }
  return *input;
}

LstmStack::State LstmStack::detach(const Graph& g, const GraphState& s) const {
  State out;
  for (std::size_t l = 0; l < s.h.size(); ++l) out.push_back({g.value(s.h[l]), g.value(s.c[l])});
  return out;
}

ParameterList LstmStack::parameters() {
  ParameterList out;
  for (auto& layer : layers_)
    for (Parameter* p : layer.parameters()) out.push_back(p);
  return out;
}

}  // namespace flexpose::nn
