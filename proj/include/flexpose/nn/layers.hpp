// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "flexpose/nn/graph.hpp"
#include "flexpose/nn/tensor.hpp"

namespace flexpose::nn {

using Rng = std::mt19937_64;

/// Xavier/Glorot uniform fill of a fan_in x fan_out block.
void xavier_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Fills a square n x n matrix with a random orthogonal matrix.
Tensor random_orthogonal(std::size_t n, Rng& rng);

/// Fully connected layer: y = x W + b.
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var forward(Graph& g, Var x);
  Tensor infer(const Tensor& x) const;
  ParameterList parameters() { return {&weight, &bias}; }

  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }

  Parameter weight;
  Parameter bias;
};

/// Graph-free dense forward, the operation behind Dense::infer.
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct LstmState {
  Tensor h;
  Tensor c;
  static LstmState zeros(std::size_t batch, std::size_t hidden) {
    return {Tensor::matrix(batch, hidden), Tensor::matrix(batch, hidden)};
  }
};

/// One LSTM layer with gates in (input, forget, candidate, output) order.
/// Input weights are Xavier-uniform, recurrent weights orthogonal per gate
/// block and the forget-gate bias starts at 1.
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);

  /// Records one step on the graph; returns (h_t, c_t).
  std::pair<Var, Var> step(Graph& g, Var x, Var h, Var c);
  LstmState infer_step(const Tensor& x, const LstmState& state) const;
  ParameterList parameters() { return {&w_input, &w_recurrent, &bias}; }

  std::size_t input_size() const { return w_input.value.rows(); }
  std::size_t hidden_size() const { return w_recurrent.value.rows(); }

  Parameter w_input;      // I x 4H
  Parameter w_recurrent;  // H x 4H
  Parameter bias;         // 4H
};

/// Graph-free LSTM step shared by inference paths.
LstmState lstm_step(const Tensor& x, const LstmState& prev, const Tensor& w_input,
                    const Tensor& w_recurrent, const Tensor& bias);

/// Stacked unidirectional LSTM.
class LstmStack {
 public:
  using State = std::vector<LstmState>;
  struct GraphState {
    std::vector<Var> h;
    std::vector<Var> c;
  };

  LstmStack() = default;
  LstmStack(const std::string& name, std::size_t input, std::size_t hidden, std::size_t layers,
            Rng& rng);

  State zero_state(std::size_t batch) const;
  GraphState graph_state(Graph& g, const State& s) const;

  /// One time step on the graph; returns the top layer's hidden output.
  Var step(Graph& g, Var x, GraphState& state);
  /// One time step without a graph; returns the top layer's hidden output.
  Tensor infer_step(const Tensor& x, State& state) const;
  /// Detached copy of a graph state, used to carry state across truncated
  /// backprop windows.
  State detach(const Graph& g, const GraphState& s) const;

  ParameterList parameters();
  std::size_t hidden_size() const { return layers_.empty() ? 0 : layers_.front().hidden_size(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().input_size(); }

 private:
  std::vector<LstmLayer> layers_;
};

}  // namespace flexpose::nn
