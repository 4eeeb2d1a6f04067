// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "flexpose/nn/tensor.hpp"

namespace flexpose::nn {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.shape());
  }
  void zero_grad() { grad.fill(0.0); }
};

using ParameterList = std::vector<Parameter*>;

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

enum class OpKind {
  kConstant,
  kParameter,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kAddBias,
  kScale,
  kAddScalar,
  kSigmoid,
  kTanh,
  kRelu,
  kExp,
  kSquare,
  kAbs,
  kConcatCols,
  kSliceCols,
  kLstmCell,
  kSum,
  kMean,
  kMse,
  kCustom,
};

/// Tape-based reverse-mode autodiff. Nodes are appended in evaluation order,
/// which is a topological order, so backward() walks the tape in reverse.
/// A graph is built for one forward pass and discarded afterwards.
class Graph {
 public:
  /// Receives the node's output gradient and must accumulate into the
  /// gradients of the inputs that require them.
  using CustomBackward = std::function<void(const Tensor& grad_out,
                                            const std::vector<const Tensor*>& inputs,
                                            const std::vector<Tensor*>& input_grads)>;

  Var constant(Tensor value);
  /// Binds a parameter; repeated calls for the same parameter reuse one node.
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_bias(Var x, Var bias);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var square(Var a);
  Var abs(Var a);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  /// Fused LSTM cell on pre-activation gates; returns [h | c] (N x 2H).
  Var lstm_cell(Var gates, Var c_prev);
  Var sum(Var a);
  Var mean(Var a);
  Var mse(Var a, Var b);
  Var custom(const std::vector<Var>& inputs, Tensor value, CustomBackward backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every node that needs a
  /// gradient, then accumulates into bound parameters.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Graph&, Node&)> backward;
  };

  Var push(OpKind kind, std::vector<std::size_t> inputs, Tensor value,
           std::function<void(Graph&, Node&)> backward);
  Tensor& grad_of(std::size_t id);
  bool needs(std::size_t id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> bound_;
};

}  // namespace flexpose::nn
