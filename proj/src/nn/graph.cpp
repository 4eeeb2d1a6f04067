// SPDX-License-Identifier: Apache-2.0
#include "flexpose/nn/graph.hpp"

#include <cmath>

#include "flexpose/error.hpp"
#include "flexpose/nn/kernels.hpp"

namespace flexpose::nn {

namespace {

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Var Graph::push(OpKind kind, std::vector<std::size_t> inputs, Tensor value,
                std::function<void(Graph&, Node&)> backward) {
  Node node;
  node.kind = kind;
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  for (std::size_t id : node.inputs) node.requires_grad = node.requires_grad || needs(id);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tensor& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Var Graph::constant(Tensor value) { return push(OpKind::kConstant, {}, std::move(value), {}); }

Var Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{it->second};
  Node node;
  node.kind = OpKind::kParameter;
  node.value = p.value;
  node.requires_grad = true;
  Parameter* target = &p;
  node.backward = [target](Graph&, Node& self) {
    if (self.grad.size() != target->grad.size()) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) target->grad[i] += self.grad[i];
  };
  nodes_.push_back(std::move(node));
  bound_[&p] = nodes_.size() - 1;
  return Var{nodes_.size() - 1};
}

Var Graph::matmul(Var a, Var b) {
  Tensor out;
  kernels::gemm(value(a), value(b), out);
  const std::size_t ia = a.id, ib = b.id;
  return push(OpKind::kMatmul, {ia, ib}, std::move(out), [ia, ib](Graph& g, Node& self) {
    if (g.needs(ia)) kernels::gemm_a_bt_acc(self.grad, g.nodes_[ib].value, g.grad_of(ia));
    if (g.needs(ib)) kernels::gemm_at_b_acc(g.nodes_[ia].value, self.grad, g.grad_of(ib));
  });
}

Var Graph::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += vb[i];
  const std::size_t ia = a.id, ib = b.id;
  return push(OpKind::kAdd, {ia, ib}, std::move(out), [ia, ib](Graph& g, Node& self) {
    for (std::size_t id : {ia, ib}) {
      if (!g.needs(id)) continue;
      Tensor& d = g.grad_of(id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
  });
}

Var Graph::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
  const std::size_t ia = a.id, ib = b.id;
  return push(OpKind::kSub, {ia, ib}, std::move(out), [ia, ib](Graph& g, Node& self) {
    if (g.needs(ia)) {
      Tensor& d = g.grad_of(ia);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
    if (g.needs(ib)) {
      Tensor& d = g.grad_of(ib);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= self.grad[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  const std::size_t ia = a.id, ib = b.id;
  return push(OpKind::kMul, {ia, ib}, std::move(out), [ia, ib](Graph& g, Node& self) {
    if (g.needs(ia)) {
      Tensor& d = g.grad_of(ia);
      const Tensor& other = g.nodes_[ib].value;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * other[i];
    }
    if (g.needs(ib)) {
      Tensor& d = g.grad_of(ib);
      const Tensor& other = g.nodes_[ia].value;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * other[i];
    }
  });
}

Var Graph::add_bias(Var x, Var bias) {
  const Tensor& vx = value(x);
  const Tensor& vb = value(bias);
  const std::size_t m = vx.cols();
  if (vb.size() != m) {
    throw DimensionError("add_bias: bias " + vb.shape_string() + " vs " + vx.shape_string());
  }
  Tensor out = vx;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] += vb[j];
  const std::size_t ix = x.id, ib = bias.id;
  return push(OpKind::kAddBias, {ix, ib}, std::move(out), [ix, ib, m](Graph& g, Node& self) {
    if (g.needs(ix)) {
      Tensor& d = g.grad_of(ix);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
    }
    if (g.needs(ib)) {
      Tensor& d = g.grad_of(ib);
      for (std::size_t r = 0; r < self.grad.rows(); ++r)
        for (std::size_t j = 0; j < m; ++j) d[j] += self.grad[r * m + j];
    }
  });
}

Var Graph::scale(Var a, double s) {
  Tensor out = map(value(a), [s](double v) { return v * s; });
  const std::size_t ia = a.id;
  return push(OpKind::kScale, {ia}, std::move(out), [ia, s](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * s;
  });
}

Var Graph::add_scalar(Var a, double s) {
  Tensor out = map(value(a), [s](double v) { return v + s; });
  const std::size_t ia = a.id;
  return push(OpKind::kAddScalar, {ia}, std::move(out), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i];
  });
}

Var Graph::sigmoid(Var a) {
  Tensor out = map(value(a), kernels::sigmoid);
  const std::size_t ia = a.id;
  return push(OpKind::kSigmoid, {ia}, std::move(out), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double y = self.value[i];
      d[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var Graph::tanh(Var a) {
  Tensor out = map(value(a), [](double v) { return std::tanh(v); });
  const std::size_t ia = a.id;
  return push(OpKind::kTanh, {ia}, std::move(out), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double y = self.value[i];
      d[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Var Graph::relu(Var a) {
  Tensor out = map(value(a), [](double v) { return v > 0.0 ? v : 0.0; });
  const std::size_t ia = a.id;
  return push(OpKind::kRelu, {ia}, std::move(out), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    const Tensor& in = g.nodes_[ia].value;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (in[i] > 0.0) d[i] += self.grad[i];
  });
}

Var Graph::exp(Var a) {
  Tensor out = map(value(a), [](double v) { return std::exp(v); });
  const std::size_t ia = a.id;
  return push(OpKind::kExp, {ia}, std::move(out), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * self.value[i];
  });
}

Var Graph::square(Var a) {
  Tensor out = map(value(a), [](double v) { return v * v; });
  const std::size_t ia = a.id;
  return push(OpKind::kSquare, {ia}, std::move(out), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    const Tensor& in = g.nodes_[ia].value;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[i] * 2.0 * in[i];
  });
}

Var Graph::abs(Var a) {
  Tensor out = map(value(a), [](double v) { return std::fabs(v); });
  const std::size_t ia = a.id;
  return push(OpKind::kAbs, {ia}, std::move(out), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    const Tensor& in = g.nodes_[ia].value;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double sgn = in[i] > 0.0 ? 1.0 : (in[i] < 0.0 ? -1.0 : 0.0);
      d[i] += self.grad[i] * sgn;
    }
  });
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = value(parts.front()).rows();
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& v = value(p);
    if (v.rows() != n) throw DimensionError("concat_cols: row count mismatch");
    widths.push_back(v.cols());
    ids.push_back(p.id);
    total += v.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = value(parts[k]);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < widths[k]; ++j) out[r * total + offset + j] = v[r * widths[k] + j];
    offset += widths[k];
  }
  return push(OpKind::kConcatCols, ids, std::move(out),
              [ids, widths, total](Graph& g, Node& self) {
                std::size_t off = 0;
                for (std::size_t k = 0; k < ids.size(); ++k) {
                  if (g.needs(ids[k])) {
                    Tensor& d = g.grad_of(ids[k]);
                    const std::size_t w = widths[k];
                    for (std::size_t r = 0; r < d.rows(); ++r)
                      for (std::size_t j = 0; j < w; ++j) d[r * w + j] += self.grad[r * total + off + j];
                  }
                  off += widths[k];
                }
              });
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& v = value(a);
  const std::size_t m = v.cols();
  if (begin >= end || end > m) throw DimensionError("slice_cols: bad range");
  const std::size_t w = end - begin;
  Tensor out = Tensor::matrix(v.rows(), w);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = v[r * m + begin + j];
  const std::size_t ia = a.id;
  return push(OpKind::kSliceCols, {ia}, std::move(out), [ia, begin, w, m](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t j = 0; j < w; ++j) d[r * m + begin + j] += self.grad[r * w + j];
  });
}

Var Graph::lstm_cell(Var gates, Var c_prev) {
  Tensor h, c;
  kernels::lstm_cell_forward(value(gates), value(c_prev), h, c);
  const std::size_t n = h.rows(), hidden = h.cols();
  Tensor out = Tensor::matrix(n, 2 * hidden);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < hidden; ++j) {
      out[r * 2 * hidden + j] = h[r * hidden + j];
      out[r * 2 * hidden + hidden + j] = c[r * hidden + j];
    }
  const std::size_t ig = gates.id, ic = c_prev.id;
  return push(OpKind::kLstmCell, {ig, ic}, std::move(out),
              [ig, ic, c = std::move(c), n, hidden](Graph& g, Node& self) {
                Tensor dh = Tensor::matrix(n, hidden);
                Tensor dc = Tensor::matrix(n, hidden);
                for (std::size_t r = 0; r < n; ++r)
                  for (std::size_t j = 0; j < hidden; ++j) {
                    dh[r * hidden + j] = self.grad[r * 2 * hidden + j];
                    dc[r * hidden + j] = self.grad[r * 2 * hidden + hidden + j];
                  }
                Tensor d_gates = Tensor::matrix(n, 4 * hidden);
                Tensor d_cp = Tensor::matrix(n, hidden);
                kernels::lstm_cell_backward(g.nodes_[ig].value, g.nodes_[ic].value, c, &dh, &dc,
                                            d_gates, d_cp);
                if (g.needs(ig)) {
                  Tensor& d = g.grad_of(ig);
                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += d_gates[i];
                }
                if (g.needs(ic)) {
                  Tensor& d = g.grad_of(ic);
                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += d_cp[i];
                }
              });
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  const std::size_t ia = a.id;
  return push(OpKind::kSum, {ia}, Tensor::scalar(s), [ia](Graph& g, Node& self) {
    Tensor& d = g.grad_of(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += self.grad[0];
  });
}

Var Graph::mean(Var a) {
  const std::size_t count = value(a).size();
  if (count == 0) throw DimensionError("mean of empty tensor");
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  const std::size_t ia = a.id;
  return push(OpKind::kMean, {ia}, Tensor::scalar(s / static_cast<double>(count)),
              [ia, count](Graph& g, Node& self) {
                Tensor& d = g.grad_of(ia);
                const double gv = self.grad[0] / static_cast<double>(count);
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv;
              });
}

Var Graph::mse(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "mse");
  const std::size_t count = va.size();
  if (count == 0) throw DimensionError("mse of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  const std::size_t ia = a.id, ib = b.id;
  return push(OpKind::kMse, {ia, ib}, Tensor::scalar(s / static_cast<double>(count)),
              [ia, ib, count](Graph& g, Node& self) {
                const Tensor& xa = g.nodes_[ia].value;
                const Tensor& xb = g.nodes_[ib].value;
                const double k = 2.0 * self.grad[0] / static_cast<double>(count);
                if (g.needs(ia)) {
                  Tensor& d = g.grad_of(ia);
                  for (std::size_t i = 0; i < count; ++i) d[i] += k * (xa[i] - xb[i]);
                }
                if (g.needs(ib)) {
                  Tensor& d = g.grad_of(ib);
                  for (std::size_t i = 0; i < count; ++i) d[i] -= k * (xa[i] - xb[i]);
                }
              });
}

Var Graph::custom(const std::vector<Var>& inputs, Tensor value, CustomBackward backward) {
  std::vector<std::size_t> ids;
  for (Var v : inputs) ids.push_back(v.id);
  return push(OpKind::kCustom, ids, std::move(value),
              [ids, fn = std::move(backward)](Graph& g, Node& self) {
                std::vector<const Tensor*> in;
                std::vector<Tensor*> din;
                for (std::size_t id : ids) {
                  in.push_back(&g.nodes_[id].value);
                  din.push_back(g.needs(id) ? &g.grad_of(id) : nullptr);
                }
                fn(self.grad, in, din);
              });
}

void Graph::backward(Var loss) {
  Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1) throw DimensionError("backward: loss must be a scalar");
  if (!root.value.all_finite()) throw NumericError("backward: non-finite loss");
  if (!root.requires_grad) return;
  grad_of(loss.id).fill(1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, n);
  }
  for (const auto& [p, id] : bound_) {
    if (!p->grad.all_finite()) throw NumericError("backward: non-finite gradient in " + p->name);
  }
}

}  // namespace flexpose::nn
