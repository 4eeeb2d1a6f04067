// SPDX-License-Identifier: Apache-2.0
#include "flexpose/nn/kernels.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "flexpose/error.hpp"

namespace flexpose::nn::kernels {

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: " + a.shape_string() + " x " + b.shape_string());
  }
  if (out.rows() != n || out.cols() != m || out.rank() != 2) out = Tensor::matrix(n, m);
  else out.fill(0.0);
  const double* pa = a.raw();
  const double* pb = b.raw();
  double* po = out.raw();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    const double* arow = pa + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = pb + kk * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != n || out.rows() != k || out.cols() != m) {
    throw DimensionError("matmul_at_b: " + a.shape_string() + "^T x " + b.shape_string() +
                         " -> " + out.shape_string());
  }
  const double* pa = a.raw();
  const double* pb = b.raw();
  double* po = out.raw();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * k;
    const double* brow = pb + i * m;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      double* orow = po + kk * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = a.rows(), m = a.cols(), k = b.rows();
  if (b.cols() != m || out.rows() != n || out.cols() != k) {
    throw DimensionError("matmul_a_bt: " + a.shape_string() + " x " + b.shape_string() +
                         "^T -> " + out.shape_string());
  }
  // Transpose b once so the inner loop streams contiguous memory.
  std::vector<double> bt(m * k);
  const double* pb = b.raw();
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < m; ++c) bt[c * k + r] = pb[r * m + c];
  const double* pa = a.raw();
  double* po = out.raw();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * m;
    double* orow = po + i * k;
    for (std::size_t c = 0; c < m; ++c) {
      const double av = arow[c];
      const double* btrow = bt.data() + c * k;
      for (std::size_t j = 0; j < k; ++j) orow[j] += av * btrow[j];
    }
  }
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tensor out;
  matmul(x, w, out);
  const std::size_t m = out.cols();
  if (bias.size() != m) {
    throw DimensionError("affine: bias " + bias.shape_string() + " vs output " +
                         out.shape_string());
  }
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* r = out.raw() + i * m;
    for (std::size_t j = 0; j < m; ++j) r[j] += bias[j];
  }
  return out;
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

void lstm_cell_forward(const Tensor& gates, const Tensor& c_prev, Tensor& h, Tensor& c) {
  const std::size_t n = gates.rows();
  const std::size_t hidden = gates.cols() / 4;
  if (gates.cols() != 4 * hidden || c_prev.rows() != n || c_prev.cols() != hidden) {
    throw DimensionError("lstm_cell: gates " + gates.shape_string() + " vs cell " +
                         c_prev.shape_string());
  }
  if (h.rows() != n || h.cols() != hidden || h.rank() != 2) h = Tensor::matrix(n, hidden);
  if (c.rows() != n || c.cols() != hidden || c.rank() != 2) c = Tensor::matrix(n, hidden);
  for (std::size_t r = 0; r < n; ++r) {
    const double* g = gates.raw() + r * 4 * hidden;
    const double* cp = c_prev.raw() + r * hidden;
    double* hr = h.raw() + r * hidden;
    double* cr = c.raw() + r * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double i_gate = sigmoid(g[j]);
      const double f_gate = sigmoid(g[hidden + j]);
      const double cand = std::tanh(g[2 * hidden + j]);
      const double o_gate = sigmoid(g[3 * hidden + j]);
      cr[j] = f_gate * cp[j] + i_gate * cand;
      hr[j] = o_gate * std::tanh(cr[j]);
    }
  }
  if (!h.all_finite() || !c.all_finite()) throw NumericError("lstm_cell: non-finite activation");
}

void lstm_cell_backward(const Tensor& gates, const Tensor& c_prev, const Tensor& c,
                        const Tensor* d_h, const Tensor* d_c, Tensor& d_gates,
                        Tensor& d_c_prev) {
  const std::size_t n = gates.rows();
  const std::size_t hidden = gates.cols() / 4;
  for (std::size_t r = 0; r < n; ++r) {
    const double* g = gates.raw() + r * 4 * hidden;
    const double* cp = c_prev.raw() + r * hidden;
    const double* cr = c.raw() + r * hidden;
    double* dg = d_gates.raw() + r * 4 * hidden;
    double* dcp = d_c_prev.raw() + r * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double i_gate = sigmoid(g[j]);
      const double f_gate = sigmoid(g[hidden + j]);
      const double cand = std::tanh(g[2 * hidden + j]);
      const double o_gate = sigmoid(g[3 * hidden + j]);
      const double tc = std::tanh(cr[j]);
      const double dh = d_h ? (*d_h)[r * hidden + j] : 0.0;
      double dc = d_c ? (*d_c)[r * hidden + j] : 0.0;
      dc += dh * o_gate * (1.0 - tc * tc);
      dg[j] += dc * cand * i_gate * (1.0 - i_gate);
      dg[hidden + j] += dc * cp[j] * f_gate * (1.0 - f_gate);
      dg[2 * hidden + j] += dc * i_gate * (1.0 - cand * cand);
      dg[3 * hidden + j] += dh * tc * o_gate * (1.0 - o_gate);
      dcp[j] += dc * f_gate;
    }
  }
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
Map view(Tensor& t) { return Map(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())); }

}  // namespace

void gemm(const Tensor& a, const Tensor& b, Tensor& out) {
  if (b.rows() != a.cols()) throw DimensionError("matmul: " + a.shape_string() + " x " + b.shape_string());
  if (out.rows() != a.rows() || out.cols() != b.cols() || out.rank() != 2) out = Tensor::matrix(a.rows(), b.cols());
  view(out).noalias() = view(a) * view(b);
}

void gemm_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  if (b.rows() != a.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw DimensionError("matmul_at_b: " + a.shape_string() + "^T x " + b.shape_string() + " -> " +
                         out.shape_string());
  }
  view(out).noalias() += view(a).transpose() * view(b);
}

void gemm_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  if (b.cols() != a.cols() || out.rows() != a.rows() || out.cols() != b.rows()) {
    throw DimensionError("matmul_a_bt: " + a.shape_string() + " x " + b.shape_string() + "^T -> " +
                         out.shape_string());
  }
  view(out).noalias() += view(a) * view(b).transpose();
}

}  // namespace flexpose::nn::kernels
