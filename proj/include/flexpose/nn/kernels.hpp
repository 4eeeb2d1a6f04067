// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "flexpose/nn/tensor.hpp"

// Numeric kernels shared by the autodiff graph and the graph-free inference
// path. Every output element is accumulated in a fixed order that does not
// depend on the batch size, so a batch of N rows produces exactly the same
// bits as N single-row calls.
namespace flexpose::nn::kernels {

/// out = a * b. out is resized.
void matmul(const Tensor& a, const Tensor& b, Tensor& out);

/// out += a^T * b
void matmul_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out);

/// out += a * b^T
void matmul_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& out);

/// out = x * w + bias (bias broadcast over rows, added after the product).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);

/// Blocked (Eigen) products for the training graph. Faster, but the
/// accumulation order depends on the matrix shapes, so inference paths that
/// must be reproducible across batch sizes use the kernels above instead.
void gemm(const Tensor& a, const Tensor& b, Tensor& out);
void gemm_at_b_acc(const Tensor& a, const Tensor& b, Tensor& out);
void gemm_a_bt_acc(const Tensor& a, const Tensor& b, Tensor& out);

double sigmoid(double v);

/// Fused LSTM cell. `gates` holds pre-activations [N x 4H] in (i, f, g, o)
/// order. Writes h and c [N x H].
void lstm_cell_forward(const Tensor& gates, const Tensor& c_prev, Tensor& h, Tensor& c);

/// Backward of lstm_cell_forward. Accumulates into d_gates and d_c_prev.
void lstm_cell_backward(const Tensor& gates, const Tensor& c_prev, const Tensor& c,
                        const Tensor* d_h, const Tensor* d_c, Tensor& d_gates,
                        Tensor& d_c_prev);

}  // namespace flexpose::nn::kernels
