#pragma once

#include <span>
#include <vector>

#include "ebench/nn/tensor.hpp"

namespace ebench::nn {

// 2-D ops use shape {rows, cols}.
Tensor matmul(const Tensor& a, const Tensor& b);     // [n,k] x [k,m]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [n,k] x [m,k]^T
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_bias(const Tensor& x, const Tensor& bias);  // [n,m] + [m]

Tensor gelu(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

Tensor mean_rows(const Tensor& x);  // [n,m] -> [1,m]
Tensor sum_all(const Tensor& x);    // -> [1,1]
Tensor sum_cols(const Tensor& x);   // [n,m] -> [n,1]

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, int start, int count);
Tensor slice_cols(const Tensor& x, int start, int count);
Tensor gather_rows(const Tensor& x, std::span<const int> rows);
Tensor reshape(const Tensor& x, Shape shape);

// Rows of `table` selected by token ids.
Tensor embedding(const Tensor& table, std::span<const int> ids);

// x: [C,H,W]; weight: [O, C*k*k]; bias: [O]. Returns [O,H',W'].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int kernel, int stride,
              int padding);
// [C,H,W] -> [1,C]
Tensor global_avg_pool(const Tensor& x);

// Scalar node whose value is `loss` and whose gradient w.r.t. `pred` is
// `dloss_dpred`; lets closed-form losses plug into the graph.
Tensor external_loss(const Tensor& pred, double loss, std::vector<double> dloss_dpred);

}  // namespace ebench::nn
