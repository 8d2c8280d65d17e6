#pragma once

#include <optional>
#include <vector>

#include "cplab/tensor.hpp"

namespace cplab {

// Differentiable tensor operations. Each op validates shapes up front
// (throwing std::invalid_argument naming the op and the offending shapes),
// computes the forward value, and records a tape node when gradients are
// enabled and any input needs one.

// ---- elementwise / broadcast ----
// add and mul broadcast right-aligned with size-1 expansion.
template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> scale(const Tensor<S>& x, S k);
template <typename S> Tensor<S> add_scalar(const Tensor<S>& x, S c);
template <typename S> Tensor<S> silu(const Tensor<S>& x);
template <typename S> Tensor<S> sigmoid(const Tensor<S>& x);

// ---- shape ----
template <typename S> Tensor<S> reshape(const Tensor<S>& x, std::vector<int> shape);
template <typename S> Tensor<S> broadcast_to(const Tensor<S>& x, const std::vector<int>& shape);
template <typename S> Tensor<S> concat(const Tensor<S>& a, const Tensor<S>& b, int dim);
template <typename S> Tensor<S> narrow(const Tensor<S>& x, int dim, int start, int len);

// ---- linear algebra ----
template <typename S> Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);
// x: (N,Cin,H,W), w: (Cout,Cin,kh,kw); zero padding, square stride
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, int stride, int padding);
template <typename S>
Tensor<S> embedding(const Tensor<S>& table, const std::vector<int>& ids);

// ---- structure ----
template <typename S> Tensor<S> avg_pool2d(const Tensor<S>& x, int k);  // kernel == stride
template <typename S> Tensor<S> upsample_nearest2x(const Tensor<S>& x);
// x: (N,C,H,W); gamma, beta: (C); normalizes over each (sample, group) slice
template <typename S>
Tensor<S> group_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     int groups, S eps = S(1e-5));

// ---- reductions ----
template <typename S> Tensor<S> reduce_sum(const Tensor<S>& x);
template <typename S> Tensor<S> reduce_mean(const Tensor<S>& x);
template <typename S> Tensor<S> mse_loss(const Tensor<S>& a, const Tensor<S>& b);
// numerically stable mean BCE on raw logits; targets in [0,1]
template <typename S>
Tensor<S> bce_with_logits_loss(const Tensor<S>& logits, const Tensor<S>& targets);

}  // namespace cplab
