#pragma once

#include <utility>
#include <vector>

#include "eegdiff/tensor.hpp"

namespace eegdiff {

/// 2-D cross-correlation. input [N,C,H,W], kernel [K,C,kh,kw]; output
/// [N,K,H',W'] with H' = floor((H+2*pad_h-kh)/stride_h)+1 (same for W).
/// Differentiable w.r.t. input and kernel.
TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, std::pair<int, int> stride,
                 std::pair<int, int> padding);

/// Max pooling over [N,C,H,W]. Gradient flows to the first (row-major)
/// maximum of each window.
TensorPtr maxpool2d(const TensorPtr& input, std::pair<int, int> kernel, std::pair<int, int> stride);

/// out[N,O] = input[N,F] * weight[O,F]^T + bias[O]
TensorPtr linear(const TensorPtr& input, const TensorPtr& weight, const TensorPtr& bias);

/// Exact-erf GELU: x * Phi(x).
TensorPtr gelu(const TensorPtr& input);

/// Mean over the batch of -log softmax(logits)[label], log-sum-exp stabilized.
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& labels);

/// Mean squared elementwise difference.
TensorPtr mse(const TensorPtr& pred, const TensorPtr& target);

/// Elementwise sum of two same-shape tensors.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);

/// x[N,C,H,W] + bias[C], broadcast over batch and spatial dims.
TensorPtr add_channel_bias(const TensorPtr& input, const TensorPtr& bias);

/// x[N,C,H,W] + e[N,C], broadcast over spatial dims (timestep embeddings).
TensorPtr add_sample_channel(const TensorPtr& input, const TensorPtr& embedding);

/// Multiply by a compile-time constant.
TensorPtr scale(const TensorPtr& input, double factor);

/// Group normalization over [N,C,H,W] with per-channel affine parameters.
TensorPtr group_norm(const TensorPtr& input, const TensorPtr& gamma, const TensorPtr& beta,
                     int groups, double eps = 1e-5);

/// Collapse all dims after the first into one: [N,...] -> [N,rest].
TensorPtr flatten(const TensorPtr& input);

namespace detail {
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
}  // namespace detail

}  // namespace eegdiff
