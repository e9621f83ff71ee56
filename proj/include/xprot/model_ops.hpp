#pragma once

#include <cstddef>
#include <utility>

#include "xprot/tensor.hpp"

// Building blocks of the encoder forward/backward passes. Split out so the
// pieces can be exercised directly in tests (e.g. driving the head cut with
// a stub downstream gradient).
namespace xprot::ops {

inline constexpr double kLayerNormEps = 1e-12;

// y = x * W + b broadcast over rows; x [m x k], w [k x n], b [n].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
// Rank-1 variants: v [m] * w [m x n] + b [n] -> [n].
Tensor linear_vec(const Tensor& v, const Tensor& w, const Tensor& b);
// w * v for rank-1 cotangents: w [m x n], v [n] -> [m].
Tensor mat_vec(const Tensor& w, const Tensor& v);
Tensor outer(const Tensor& u, const Tensor& v);

Tensor& add_row_vector(Tensor& m, const Tensor& v);
Tensor col_sum(const Tensor& m);

// Per-row layer norm over the last axis (rank 1 = single row).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
struct LayerNormGrad {
  Tensor dx;
  Tensor d_gain;
  Tensor d_bias;
};
LayerNormGrad layer_norm_backward(const Tensor& dy, const Tensor& x, const Tensor& gain);

Tensor gelu(const Tensor& x);
Tensor gelu_grad(const Tensor& x);  // elementwise derivative at x

Tensor relu(const Tensor& x);

// Row-wise softmax Jacobian application: ds = p .* (dp - rowsum(dp .* p)).
Tensor softmax_rows_backward(const Tensor& dp, const Tensor& p);

Tensor slice_cols(const Tensor& m, std::size_t start, std::size_t count);
void paste_cols(Tensor& m, const Tensor& block, std::size_t start);

// Gradients at the attention cut given the gradient arriving at the
// post-attention residual sum r1 = s + c*Wo + bo:
//   g_c = d_r1 * Wo^T (through the output projection),
//   g_s = d_r1        (through the skip connection alone).
std::pair<Tensor, Tensor> head_cut_from_residual_grad(const Tensor& d_r1, const Tensor& wo);

}  // namespace xprot::ops
