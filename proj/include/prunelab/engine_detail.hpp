#pragma once

// Layer-level compute primitives shared by the forward/backward pass and the
// interval bound propagation code.

#include "prunelab/tensor.hpp"

namespace prunelab::detail {

// Y[B,out] = X[B,in] * W[out,in]^T + b
Tensor dense_forward(const Tensor& w, const Tensor& b, const Tensor& x);
// gX = gY * W
Tensor dense_backward_input(const Tensor& w, const Tensor& gy, std::size_t in_dim);
// gW += gY^T * X ; gb += column sums of gY
void dense_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor& gb);

// Valid cross-correlation, kernel [Oc,Ic,k,k], input [B,Ic,H,W].
Tensor conv_forward(const Tensor& k, const Tensor& b, const Tensor& x, std::size_t stride);
Tensor conv_backward_input(const Tensor& k, const Tensor& gy,
                           const std::vector<std::size_t>& in_shape, std::size_t stride);
void conv_backward_params(const Tensor& x, const Tensor& gy, std::size_t kernel,
                          std::size_t stride, Tensor& gk, Tensor& gb);

Tensor avgpool_forward(const Tensor& x, std::size_t window);
Tensor avgpool_backward(const Tensor& gy, const std::vector<std::size_t>& in_shape,
                        std::size_t window);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& gy);

// weights ⊙ mask
Tensor masked(const Tensor& w, const Tensor& mask);

// Split into elementwise positive and negative parts (w = pos + neg).
void split_pos_neg(const Tensor& w, Tensor& pos, Tensor& neg);

void check_finite(const Tensor& t, const char* what);

}  // namespace prunelab::detail
