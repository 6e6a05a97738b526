#pragma once

#include <span>

#include "refocus/tensor.hpp"

namespace refocus::flow {

// Same-size 2-D convolution with zero padding and an odd square kernel.
// weight is laid out [out][in][ky][kx]; bias may be empty.
// out must be preshaped to (out_channels, in.height, in.width).
void conv2d_forward(const Tensor& in, std::span<const double> weight,
                    std::span<const double> bias, int kernel, Tensor& out);

// Accumulates into dweight / dbias (when non-empty) and din (when non-null).
void conv2d_backward(const Tensor& in, std::span<const double> weight, int kernel,
                     const Tensor& dout, std::span<double> dweight, std::span<double> dbias,
                     Tensor* din);

double silu(double x);
double silu_grad(double x);

// Throws invalid_argument with `what` unless shapes match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace refocus::flow
