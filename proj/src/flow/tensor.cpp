#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "refocus/flow/tensor_ops.hpp"

namespace refocus::flow {
namespace {

void check_conv_shapes(const Tensor& in, std::size_t weight_size, int kernel, int out_channels) {
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("conv2d: kernel must be odd");
  const std::size_t expect = static_cast<std::size_t>(out_channels) * in.channels * kernel * kernel;
  if (weight_size != expect) throw std::invalid_argument("conv2d: weight size mismatch");
}

}  // namespace

void conv2d_forward(const Tensor& in, std::span<const double> weight,
                    std::span<const double> bias, int kernel, Tensor& out) {
  if (out.height != in.height || out.width != in.width) {
    throw std::invalid_argument("conv2d: output spatial shape mismatch");
  }
  check_conv_shapes(in, weight.size(), kernel, out.channels);
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(out.channels)) {
    throw std::invalid_argument("conv2d: bias size mismatch");
  }
  const int h = in.height;
  const int w = in.width;
  const int r = kernel / 2;
  const std::size_t plane = in.plane();
  for (int o = 0; o < out.channels; ++o) {
    double* dst = out.data.data() + o * plane;
    std::fill(dst, dst + plane, bias.empty() ? 0.0 : bias[o]);
    for (int i = 0; i < in.channels; ++i) {
      const double* src = in.data.data() + i * plane;
      for (int ky = 0; ky < kernel; ++ky) {
        const int dy = ky - r;
        const int y_lo = std::max(0, -dy);
        const int y_hi = std::min(h, h - dy);
        for (int kx = 0; kx < kernel; ++kx) {
          const int dx = kx - r;
          const double wv = weight[((static_cast<std::size_t>(o) * in.channels + i) * kernel + ky) *
                                       kernel + kx];
          if (wv == 0.0) continue;
          const int x_lo = std::max(0, -dx);
          const int x_hi = std::min(w, w - dx);
          for (int y = y_lo; y < y_hi; ++y) {
            double* drow = dst + static_cast<std::size_t>(y) * w;
            const double* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x_lo; x < x_hi; ++x) drow[x] += wv * srow[x];
          }
        }
      }
    }
  }
}

void conv2d_backward(const Tensor& in, std::span<const double> weight, int kernel,
                     const Tensor& dout, std::span<double> dweight, std::span<double> dbias,
                     Tensor* din) {
  check_conv_shapes(in, weight.size(), kernel, dout.channels);
  if (!dweight.empty() && dweight.size() != weight.size()) {
    throw std::invalid_argument("conv2d: dweight size mismatch");
  }
  if (din && !din->same_shape(in)) throw std::invalid_argument("conv2d: din shape mismatch");
  const int h = in.height;
  const int w = in.width;
  const int r = kernel / 2;
  const std::size_t plane = in.plane();
  for (int o = 0; o < dout.channels; ++o) {
    const double* g = dout.data.data() + o * plane;
    if (!dbias.empty()) {
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) acc += g[p];
      dbias[o] += acc;
    }
    for (int i = 0; i < in.channels; ++i) {
      const double* src = in.data.data() + i * plane;
      double* dsrc = din ? din->data.data() + i * plane : nullptr;
      for (int ky = 0; ky < kernel; ++ky) {
        const int dy = ky - r;
        const int y_lo = std::max(0, -dy);
        const int y_hi = std::min(h, h - dy);
        for (int kx = 0; kx < kernel; ++kx) {
          const int dx = kx - r;
          const std::size_t widx =
              ((static_cast<std::size_t>(o) * in.channels + i) * kernel + ky) * kernel + kx;
          const double wv = weight[widx];
          const int x_lo = std::max(0, -dx);
          const int x_hi = std::min(w, w - dx);
          double acc = 0.0;
          for (int y = y_lo; y < y_hi; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * w;
            const std::size_t src_off = static_cast<std::size_t>(y + dy) * w + dx;
            const double* srow = src + src_off;
            for (int x = x_lo; x < x_hi; ++x) acc += grow[x] * srow[x];
            if (dsrc && wv != 0.0) {
              double* drow = dsrc + src_off;
              for (int x = x_lo; x < x_hi; ++x) drow[x] += wv * grow[x];
            }
          }
          if (!dweight.empty()) dweight[widx] += acc;
        }
      }
    }
  }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace refocus::flow
