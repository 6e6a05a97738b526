#include "refocus/stack/focus_stack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "refocus/imaging/laplacian.hpp"

namespace refocus::stack {

std::size_t StackMask::count_ones() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

StackMask StackMask::complement() const {
  StackMask out = *this;
  for (auto& v : out.data_) v = static_cast<std::uint8_t>(1 - v);
  return out;
}

RasterImage StackMask::to_image() const {
  RasterImage out(width_, height_, 1);
  std::transform(data_.begin(), data_.end(), out.data().begin(),
                 [](std::uint8_t v) { return static_cast<double>(v); });
  return out;
}

StackMask compare_sharpness(const RasterImage& sharp1, const RasterImage& sharp2) {
  if (!sharp1.same_shape(sharp2) || sharp1.channels() != 1) {
    throw std::invalid_argument("compare_sharpness: maps must be single-channel and equal size");
  }
  StackMask mask(sharp1.width(), sharp1.height());
  auto a = sharp1.data();
  auto b = sharp2.data();
  auto m = mask.data();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = a[i] >= b[i] ? 1 : 0;
  return mask;
}

StackMask stack_mask(const RasterImage& img1, const RasterImage& img2, double smooth_sigma) {
  if (img1.width() != img2.width() || img1.height() != img2.height()) {
    throw std::invalid_argument("stack_mask: image dimensions differ");
  }
  const RasterImage s1 = imaging::gaussian_blur(imaging::abs_map(imaging::laplacian_map(img1)), smooth_sigma);
  const RasterImage s2 = imaging::gaussian_blur(imaging::abs_map(imaging::laplacian_map(img2)), smooth_sigma);
  return compare_sharpness(s1, s2);
}

RasterImage stack_blend(const RasterImage& img1, const RasterImage& img2, const StackMask& mask) {
  if (!img1.same_shape(img2) || mask.width() != img1.width() || mask.height() != img1.height()) {
    throw std::invalid_argument("stack_blend: shape mismatch");
  }
  RasterImage out(img1.width(), img1.height(), img1.channels());
  const int ch = img1.channels();
  auto a = img1.data();
  auto b = img2.data();
  auto m = mask.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < m.size(); ++p) {
    const auto& src = m[p] ? a : b;
    for (int c = 0; c < ch; ++c) dst[p * ch + c] = src[p * ch + c];
  }
  return out;
}

RasterImage stack_select(std::span<const RasterImage> images, std::span<const int> labels) {
  if (images.empty()) throw std::invalid_argument("stack_select: no images");
  for (const auto& img : images) {
    if (!img.same_shape(images.front())) throw std::invalid_argument("stack_select: shape mismatch");
  }
  if (labels.size() != images.front().pixel_count()) {
    throw std::invalid_argument("stack_select: label count does not match pixel count");
  }
  RasterImage out(images.front().width(), images.front().height(), images.front().channels());
  const int ch = out.channels();
  auto dst = out.data();
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const int l = labels[p];
    if (l < 0 || static_cast<std::size_t>(l) >= images.size()) {
      throw std::invalid_argument("stack_select: label out of range");
    }
    auto src = images[l].data();
    for (int c = 0; c < ch; ++c) dst[p * ch + c] = src[p * ch + c];
  }
  return out;
}

LatentMask downsample_mask(const StackMask& mask, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1) {
    throw std::invalid_argument("downsample_mask: target dims must be >= 1");
  }
  const int w = mask.width();
  const int h = mask.height();
  LatentMask out{target_width, target_height,
                 std::vector<double>(static_cast<std::size_t>(target_width) * target_height)};
  const double sx = static_cast<double>(w) / target_width;
  const double sy = static_cast<double>(h) / target_height;
  auto source = [&](int i, double scale, int extent, int& i0, int& i1, double& t) {
    const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(extent - 1));
    i0 = static_cast<int>(std::floor(s));
    i1 = std::min(i0 + 1, extent - 1);
    t = s - i0;
  };
  for (int y = 0; y < target_height; ++y) {
    int y0, y1;
    double ty;
    source(y, sy, h, y0, y1, ty);
    for (int x = 0; x < target_width; ++x) {
      int x0, x1;
      double tx;
      source(x, sx, w, x0, x1, tx);
      const double top = mask.at(x0, y0) * (1 - tx) + mask.at(x1, y0) * tx;
      const double bottom = mask.at(x0, y1) * (1 - tx) + mask.at(x1, y1) * tx;
      out.data[static_cast<std::size_t>(y) * target_width + x] =
          std::clamp(top * (1 - ty) + bottom * ty, 0.0, 1.0);
    }
  }
  return out;
}

Tensor latent_stack_blend(const Tensor& z1, const Tensor& z2, const LatentMask& m) {
  if (!z1.same_shape(z2) || z1.width != m.width || z1.height != m.height) {
    throw std::invalid_argument("latent_stack_blend: shape mismatch");
  }
  Tensor out(z1.channels, z1.height, z1.width);
  const std::size_t plane = z1.plane();
  for (int c = 0; c < z1.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t k = c * plane + i;
      out.data[k] = m.data[i] * z1.data[k] + (1.0 - m.data[i]) * z2.data[k];
    }
  }
  return out;
}

}  // namespace refocus::stack
