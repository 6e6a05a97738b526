#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "refocus/imaging/raster.hpp"
#include "refocus/tensor.hpp"

namespace refocus::stack {

using imaging::RasterImage;

// Binary per-pixel selector: 1 picks the first image, 0 the second.
class StackMask {
 public:
  StackMask() = default;
  StackMask(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  std::size_t count_ones() const;
  StackMask complement() const;
  RasterImage to_image() const;

  friend bool operator==(const StackMask&, const StackMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Continuous mask on the latent grid, values in [0,1].
struct LatentMask {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr double kDefaultStackSigma = 2.0;

// M(p) = 1 iff the blurred |Laplacian| of img1 is >= that of img2 at p.
StackMask stack_mask(const RasterImage& img1, const RasterImage& img2,
                     double smooth_sigma = kDefaultStackSigma);

// Elementwise comparison of two precomputed sharpness maps (ties pick 1).
StackMask compare_sharpness(const RasterImage& sharp1, const RasterImage& sharp2);

// M * I1 + (1 - M) * I2.
RasterImage stack_blend(const RasterImage& img1, const RasterImage& img2,
                        const StackMask& mask);

// Multi-image stacking: pixel p takes images[labels[p]].
RasterImage stack_select(std::span<const RasterImage> images, std::span<const int> labels);

// Bilinear resampling with half-pixel centers. Equal sizes copy the mask.
LatentMask downsample_mask(const StackMask& mask, int target_width, int target_height);

// Per-cell, per-channel m * z1 + (1 - m) * z2.
Tensor latent_stack_blend(const Tensor& z1, const Tensor& z2, const LatentMask& m);

}  // namespace refocus::stack
