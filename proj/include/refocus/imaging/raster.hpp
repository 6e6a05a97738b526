#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace refocus::imaging {

// Row-major, interleaved-channel raster with origin at the top-left.
// Values are nominally in [0,1]; intermediate results such as Laplacian
// maps reuse this type without that guarantee.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const RasterImage& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  // True iff every value is finite and inside [0,1].
  bool in_unit_range() const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Relative depth, 1 = closest and 0 = farthest.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Depth at a normalized coordinate, rounded to the nearest pixel.
  double sample_normalized(double fx, double fy) const;

  bool same_size(const RasterImage& img) const {
    return width_ == img.width() && height_ == img.height();
  }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Pixel index of a normalized coordinate: round(f * (n - 1)).
int normalized_to_pixel(double f, int extent);
// Inverse of normalized_to_pixel for pixel centers; 0 when extent == 1.
double pixel_to_normalized(int p, int extent);

// 0.299 R + 0.587 G + 0.114 B; single-channel inputs are copied.
RasterImage to_luminance(const RasterImage& img);

}  // namespace refocus::imaging
