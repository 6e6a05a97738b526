#include "refocus/imaging/raster.hpp"

#include <cmath>
#include <stdexcept>

namespace refocus::imaging {

RasterImage::RasterImage(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) {
    throw std::invalid_argument("RasterImage: negative dimensions");
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("RasterImage: channels must be 1 or 3");
  }
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

bool RasterImage::in_unit_range() const {
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
  }
  return true;
}

DepthMap::DepthMap(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw std::invalid_argument("DepthMap: negative dimensions");
  }
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
               fill);
}

double DepthMap::sample_normalized(double fx, double fy) const {
  if (empty()) throw std::invalid_argument("DepthMap: empty map");
  return at(normalized_to_pixel(fx, width_), normalized_to_pixel(fy, height_));
}

int normalized_to_pixel(double f, int extent) {
  if (!(f >= 0.0 && f <= 1.0)) {
    throw std::invalid_argument("normalized coordinate outside [0,1]");
  }
  return static_cast<int>(std::lround(f * static_cast<double>(extent - 1)));
}

double pixel_to_normalized(int p, int extent) {
  if (extent <= 1) return 0.0;
  return static_cast<double>(p) / static_cast<double>(extent - 1);
}

RasterImage to_luminance(const RasterImage& img) {
  if (img.channels() == 1) return img;
  RasterImage out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    dst[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
  }
  return out;
}

}  // namespace refocus::imaging
