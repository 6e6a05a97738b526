#include "refocus/imaging/laplacian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace refocus::imaging {

RasterImage laplacian_map(const RasterImage& img) {
  if (img.empty()) {
    throw std::invalid_argument("laplacian_map: zero-size image");
  }
  const RasterImage lum = to_luminance(img);
  const int w = lum.width();
  const int h = lum.height();
  RasterImage out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      out.at(x, y) = lum.at(x, ym) + lum.at(x, yp) + lum.at(xm, y) +
                     lum.at(xp, y) - 4.0 * lum.at(x, y);
    }
  }
  return out;
}

double population_variance(const RasterImage& map) {
  auto values = map.data();
  if (values.empty()) {
    throw std::invalid_argument("population_variance: empty map");
  }
  // Two-pass for stability.
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

double laplacian_variance(const RasterImage& img) {
  return population_variance(laplacian_map(img));
}

RasterImage abs_map(const RasterImage& img) {
  RasterImage out = img;
  for (double& v : out.data()) v = std::abs(v);
  return out;
}

RasterImage gaussian_blur(const RasterImage& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double k = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[i + radius] = k;
    norm += k;
  }
  for (double& k : kernel) k /= norm;

  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  RasterImage tmp(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xs = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + radius] * img.at(xs, y, c);
        }
        tmp.at(x, y, c) = acc;
      }
    }
  }
  RasterImage out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int ys = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + radius] * tmp.at(x, ys, c);
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

}  // namespace refocus::imaging
