#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace refocus {

// Dense channel-major (C, H, W) array of doubles, used for latent codes and
// network activations.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
                 static_cast<std::size_t>(w),
             fill) {
    if (c < 0 || h < 0 || w < 0) throw std::invalid_argument("Tensor: negative shape");
  }

  std::size_t size() const { return data.size(); }
  std::size_t plane() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }

  double& at(int c, int y, int x) {
    return data[static_cast<std::size_t>(c) * plane() +
                static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }
  double at(int c, int y, int x) const {
    return data[static_cast<std::size_t>(c) * plane() +
                static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)];
  }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace refocus
