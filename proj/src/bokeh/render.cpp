#include "refocus/bokeh/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace refocus::bokeh {
namespace {

void check_inputs(const RasterImage& img, const DepthMap& depth, const RenderParams& params) {
  params.validate();
  if (img.empty()) throw std::invalid_argument("render: empty image");
  if (!depth.same_size(img)) {
    throw std::invalid_argument("render: image and depth dimensions differ");
  }
}

// Largest integer n with n*n <= k.
int isqrt(int k) {
  int n = static_cast<int>(std::sqrt(static_cast<double>(k)));
  while (n * n > k) --n;
  while ((n + 1) * (n + 1) <= k) ++n;
  return n;
}

// Half-widths of the integer disc {dx^2 + dy^2 <= k}, one entry per |dy|.
class DiscTable {
 public:
  const std::vector<int>& spans(int k) {
    if (static_cast<std::size_t>(k) >= cache_.size()) cache_.resize(k + 1);
    auto& entry = cache_[k];
    if (entry.empty()) {
      const int reach = isqrt(k);
      entry.resize(reach + 1);
      for (int dy = 0; dy <= reach; ++dy) entry[dy] = isqrt(k - dy * dy);
    }
    return entry;
  }

 private:
  std::vector<std::vector<int>> cache_;
};

// Adds sign * contrib[x] to diff at column clamp(x + shift, lo, hi) for
// x in [a, b), with the matching +-1 in cover. Columns that clamp fold into
// the boundary entry; the unclamped middle is one contiguous add.
void scatter_run(std::vector<double>& diff, std::vector<int>& cover,
                 const std::vector<double>& contrib, std::size_t row, int stride, int a, int b,
                 int shift, int lo, int hi, double sign) {
  const int mid_a = std::clamp(lo - shift, a, b);
  const int mid_b = std::clamp(hi - shift + 1, mid_a, b);
  const int isign = sign > 0 ? 1 : -1;
  auto fold = [&](int from, int to, int col) {
    if (from >= to) return;
    double* d = &diff[(row + col) * stride];
    for (int x = from; x < to; ++x) {
      const double* c = &contrib[static_cast<std::size_t>(x) * stride];
      for (int k = 0; k < stride; ++k) d[k] += sign * c[k];
    }
    cover[row + col] += isign * (to - from);
  };
  fold(a, mid_a, lo);
  fold(mid_b, b, hi);
  if (mid_a >= mid_b) return;
  double* d = &diff[(row + mid_a + shift) * stride];
  const double* c = &contrib[static_cast<std::size_t>(mid_a) * stride];
  const std::size_t n = static_cast<std::size_t>(mid_b - mid_a) * stride;
  if (sign > 0) {
    for (std::size_t i = 0; i < n; ++i) d[i] += c[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) d[i] -= c[i];
  }
  int* cv = &cover[row + mid_a + shift];
  for (int i = 0; i < mid_b - mid_a; ++i) cv[i] += isign;
}

}  // namespace

void RenderParams::validate() const {
  if (!(focus_depth >= 0.0 && focus_depth <= 1.0)) {
    throw std::invalid_argument("RenderParams: focus_depth outside [0,1]");
  }
  if (!(bokeh_level >= 0.0) || !std::isfinite(bokeh_level)) {
    throw std::invalid_argument("RenderParams: bokeh_level must be >= 0");
  }
  if (!(radius_scale > 0.0) || !std::isfinite(radius_scale)) {
    throw std::invalid_argument("RenderParams: radius_scale must be > 0");
  }
  if (!(min_radius < max_radius) || !(min_radius >= 0.0)) {
    throw std::invalid_argument("RenderParams: need 0 <= min_radius < max_radius");
  }
}

double coc_radius(double depth, const RenderParams& params) {
  const double r = params.radius_scale * params.bokeh_level * std::abs(depth - params.focus_depth);
  return std::clamp(r, 0.0, params.max_radius);
}

RasterImage render_oracle(const RasterImage& img, const DepthMap& depth,
                          const RenderParams& params) {
  check_inputs(img, depth, params);
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  std::vector<double> num(img.data().size(), 0.0);
  std::vector<double> den(img.pixel_count(), 0.0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = coc_radius(depth.at(x, y), params);
      const std::size_t q = static_cast<std::size_t>(y) * w + x;
      if (r < params.min_radius) {
        den[q] += 1.0;
        for (int c = 0; c < ch; ++c) num[q * ch + c] += img.at(x, y, c);
        continue;
      }
      const double weight = 1.0 / (std::numbers::pi * r * r);
      const double r2 = r * r;
      const int reach = static_cast<int>(std::floor(r));
      for (int dy = -reach; dy <= reach; ++dy) {
        const int py = y + dy;
        if (py < 0 || py >= h) continue;
        for (int dx = -reach; dx <= reach; ++dx) {
          const int px = x + dx;
          if (px < 0 || px >= w) continue;
          if (static_cast<double>(dx * dx + dy * dy) > r2) continue;
          const std::size_t p = static_cast<std::size_t>(py) * w + px;
          den[p] += weight;
          for (int c = 0; c < ch; ++c) num[p * ch + c] += weight * img.at(x, y, c);
        }
      }
    }
  }

  RasterImage out(w, h, ch);
  auto dst = out.data();
  for (std::size_t p = 0; p < den.size(); ++p) {
    for (int c = 0; c < ch; ++c) dst[p * ch + c] = num[p * ch + c] / den[p];
  }
  return out;
}

RasterImage render_fast(const RasterImage& img, const DepthMap& depth,
                        const RenderParams& params) {
  check_inputs(img, depth, params);
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  const int stride = ch + 1;  // channels followed by the weight
  const std::size_t row_len = static_cast<std::size_t>(w + 1);

  // In-focus sources accumulate directly; blurred sources go through
  // difference buffers. A separate integer coverage count tells which
  // pixels any blurred disc touched, so untouched pixels never see the
  // rounding residue of the prefix sums.
  std::vector<double> direct(img.data().size(), 0.0);
  std::vector<double> direct_w(img.pixel_count(), 0.0);
  std::vector<double> diff(row_len * h * stride, 0.0);
  std::vector<int> cover(row_len * h, 0);
  DiscTable discs;
  bool any_blur = false;

  // Per-row source table: bucket key (-1 when in focus) and contributions.
  std::vector<int> keys(w);
  std::vector<double> contrib(static_cast<std::size_t>(w) * stride);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = coc_radius(depth.at(x, y), params);
      const std::size_t q = static_cast<std::size_t>(y) * w + x;
      if (r < params.min_radius) {
        keys[x] = -1;
        direct_w[q] = 1.0;
        for (int c = 0; c < ch; ++c) direct[q * ch + c] = img.at(x, y, c);
        continue;
      }
      any_blur = true;
      // Integer offsets satisfy dx^2 + dy^2 <= r^2 iff they satisfy
      // dx^2 + dy^2 <= floor(r^2), so the bucket key fixes the pixel set.
      keys[x] = static_cast<int>(std::floor(r * r));
      const double weight = 1.0 / (std::numbers::pi * r * r);
      double* cw = &contrib[static_cast<std::size_t>(x) * stride];
      for (int c = 0; c < ch; ++c) cw[c] = weight * img.at(x, y, c);
      cw[ch] = weight;
    }

    // Runs of equal keys share one disc shape, so on every disc row their
    // span starts (and stops) are consecutive and scatter as one array add.
    for (int a = 0; a < w;) {
      const int key = keys[a];
      int b = a + 1;
      while (b < w && keys[b] == key) ++b;
      if (key < 0) {
        a = b;
        continue;
      }
      const std::vector<int>& half = discs.spans(key);
      const int reach = static_cast<int>(half.size()) - 1;
      const int dy_lo = std::max(-reach, -y);
      const int dy_hi = std::min(reach, h - 1 - y);
      for (int dy = dy_lo; dy <= dy_hi; ++dy) {
        const int hw = half[std::abs(dy)];
        const std::size_t row = static_cast<std::size_t>(y + dy) * row_len;
        scatter_run(diff, cover, contrib, row, stride, a, b, -hw, 0, w, +1.0);
        scatter_run(diff, cover, contrib, row, stride, a, b, hw + 1, 0, w, -1.0);
      }
      a = b;
    }
  }

  if (!any_blur) return img;

  RasterImage out(w, h, ch);
  auto dst = out.data();
  for (int y = 0; y < h; ++y) {
    double run[4] = {0.0, 0.0, 0.0, 0.0};
    int count = 0;
    const std::size_t row = static_cast<std::size_t>(y) * row_len;
    for (int x = 0; x < w; ++x) {
      const double* d = &diff[(row + x) * stride];
      for (int c = 0; c < stride; ++c) run[c] += d[c];
      count += cover[row + x];
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      if (count == 0) {
        for (int c = 0; c < ch; ++c) dst[p * ch + c] = direct[p * ch + c] / direct_w[p];
      } else {
        const double total_w = run[ch] + direct_w[p];
        for (int c = 0; c < ch; ++c) dst[p * ch + c] = (run[c] + direct[p * ch + c]) / total_w;
      }
    }
  }
  return out;
}

RasterImage refocus_classical(const RasterImage& img, const DepthMap& depth, double fx,
                              double fy, double bokeh_level, double radius_scale) {
  if (!(fx >= 0.0 && fx <= 1.0 && fy >= 0.0 && fy <= 1.0)) {
    throw std::invalid_argument("refocus_classical: focus point outside [0,1]^2");
  }
  if (!depth.same_size(img)) {
    throw std::invalid_argument("render: image and depth dimensions differ");
  }
  RenderParams params;
  params.focus_depth = std::clamp(depth.sample_normalized(fx, fy), 0.0, 1.0);
  params.bokeh_level = bokeh_level;
  params.radius_scale = radius_scale;
  return render_fast(img, depth, params);
}

RasterImage apply_gamma(const RasterImage& img, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("apply_gamma: gamma must be > 0");
  RasterImage out = img;
  for (double& v : out.data()) v = std::pow(std::max(v, 0.0), gamma);
  return out;
}

}  // namespace refocus::bokeh
