#pragma once

#include "refocus/imaging/raster.hpp"

namespace refocus::bokeh {

using imaging::DepthMap;
using imaging::RasterImage;

struct RenderParams {
  double focus_depth = 0.5;   // d_f in [0,1]
  double bokeh_level = 0.0;   // b >= 0
  double radius_scale = 1.0;  // pixels per unit of b * |d - d_f|
  double min_radius = 0.5;    // radii below this leave the pixel in focus
  double max_radius = 64.0;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

// Circle-of-confusion radius in pixels: clamp(s * b * |d - d_f|, 0, r_max).
double coc_radius(double depth, const RenderParams& params);

// Normative scatter-normalize model, evaluated literally. Every source pixel
// q with radius r >= r_min spreads weight 1/(pi r^2) over the pixels whose
// centers lie within r of q (contributions leaving the frame are dropped);
// sources with r < r_min keep weight 1 on themselves. The output is the
// weighted mean of all contributions. O(N r^2).
RasterImage render_oracle(const RasterImage& img, const DepthMap& depth,
                          const RenderParams& params);

// Same model in O(N r): sources are bucketed by the integer bound floor(r^2)
// that fixes their disc's pixel set, each disc is scattered as horizontal
// spans into per-row difference buffers, and a prefix sum per row finishes
// the accumulation. Matches render_oracle within 1e-4 per channel, and is
// exact wherever no blurred disc reaches.
RasterImage render_fast(const RasterImage& img, const DepthMap& depth,
                        const RenderParams& params);

// Refocus on the depth under the normalized point (fx, fy), rounded to the
// nearest pixel, then render with render_fast.
RasterImage refocus_classical(const RasterImage& img, const DepthMap& depth, double fx,
                              double fy, double bokeh_level, double radius_scale = 1.0);

// Per-channel power-law transfer; used to optionally render in linear light.
RasterImage apply_gamma(const RasterImage& img, double gamma);

}  // namespace refocus::bokeh
