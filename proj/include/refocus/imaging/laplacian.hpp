#pragma once

#include "refocus/imaging/raster.hpp"

namespace refocus::imaging {

// 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]] with replicate padding.
// Three-channel inputs are reduced to luminance first. The result is a
// single-channel, unclamped map.
RasterImage laplacian_map(const RasterImage& img);

// Population variance of laplacian_map(img) over all pixels.
double laplacian_variance(const RasterImage& img);

// Population variance of a single-channel map.
double population_variance(const RasterImage& map);

// Separable Gaussian blur with replicate padding; the kernel is truncated at
// ceil(3 sigma). sigma <= 0 returns the input unchanged.
RasterImage gaussian_blur(const RasterImage& img, double sigma);

// Elementwise |v|.
RasterImage abs_map(const RasterImage& img);

}  // namespace refocus::imaging
