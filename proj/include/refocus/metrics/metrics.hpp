#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "refocus/imaging/raster.hpp"

namespace refocus::metrics {

using imaging::RasterImage;

// Raised when a correlation is requested over a constant sequence.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kPsnrCap = 100.0;

double mae(const RasterImage& a, const RasterImage& b);
double mse(const RasterImage& a, const RasterImage& b);
// 10 log10(peak^2 / MSE), capped at kPsnrCap (identical images hit the cap).
double psnr(const RasterImage& a, const RasterImage& b, double peak = 1.0);

// Sample Pearson coefficient; requires |x| = |y| >= 2.
double pearson(std::span<const double> x, std::span<const double> y);

struct LevelImage {
  double bokeh_level;
  RasterImage image;
};

// Pearson(b, -LV(image)) over a same-scene sequence with >= 3 distinct levels.
double lvcorr(std::span<const LevelImage> generated);

// Alternative pairing: Pearson(LV(generated_i), LV(reference_i)).
double lvcorr_against_reference(std::span<const LevelImage> generated,
                                std::span<const LevelImage> reference);

}  // namespace refocus::metrics
