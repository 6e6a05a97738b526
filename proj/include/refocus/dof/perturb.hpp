#pragma once

#include <random>
#include <string_view>

#include "refocus/imaging/raster.hpp"

namespace refocus::dof {

enum class PerturbKind { kDropout, kRandomMask, kRandomCrop, kGaussianNoise };

PerturbKind parse_perturb_kind(std::string_view name);
std::string_view to_string(PerturbKind kind);

struct PerturbParams {
  double mask_probability = 0.3;
  double crop_min_frac = 0.1;
  double crop_max_frac = 0.5;
  double noise_stddev = 1.0;
};

// dropout: all zeros. random_mask: each pixel zeroed independently.
// random_crop: one axis-aligned rectangle zeroed, each side uniform in
// [crop_min_frac, crop_max_frac] of its dimension. gaussian_noise: additive
// N(0, noise_stddev) per pixel, clamped to [0,1].
imaging::DepthMap perturb_depth(const imaging::DepthMap& depth, PerturbKind kind,
                                std::mt19937_64& rng, const PerturbParams& params = {});

}  // namespace refocus::dof
