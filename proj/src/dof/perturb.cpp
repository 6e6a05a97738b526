#include "refocus/dof/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace refocus::dof {

PerturbKind parse_perturb_kind(std::string_view name) {
  if (name == "dropout") return PerturbKind::kDropout;
  if (name == "random_mask") return PerturbKind::kRandomMask;
  if (name == "random_crop") return PerturbKind::kRandomCrop;
  if (name == "gaussian_noise") return PerturbKind::kGaussianNoise;
  throw std::invalid_argument("unknown perturbation kind: " + std::string(name));
}

std::string_view to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::kDropout: return "dropout";
    case PerturbKind::kRandomMask: return "random_mask";
    case PerturbKind::kRandomCrop: return "random_crop";
    case PerturbKind::kGaussianNoise: return "gaussian_noise";
  }
  return "dropout";
}

namespace {

int crop_extent(int dim, const PerturbParams& params, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> frac(params.crop_min_frac, params.crop_max_frac);
  return std::clamp(static_cast<int>(std::lround(frac(rng) * dim)), 1, dim);
}

}  // namespace

imaging::DepthMap perturb_depth(const imaging::DepthMap& depth, PerturbKind kind,
                                std::mt19937_64& rng, const PerturbParams& params) {
  imaging::DepthMap out = depth;
  switch (kind) {
    case PerturbKind::kDropout:
      std::fill(out.data().begin(), out.data().end(), 0.0);
      break;
    case PerturbKind::kRandomMask: {
      if (!(params.mask_probability >= 0.0 && params.mask_probability <= 1.0)) {
        throw std::invalid_argument("perturb_depth: mask probability outside [0,1]");
      }
      std::bernoulli_distribution drop(params.mask_probability);
      for (double& v : out.data()) {
        if (drop(rng)) v = 0.0;
      }
      break;
    }
    case PerturbKind::kRandomCrop: {
      if (!(0.0 < params.crop_min_frac && params.crop_min_frac <= params.crop_max_frac &&
            params.crop_max_frac <= 1.0)) {
        throw std::invalid_argument("perturb_depth: invalid crop fraction range");
      }
      if (out.empty()) break;
      const int cw = crop_extent(out.width(), params, rng);
      const int ch = crop_extent(out.height(), params, rng);
      std::uniform_int_distribution<int> px(0, out.width() - cw);
      std::uniform_int_distribution<int> py(0, out.height() - ch);
      const int x0 = px(rng);
      const int y0 = py(rng);
      for (int y = y0; y < y0 + ch; ++y)
        for (int x = x0; x < x0 + cw; ++x) out.at(x, y) = 0.0;
      break;
    }
    case PerturbKind::kGaussianNoise: {
      std::normal_distribution<double> noise(0.0, params.noise_stddev);
      for (double& v : out.data()) v = std::clamp(v + noise(rng), 0.0, 1.0);
      break;
    }
    default:
      throw std::invalid_argument("perturb_depth: unknown kind");
  }
  return out;
}

}  // namespace refocus::dof
