#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refocus/imaging/raster.hpp"

namespace refocus::imaging {

enum class TextureKind { kChecker, kNoise, kGradient, kMixed };

std::string_view to_string(TextureKind kind);
TextureKind parse_texture_kind(std::string_view name);

// Procedural layered scene. Layer 0 is the background and fills the frame;
// later layers are shapes painted over it, so layer_depths must be strictly
// increasing (nearer layers occlude farther ones).
struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 64;
  int height = 64;
  int layer_count = 1;
  TextureKind texture_kind = TextureKind::kMixed;
  std::vector<double> layer_depths = {0.5};
};

struct Scene {
  RasterImage image;  // 3 channels
  DepthMap depth;
};

// Deterministic: the same spec always yields bitwise-identical outputs.
// Every layer keeps at least one visible pixel.
Scene generate_scene(const SceneSpec& spec);

// Evenly spread depths for n layers in [lo, hi].
std::vector<double> spread_depths(int n, double lo, double hi);

}  // namespace refocus::imaging
