#include "refocus/imaging/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace refocus::imaging {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Small portable generator so scenes are identical across standard libraries.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : state_(seed) {}
  double uniform() {
    state_ = splitmix64(state_);
    return to_unit(state_);
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform() * static_cast<double>(hi - lo + 1));
  }

 private:
  std::uint64_t state_;
};

using Color = std::array<double, 3>;

Color random_color(SceneRng& rng) {
  return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
}

double lattice(std::uint64_t seed, int ix, int iy) {
  const auto key = seed ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) ^
                   static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy));
  return to_unit(splitmix64(splitmix64(key)));
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, double x, double y, double cell) {
  const double gx = x / cell;
  const double gy = y / cell;
  const int ix = static_cast<int>(std::floor(gx));
  const int iy = static_cast<int>(std::floor(gy));
  const double tx = smoothstep(gx - ix);
  const double ty = smoothstep(gy - iy);
  const double a = lattice(seed, ix, iy);
  const double b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1);
  const double d = lattice(seed, ix + 1, iy + 1);
  return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

struct LayerTexture {
  TextureKind kind;
  std::uint64_t seed;
  Color c0, c1;
  int checker_cell;
  double gradient_angle;
  double noise_amp;

  Color sample(int x, int y) const {
    double t = 0.0;
    switch (kind) {
      case TextureKind::kChecker:
        t = ((x / checker_cell + y / checker_cell) % 2 == 0) ? 0.0 : 1.0;
        break;
      case TextureKind::kNoise:
        t = 0.5 + noise_amp * (lattice(seed, x, y) - 0.5);
        break;
      case TextureKind::kGradient: {
        const double u = std::cos(gradient_angle) * x + std::sin(gradient_angle) * y;
        t = 0.5 + 0.5 * std::sin(u / 24.0);
        break;
      }
      case TextureKind::kMixed: {
        // Octave weights roughly follow a 1/f spectrum.
        constexpr std::array<double, 5> cells = {1.0, 2.0, 4.0, 8.0, 16.0};
        double acc = 0.0;
        double norm = 0.0;
        for (std::size_t o = 0; o < cells.size(); ++o) {
          const double wgt = std::sqrt(cells[o]);
          acc += wgt * value_noise(seed + 131 * o, x, y, cells[o]);
          norm += wgt;
        }
        t = acc / norm;
        t = std::clamp(0.5 + 2.2 * (t - 0.5), 0.0, 1.0);
        if (((x / checker_cell + y / checker_cell) % 2) == 0) t = 0.85 * t + 0.15;
        else t = 0.85 * t;
        break;
      }
    }
    Color out{};
    for (int c = 0; c < 3; ++c) {
      out[c] = std::clamp(c0[c] * (1.0 - t) + c1[c] * t, 0.0, 1.0);
    }
    return out;
  }
};

struct Shape {
  bool ellipse;
  double cx, cy, rx, ry;
  bool contains(int x, int y) const {
    const double dx = (x + 0.5 - cx) / rx;
    const double dy = (y + 0.5 - cy) / ry;
    if (ellipse) return dx * dx + dy * dy <= 1.0;
    return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
  }
};

void validate(const SceneSpec& spec) {
  if (spec.width < 1 || spec.height < 1) {
    throw std::invalid_argument("SceneSpec: dimensions must be positive");
  }
  if (spec.layer_count < 1) {
    throw std::invalid_argument("SceneSpec: layer_count must be >= 1");
  }
  if (static_cast<std::size_t>(spec.layer_count) != spec.layer_depths.size()) {
    throw std::invalid_argument("SceneSpec: layer_count != |layer_depths|");
  }
  for (std::size_t i = 0; i < spec.layer_depths.size(); ++i) {
    const double d = spec.layer_depths[i];
    if (!(d >= 0.0 && d <= 1.0)) {
      throw std::invalid_argument("SceneSpec: layer depth outside [0,1]");
    }
    if (i > 0 && !(d > spec.layer_depths[i - 1])) {
      throw std::invalid_argument("SceneSpec: layer_depths must be strictly increasing");
    }
  }
  if (static_cast<long long>(spec.width) * spec.height < spec.layer_count) {
    throw std::invalid_argument("SceneSpec: too few pixels for the layer count");
  }
}

// Layer index per pixel; -1 entries never occur.
std::vector<int> layout_layers(const SceneSpec& spec, SceneRng& rng) {
  const int w = spec.width;
  const int h = spec.height;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t min_visible = std::max<std::size_t>(1, n / 50);
  std::vector<int> labels(n, 0);

  for (int attempt = 0; attempt < 64 && spec.layer_count > 1; ++attempt) {
    std::fill(labels.begin(), labels.end(), 0);
    for (int layer = 1; layer < spec.layer_count; ++layer) {
      // Nearer layers get smaller shapes so farther ones stay visible.
      const double scale = 0.55 - 0.3 * layer / static_cast<double>(spec.layer_count);
      Shape s{};
      s.ellipse = (layer % 2) == 0;
      s.rx = w * rng.uniform(0.6, 1.0) * scale;
      s.ry = h * rng.uniform(0.6, 1.0) * scale;
      s.cx = rng.uniform(0.2, 0.8) * w;
      s.cy = rng.uniform(0.2, 0.8) * h;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (s.contains(x, y)) labels[static_cast<std::size_t>(y) * w + x] = layer;
        }
      }
    }
    std::vector<std::size_t> counts(spec.layer_count, 0);
    for (int l : labels) ++counts[l];
    if (std::all_of(counts.begin(), counts.end(),
                    [&](std::size_t c) { return c >= min_visible; })) {
      return labels;
    }
  }
  if (spec.layer_count == 1) return labels;

  // Fallback for tiny frames: equal bands in raster order.
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i * spec.layer_count / n);
  }
  return labels;
}

}  // namespace

std::string_view to_string(TextureKind kind) {
  switch (kind) {
    case TextureKind::kChecker: return "checker";
    case TextureKind::kNoise: return "noise";
    case TextureKind::kGradient: return "gradient";
    case TextureKind::kMixed: return "mixed";
  }
  return "mixed";
}

TextureKind parse_texture_kind(std::string_view name) {
  if (name == "checker") return TextureKind::kChecker;
  if (name == "noise") return TextureKind::kNoise;
  if (name == "gradient") return TextureKind::kGradient;
  if (name == "mixed") return TextureKind::kMixed;
  throw std::invalid_argument("unknown texture kind: " + std::string(name));
}

Scene generate_scene(const SceneSpec& spec) {
  validate(spec);
  SceneRng rng(splitmix64(spec.seed ^ 0x5ce11eULL));

  std::vector<LayerTexture> textures;
  textures.reserve(spec.layer_count);
  for (int layer = 0; layer < spec.layer_count; ++layer) {
    LayerTexture tex{};
    tex.kind = spec.texture_kind;
    tex.seed = splitmix64(spec.seed + 7919ULL * static_cast<std::uint64_t>(layer + 1));
    tex.c0 = random_color(rng);
    tex.c1 = random_color(rng);
    // Keep contrast so every layer carries texture.
    double contrast = 0.0;
    for (int c = 0; c < 3; ++c) contrast += std::abs(tex.c0[c] - tex.c1[c]);
    if (contrast < 0.6) {
      for (int c = 0; c < 3; ++c) tex.c1[c] = 1.0 - tex.c0[c];
    }
    tex.checker_cell = rng.uniform_int(3, 6);
    tex.gradient_angle = rng.uniform(0.0, 3.14159265358979);
    tex.noise_amp = rng.uniform(0.6, 1.0);
    textures.push_back(tex);
  }

  const std::vector<int> labels = layout_layers(spec, rng);

  Scene scene{RasterImage(spec.width, spec.height, 3), DepthMap(spec.width, spec.height)};
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const int layer = labels[static_cast<std::size_t>(y) * spec.width + x];
      const Color col = textures[layer].sample(x, y);
      for (int c = 0; c < 3; ++c) scene.image.at(x, y, c) = col[c];
      scene.depth.at(x, y) = spec.layer_depths[layer];
    }
  }
  return scene;
}

std::vector<double> spread_depths(int n, double lo, double hi) {
  if (n < 1) throw std::invalid_argument("spread_depths: n must be >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = 0.5 * (lo + hi);
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / static_cast<double>(n - 1);
  return out;
}

}  // namespace refocus::imaging
