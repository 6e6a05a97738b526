#include "refocus/dof/dof_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "refocus/bokeh/render.hpp"
#include "refocus/dof/manifest.hpp"
#include "refocus/imaging/image_io.hpp"
#include "refocus/imaging/laplacian.hpp"
#include "refocus/imaging/scene.hpp"

namespace refocus::dof {

void CameraCondition::validate() const {
  if (!(fx >= 0.0 && fx <= 1.0 && fy >= 0.0 && fy <= 1.0)) {
    throw std::invalid_argument("CameraCondition: focus point outside [0,1]^2");
  }
  if (!(b >= 0.0)) throw std::invalid_argument("CameraCondition: bokeh level must be >= 0");
}

std::string_view to_string(SourceKind kind) {
  return kind == SourceKind::kSynthetic ? "synthetic" : "photo";
}

SourceKind parse_source_kind(std::string_view name) {
  if (name == "photo") return SourceKind::kPhoto;
  if (name == "synthetic") return SourceKind::kSynthetic;
  throw std::invalid_argument("unknown source kind: " + std::string(name));
}

StackMask focus_set(const DepthMap& depth, double d, double eps) {
  StackMask mask(depth.width(), depth.height());
  auto src = depth.data();
  auto dst = mask.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::abs(src[i] - d) < eps ? 1 : 0;
  return mask;
}

std::vector<double> default_planes() {
  std::vector<double> planes(21);
  // Built from integers so every plane is the closest double to k/20.
  for (int k = 0; k <= 20; ++k) planes[k] = k / 20.0;
  return planes;
}

std::vector<double> default_levels() {
  std::vector<double> levels(20);
  for (int k = 0; k < 20; ++k) levels[k] = k + 1.0;
  return levels;
}

std::vector<FocusPoint> sample_focus_points(const DepthMap& depth, double d, double eps,
                                            int max_samples, std::mt19937_64& rng) {
  const StackMask members = focus_set(depth, d, eps);
  std::vector<std::size_t> candidates;
  auto m = members.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) candidates.push_back(i);
  }
  std::vector<std::size_t> chosen;
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(chosen),
              std::max(max_samples, 0), rng);
  std::vector<FocusPoint> points;
  points.reserve(chosen.size());
  for (std::size_t i : chosen) {
    const int x = static_cast<int>(i % depth.width());
    const int y = static_cast<int>(i / depth.width());
    points.push_back({imaging::pixel_to_normalized(x, depth.width()),
                      imaging::pixel_to_normalized(y, depth.height())});
  }
  return points;
}

namespace {

std::string variant_name(double plane, double level, const std::string& ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "f%.3f_b%g%s", plane, level, ext.c_str());
  return buf;
}

}  // namespace

std::vector<DofVariant> simulate_variants(const RasterImage& img, const DepthMap& depth,
                                          const SimulateOptions& options,
                                          const std::filesystem::path& out_dir) {
  if (options.planes.empty()) throw std::invalid_argument("simulate_variants: empty plane list");
  if (options.levels.empty()) throw std::invalid_argument("simulate_variants: empty level list");
  for (double p : options.planes) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("simulate_variants: plane outside [0,1]");
  }
  for (double l : options.levels) {
    if (!(l >= 0.0)) throw std::invalid_argument("simulate_variants: negative bokeh level");
  }
  if (!depth.same_size(img)) {
    throw std::invalid_argument("simulate_variants: image and depth dimensions differ");
  }
  if (options.scene_id.empty()) throw std::invalid_argument("simulate_variants: empty scene id");

  const std::filesystem::path scene_dir = out_dir / options.scene_id;
  std::filesystem::create_directories(scene_dir);
  const std::string depth_rel = options.scene_id + "/depth.pgm";
  imaging::write_depth(out_dir / depth_rel, depth);

  std::mt19937_64 rng(options.seed);
  std::vector<DofVariant> variants;
  variants.reserve(options.planes.size() * options.levels.size() + 1);

  DofVariant aif;
  aif.scene_id = options.scene_id;
  aif.bokeh_level = 0.0;
  aif.image_path = options.scene_id + "/aif" + options.image_extension;
  aif.depth_path = depth_rel;
  aif.source_kind = options.source_kind;
  imaging::write_image(out_dir / aif.image_path, img);
  variants.push_back(aif);

  for (double plane : options.planes) {
    for (double level : options.levels) {
      bokeh::RenderParams params;
      params.focus_depth = plane;
      params.bokeh_level = level;
      params.radius_scale = options.radius_scale;
      const RasterImage rendered = bokeh::render_fast(img, depth, params);

      DofVariant v;
      v.scene_id = options.scene_id;
      v.focus_depth = plane;
      v.bokeh_level = level;
      v.image_path = options.scene_id + "/" + variant_name(plane, level, options.image_extension);
      v.depth_path = depth_rel;
      v.source_kind = options.source_kind;
      v.focus_points =
          sample_focus_points(depth, plane, options.eps, options.max_focus_samples, rng);
      imaging::write_image(out_dir / v.image_path, rendered);
      variants.push_back(std::move(v));
    }
  }
  return variants;
}

double sharpness_score(const RasterImage& img) {
  return 255.0 * 255.0 * imaging::laplacian_variance(img);
}

FilterResult filter_all_in_focus(std::span<const RasterImage> images, double tau) {
  FilterResult result;
  for (std::size_t i = 0; i < images.size(); ++i) {
    (sharpness_score(images[i]) >= tau ? result.kept : result.rejected).push_back(i);
  }
  return result;
}

void SamplerSchedule::validate() const {
  if (!(0.0 <= ramp_begin_frac && ramp_begin_frac <= ramp_end_frac && ramp_end_frac <= 1.0)) {
    throw std::invalid_argument("SamplerSchedule: need 0 <= ramp_begin <= ramp_end <= 1");
  }
  if (!(p_synth_start >= 0.0 && p_synth_start <= 1.0 && p_synth_end >= 0.0 && p_synth_end <= 1.0)) {
    throw std::invalid_argument("SamplerSchedule: probabilities must be in [0,1]");
  }
}

double synth_probability(long step, long total_steps, const SamplerSchedule& sched) {
  sched.validate();
  if (total_steps < 0 || step < 0 || step > total_steps) {
    throw std::invalid_argument("synth_probability: need 0 <= step <= total_steps");
  }
  const double frac = total_steps == 0 ? 0.0 : static_cast<double>(step) / total_steps;
  if (frac <= sched.ramp_begin_frac) return sched.p_synth_start;
  if (frac >= sched.ramp_end_frac) return sched.p_synth_end;
  const double t = (frac - sched.ramp_begin_frac) / (sched.ramp_end_frac - sched.ramp_begin_frac);
  return sched.p_synth_start + t * (sched.p_synth_end - sched.p_synth_start);
}

std::vector<DofVariant> build_procedural_dataset(const std::filesystem::path& out_dir,
                                                 const ProceduralDatasetOptions& options) {
  if (options.scenes < 1) throw std::invalid_argument("procedural dataset: scenes must be >= 1");
  if (options.planes_per_scene < 1 || options.planes_per_scene > options.layers) {
    throw std::invalid_argument("procedural dataset: planes_per_scene outside [1, layers]");
  }
  if (!(options.synthetic_fraction >= 0.0 && options.synthetic_fraction <= 1.0)) {
    throw std::invalid_argument("procedural dataset: synthetic_fraction outside [0,1]");
  }
  std::filesystem::create_directories(out_dir);
  std::mt19937_64 rng(options.seed);
  const int synthetic_scenes =
      static_cast<int>(std::lround(options.synthetic_fraction * options.scenes));
  std::vector<DofVariant> all;
  ManifestWriter writer(out_dir / "manifest.jsonl");
  for (int i = 0; i < options.scenes; ++i) {
    imaging::SceneSpec spec;
    spec.seed = rng();
    spec.width = options.width;
    spec.height = options.height;
    spec.layer_count = options.layers;
    spec.layer_depths = imaging::spread_depths(options.layers, 0.2, 0.8);
    const auto scene = imaging::generate_scene(spec);

    std::vector<double> planes = spec.layer_depths;
    std::shuffle(planes.begin(), planes.end(), rng);
    planes.resize(static_cast<std::size_t>(options.planes_per_scene));
    std::sort(planes.begin(), planes.end());

    SimulateOptions sim;
    sim.scene_id = "proc_" + std::to_string(i);
    sim.source_kind = i < synthetic_scenes ? SourceKind::kSynthetic : SourceKind::kPhoto;
    sim.planes = planes;
    sim.levels = options.levels;
    sim.seed = rng();
    for (auto& v : simulate_variants(imaging::quantize8(scene.image), scene.depth, sim, out_dir)) {
      writer.write(v);
      all.push_back(std::move(v));
    }
  }
  return all;
}

}  // namespace refocus::dof
