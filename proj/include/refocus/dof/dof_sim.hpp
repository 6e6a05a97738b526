#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refocus/imaging/raster.hpp"
#include "refocus/stack/focus_stack.hpp"

namespace refocus::dof {

using imaging::DepthMap;
using imaging::RasterImage;
using stack::StackMask;

// Normalized focus point (origin top-left) and bokeh level.
struct CameraCondition {
  double fx = 0.5;
  double fy = 0.5;
  double b = 0.0;

  void validate() const;
  friend bool operator==(const CameraCondition&, const CameraCondition&) = default;
};

struct FocusPoint {
  double fx = 0.0;
  double fy = 0.0;
  friend bool operator==(const FocusPoint&, const FocusPoint&) = default;
};

enum class SourceKind { kPhoto, kSynthetic };
std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view name);

// One simulated image of a scene. An empty focus_depth marks the
// all-in-focus original. Paths are relative to the manifest directory.
struct DofVariant {
  std::string scene_id;
  std::optional<double> focus_depth;
  double bokeh_level = 0.0;
  std::string image_path;
  std::string depth_path;
  std::vector<FocusPoint> focus_points;
  SourceKind source_kind = SourceKind::kPhoto;

  bool all_in_focus() const { return !focus_depth.has_value(); }
  friend bool operator==(const DofVariant&, const DofVariant&) = default;
};

// Half of the 0.05 plane spacing.
inline constexpr double kDefaultFocusEps = 0.025;
inline constexpr int kMaxFocusSamples = 8;

// mask(p) = 1 iff |D(p) - d| < eps.
StackMask focus_set(const DepthMap& depth, double d, double eps = kDefaultFocusEps);

// 21 planes 0.00, 0.05, ..., 1.00.
std::vector<double> default_planes();
// Bokeh levels 1..20.
std::vector<double> default_levels();

struct SimulateOptions {
  std::string scene_id = "scene";
  SourceKind source_kind = SourceKind::kPhoto;
  std::vector<double> planes = default_planes();
  std::vector<double> levels = default_levels();
  double eps = kDefaultFocusEps;
  int max_focus_samples = kMaxFocusSamples;
  double radius_scale = 1.0;
  std::uint64_t seed = 0;
  std::string image_extension = ".ppm";
};

// Renders |planes| x |levels| variants with the fast renderer plus the
// all-in-focus original, writing images and the depth map under
// out_dir/<scene_id>/. Focus points are sampled uniformly (without
// replacement) from each plane's focus set. Returned paths are relative to
// out_dir.
std::vector<DofVariant> simulate_variants(const RasterImage& img, const DepthMap& depth,
                                          const SimulateOptions& options,
                                          const std::filesystem::path& out_dir);

// Up to max_samples distinct members of the focus set, in raster order.
std::vector<FocusPoint> sample_focus_points(const DepthMap& depth, double d, double eps,
                                            int max_samples, std::mt19937_64& rng);

// Laplacian variance of the 0-255 scaled luminance.
double sharpness_score(const RasterImage& img);

struct FilterResult {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> rejected;
};

// Keeps images with sharpness_score >= tau.
FilterResult filter_all_in_focus(std::span<const RasterImage> images, double tau);

struct SamplerSchedule {
  double p_synth_start = 0.5;
  double p_synth_end = 1.0;
  double ramp_begin_frac = 1000.0 / 3600.0;
  double ramp_end_frac = 2500.0 / 3600.0;

  void validate() const;
};

// Probability of drawing a synthetic scene at `step`: flat before the ramp,
// linear during it, flat after.
double synth_probability(long step, long total_steps, const SamplerSchedule& sched);

struct ProceduralDatasetOptions {
  int scenes = 40;
  int width = 32;
  int height = 32;
  int layers = 3;
  // Each scene is rendered focused on `planes_per_scene` of its layer depths
  // at every level below, plus the all-in-focus original.
  int planes_per_scene = 2;
  std::vector<double> levels = {4.0, 12.0};
  double synthetic_fraction = 0.5;
  std::uint64_t seed = 0;
};

// Generates procedural scenes, simulates their variants under out_dir and
// writes out_dir/manifest.jsonl. Returns all variants.
std::vector<DofVariant> build_procedural_dataset(const std::filesystem::path& out_dir,
                                                 const ProceduralDatasetOptions& options);

}  // namespace refocus::dof
