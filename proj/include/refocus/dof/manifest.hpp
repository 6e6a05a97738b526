#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "refocus/dof/dof_sim.hpp"

namespace refocus::dof {

inline constexpr int kManifestSchemaVersion = 1;

// Line-delimited JSON, one DofVariant per line.
std::string variant_to_line(const DofVariant& v);
DofVariant variant_from_line(const std::string& line);

class Manifest {
 public:
  Manifest() = default;
  Manifest(std::filesystem::path base_dir, std::vector<DofVariant> variants);

  const std::filesystem::path& base_dir() const { return base_dir_; }
  const std::vector<DofVariant>& variants() const { return variants_; }
  const std::vector<std::string>& scene_ids() const { return scene_ids_; }
  const std::vector<std::size_t>& scene_variants(const std::string& scene_id) const;
  SourceKind scene_kind(const std::string& scene_id) const;

  std::filesystem::path resolve(const std::string& relative) const {
    return base_dir_ / relative;
  }

 private:
  std::filesystem::path base_dir_;
  std::vector<DofVariant> variants_;
  std::vector<std::string> scene_ids_;  // first-appearance order
  std::map<std::string, std::vector<std::size_t>> by_scene_;
};

// Appends records to a manifest file, one line each, flushing per record.
class ManifestWriter {
 public:
  explicit ManifestWriter(const std::filesystem::path& path, bool append = false);
  void write(const DofVariant& v);

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_manifest(const std::filesystem::path& path, const std::vector<DofVariant>& variants);
Manifest read_manifest(const std::filesystem::path& path);

class SkipError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SampledPair {
  DofVariant reference;
  DofVariant target;
  CameraCondition condition;
};

// Ordered pair of distinct variants from one scene: the target is drawn
// uniformly from variants that carry a usable condition (all-in-focus, or at
// least one focus point), the reference uniformly from the rest. The
// condition uses one of the target's focus points and its bokeh level; an
// all-in-focus target gets (0.5, 0.5, 0). Throws SkipError for scenes with
// fewer than two variants or no usable target.
SampledPair sample_pair_in_scene(const Manifest& manifest, const std::string& scene_id,
                                 std::mt19937_64& rng);

// Scene drawn uniformly, optionally restricted to one source kind (falling
// back to all scenes when that kind is absent).
SampledPair sample_pair(const Manifest& manifest, std::mt19937_64& rng,
                        std::optional<SourceKind> kind = std::nullopt);

}  // namespace refocus::dof
