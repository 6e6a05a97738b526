#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "refocus/imaging/raster.hpp"

namespace refocus::service {

enum class SceneSource { kUploaded, kProcedural };
std::string_view to_string(SceneSource source);

struct SceneRecord {
  std::string scene_id;
  int width = 0;
  int height = 0;
  // False when the depth map is the flat 0.5 fallback.
  bool has_depth = false;
  SceneSource source = SceneSource::kUploaded;
};

// Images are immutable once stored and shared by pointer with readers.
struct StoredScene {
  SceneRecord record;
  std::shared_ptr<const imaging::RasterImage> image;
  std::shared_ptr<const imaging::DepthMap> depth;
};

inline constexpr double kFallbackDepth = 0.5;

// Read-mostly map of scenes. Lookups take a shared lock; inserts take the
// exclusive lock.
class SceneStore {
 public:
  // Missing depth is replaced by a flat kFallbackDepth map. An empty or
  // taken preferred_id gets a generated id instead.
  SceneRecord add(imaging::RasterImage image, std::optional<imaging::DepthMap> depth,
                  SceneSource source, const std::string& preferred_id = {});

  std::optional<StoredScene> get(const std::string& scene_id) const;
  std::vector<SceneRecord> list() const;
  std::size_t size() const;

  // Loads <stem>.{png,ppm} with optional <stem>_depth.{png,pgm} from the
  // directory, and subdirectories holding aif.* or image.* with depth.*.
  // Returns the number of scenes added.
  std::size_t load_directory(const std::filesystem::path& dir);

  // Adds `count` three-layer procedural scenes of the given size.
  void add_procedural(int count, std::uint64_t seed, int width = 256, int height = 256);

 private:
  std::string unique_id_locked(const std::string& preferred);

  mutable std::shared_mutex mutex_;
  std::map<std::string, StoredScene> scenes_;
  std::vector<std::string> order_;
  std::uint64_t next_id_ = 1;
};

}  // namespace refocus::service
