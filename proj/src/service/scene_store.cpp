#include "refocus/service/scene_store.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>

#include "refocus/imaging/image_io.hpp"
#include "refocus/imaging/scene.hpp"

namespace refocus::service {

namespace fs = std::filesystem;

std::string_view to_string(SceneSource source) {
  return source == SceneSource::kProcedural ? "procedural" : "uploaded";
}

std::string SceneStore::unique_id_locked(const std::string& preferred) {
  if (!preferred.empty() && !scenes_.count(preferred)) return preferred;
  const std::string base = preferred.empty() ? "scene" : preferred;
  for (;;) {
    std::string id = base + "-" + std::to_string(next_id_++);
    if (!scenes_.count(id)) return id;
  }
}

SceneRecord SceneStore::add(imaging::RasterImage image, std::optional<imaging::DepthMap> depth,
                            SceneSource source, const std::string& preferred_id) {
  if (image.empty()) throw std::invalid_argument("scene store: empty image");
  if (depth && !depth->same_size(image)) {
    throw std::invalid_argument("scene store: depth size differs from image");
  }
  SceneRecord record;
  record.width = image.width();
  record.height = image.height();
  record.has_depth = depth.has_value();
  record.source = source;
  auto depth_ptr = std::make_shared<const imaging::DepthMap>(
      depth ? std::move(*depth) : imaging::DepthMap(image.width(), image.height(), kFallbackDepth));
  auto image_ptr = std::make_shared<const imaging::RasterImage>(std::move(image));

  std::unique_lock lock(mutex_);
  record.scene_id = unique_id_locked(preferred_id);
  scenes_.emplace(record.scene_id, StoredScene{record, std::move(image_ptr), std::move(depth_ptr)});
  order_.push_back(record.scene_id);
  return record;
}

std::optional<StoredScene> SceneStore::get(const std::string& scene_id) const {
  std::shared_lock lock(mutex_);
  auto it = scenes_.find(scene_id);
  if (it == scenes_.end()) return std::nullopt;
  return it->second;
}

std::vector<SceneRecord> SceneStore::list() const {
  std::shared_lock lock(mutex_);
  std::vector<SceneRecord> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(scenes_.at(id).record);
  return out;
}

std::size_t SceneStore::size() const {
  std::shared_lock lock(mutex_);
  return scenes_.size();
}

namespace {

std::optional<fs::path> first_existing(const fs::path& dir, const std::string& stem,
                                       std::initializer_list<const char*> exts) {
  for (const char* ext : exts) {
    fs::path p = dir / (stem + ext);
    if (fs::is_regular_file(p)) return p;
  }
  return std::nullopt;
}

bool is_image_ext(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".ppm";
}

}  // namespace

std::size_t SceneStore::load_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + ": not a directory");
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());

  std::size_t added = 0;
  for (const auto& path : entries) {
    std::optional<fs::path> image_path, depth_path;
    std::string id;
    if (fs::is_directory(path)) {
      image_path = first_existing(path, "aif", {".png", ".ppm"});
      if (!image_path) image_path = first_existing(path, "image", {".png", ".ppm"});
      depth_path = first_existing(path, "depth", {".png", ".pgm"});
      id = path.filename().string();
    } else if (fs::is_regular_file(path) && is_image_ext(path)) {
      const std::string stem = path.stem().string();
      if (stem.size() > 6 && stem.ends_with("_depth")) continue;
      image_path = path;
      depth_path = first_existing(dir, stem + "_depth", {".png", ".pgm"});
      id = stem;
    }
    if (!image_path) continue;
    auto image = imaging::read_image(*image_path);
    std::optional<imaging::DepthMap> depth;
    if (depth_path) depth = imaging::read_depth(*depth_path);
    add(std::move(image), std::move(depth), SceneSource::kUploaded, id);
    ++added;
  }
  return added;
}

void SceneStore::add_procedural(int count, std::uint64_t seed, int width, int height) {
  for (int i = 0; i < count; ++i) {
    imaging::SceneSpec spec;
    spec.seed = seed + static_cast<std::uint64_t>(i);
    spec.width = width;
    spec.height = height;
    spec.layer_count = 3;
    spec.layer_depths = {0.2, 0.5, 0.8};
    auto scene = imaging::generate_scene(spec);
    add(imaging::quantize8(scene.image), std::move(scene.depth), SceneSource::kProcedural,
        "procedural-" + std::to_string(i));
  }
}

}  // namespace refocus::service
