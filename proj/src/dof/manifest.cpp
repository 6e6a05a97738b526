#include "refocus/dof/manifest.hpp"

#include <algorithm>
#include <json.hpp>

namespace refocus::dof {

using nlohmann::json;

std::string variant_to_line(const DofVariant& v) {
  json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["scene_id"] = v.scene_id;
  j["image_path"] = v.image_path;
  j["depth_path"] = v.depth_path;
  if (v.focus_depth) {
    j["focus_depth"] = *v.focus_depth;
  } else {
    j["focus_depth"] = "aif";
  }
  j["bokeh_level"] = v.bokeh_level;
  json points = json::array();
  for (const auto& p : v.focus_points) points.push_back({p.fx, p.fy});
  j["focus_points"] = std::move(points);
  j["source_kind"] = std::string(to_string(v.source_kind));
  return j.dump();
}

DofVariant variant_from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("manifest: malformed record: ") + e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kManifestSchemaVersion) {
      throw std::runtime_error("manifest: unsupported schema_version " + std::to_string(version));
    }
    DofVariant v;
    v.scene_id = j.at("scene_id").get<std::string>();
    v.image_path = j.at("image_path").get<std::string>();
    v.depth_path = j.at("depth_path").get<std::string>();
    const json& fd = j.at("focus_depth");
    if (fd.is_string()) {
      if (fd.get<std::string>() != "aif") throw std::runtime_error("manifest: bad focus_depth");
    } else {
      v.focus_depth = fd.get<double>();
    }
    v.bokeh_level = j.at("bokeh_level").get<double>();
    for (const auto& p : j.at("focus_points")) {
      if (!p.is_array() || p.size() != 2) throw std::runtime_error("manifest: bad focus point");
      v.focus_points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    v.source_kind = parse_source_kind(j.at("source_kind").get<std::string>());
    return v;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("manifest: invalid record: ") + e.what());
  }
}

Manifest::Manifest(std::filesystem::path base_dir, std::vector<DofVariant> variants)
    : base_dir_(std::move(base_dir)), variants_(std::move(variants)) {
  for (std::size_t i = 0; i < variants_.size(); ++i) {
    auto [it, inserted] = by_scene_.try_emplace(variants_[i].scene_id);
    if (inserted) scene_ids_.push_back(variants_[i].scene_id);
    it->second.push_back(i);
  }
}

const std::vector<std::size_t>& Manifest::scene_variants(const std::string& scene_id) const {
  auto it = by_scene_.find(scene_id);
  if (it == by_scene_.end()) throw std::out_of_range("manifest: unknown scene " + scene_id);
  return it->second;
}

SourceKind Manifest::scene_kind(const std::string& scene_id) const {
  return variants_[scene_variants(scene_id).front()].source_kind;
}

ManifestWriter::ManifestWriter(const std::filesystem::path& path, bool append)
    : path_(path), out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw std::runtime_error(path.string() + ": cannot open manifest for writing");
}

void ManifestWriter::write(const DofVariant& v) {
  out_ << variant_to_line(v) << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error(path_.string() + ": manifest write failed");
}

void write_manifest(const std::filesystem::path& path, const std::vector<DofVariant>& variants) {
  ManifestWriter writer(path);
  for (const auto& v : variants) writer.write(v);
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open manifest");
  std::vector<DofVariant> variants;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      variants.push_back(variant_from_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Manifest(path.parent_path(), std::move(variants));
}

SampledPair sample_pair_in_scene(const Manifest& manifest, const std::string& scene_id,
                                 std::mt19937_64& rng) {
  const auto& members = manifest.scene_variants(scene_id);
  if (members.size() < 2) throw SkipError("scene " + scene_id + " has fewer than 2 variants");
  std::vector<std::size_t> targets;
  for (std::size_t i : members) {
    const auto& v = manifest.variants()[i];
    if (v.all_in_focus() || !v.focus_points.empty()) targets.push_back(i);
  }
  if (targets.empty()) throw SkipError("scene " + scene_id + " has no usable target");

  std::uniform_int_distribution<std::size_t> pick_target(0, targets.size() - 1);
  const std::size_t target = targets[pick_target(rng)];
  std::uniform_int_distribution<std::size_t> pick_ref(0, members.size() - 2);
  std::size_t ref_slot = pick_ref(rng);
  const auto target_slot = static_cast<std::size_t>(
      std::find(members.begin(), members.end(), target) - members.begin());
  if (ref_slot >= target_slot) ++ref_slot;

  SampledPair pair;
  pair.reference = manifest.variants()[members[ref_slot]];
  pair.target = manifest.variants()[target];
  if (pair.target.all_in_focus()) {
    pair.condition = {0.5, 0.5, 0.0};
  } else {
    const auto& pts = pair.target.focus_points;
    std::uniform_int_distribution<std::size_t> pick_point(0, pts.size() - 1);
    const FocusPoint fp = pts[pick_point(rng)];
    pair.condition = {fp.fx, fp.fy, pair.target.bokeh_level};
  }
  return pair;
}

SampledPair sample_pair(const Manifest& manifest, std::mt19937_64& rng,
                        std::optional<SourceKind> kind) {
  const auto& ids = manifest.scene_ids();
  if (ids.empty()) throw SkipError("manifest has no scenes");
  std::vector<const std::string*> pool;
  if (kind) {
    for (const auto& id : ids) {
      if (manifest.scene_kind(id) == *kind) pool.push_back(&id);
    }
  }
  if (pool.empty()) {
    for (const auto& id : ids) pool.push_back(&id);
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return sample_pair_in_scene(manifest, *pool[pick(rng)], rng);
}

}  // namespace refocus::dof
