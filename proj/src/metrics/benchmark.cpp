#include "refocus/metrics/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "refocus/imaging/image_io.hpp"
#include "refocus/metrics/metrics.hpp"

namespace refocus::metrics {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(BenchTask task) {
  switch (task) {
    case BenchTask::kRefocus: return "refocus";
    case BenchTask::kAddBokeh: return "add_bokeh";
    case BenchTask::kRemoveBokeh: return "remove_bokeh";
  }
  return "refocus";
}

BenchTask parse_bench_task(std::string_view name) {
  if (name == "refocus") return BenchTask::kRefocus;
  if (name == "add_bokeh") return BenchTask::kAddBokeh;
  if (name == "remove_bokeh") return BenchTask::kRemoveBokeh;
  throw std::invalid_argument("unknown benchmark task: " + std::string(name));
}

std::vector<BenchmarkSample> BenchmarkScene::all_samples() const {
  std::vector<BenchmarkSample> out = refocus_samples;
  out.insert(out.end(), add_bokeh_samples.begin(), add_bokeh_samples.end());
  out.insert(out.end(), remove_bokeh_samples.begin(), remove_bokeh_samples.end());
  return out;
}

namespace {

struct Pixel {
  int x, y;
};

Pixel random_pixel_at_depth(const imaging::DepthMap& depth, double d, std::mt19937_64& rng) {
  std::vector<Pixel> candidates;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.at(x, y) == d) candidates.push_back({x, y});
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

dof::CameraCondition condition_at(const imaging::DepthMap& depth, Pixel p, double b) {
  return {imaging::pixel_to_normalized(p.x, depth.width()),
          imaging::pixel_to_normalized(p.y, depth.height()), b};
}

imaging::RasterImage render_at(const Renderer& renderer, const imaging::RasterImage& img,
                               const imaging::DepthMap& depth, Pixel p, double b,
                               double radius_scale) {
  bokeh::RenderParams params;
  params.focus_depth = depth.at(p.x, p.y);
  params.bokeh_level = b;
  params.radius_scale = radius_scale;
  return renderer(img, depth, params);
}

std::string level_tag(double b) {
  std::ostringstream s;
  s << b;
  return s.str();
}

json sample_to_json(const BenchmarkSample& s) {
  return {{"sample_id", s.sample_id},
          {"scene_id", s.scene_id},
          {"task", std::string(to_string(s.task))},
          {"input_path", s.input_path},
          {"target_path", s.target_path},
          {"fx", s.condition.fx},
          {"fy", s.condition.fy},
          {"bokeh", s.condition.b}};
}

BenchmarkSample sample_from_json(const json& j) {
  BenchmarkSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.scene_id = j.at("scene_id").get<std::string>();
  s.task = parse_bench_task(j.at("task").get<std::string>());
  s.input_path = j.at("input_path").get<std::string>();
  s.target_path = j.at("target_path").get<std::string>();
  s.condition = {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("bokeh").get<double>()};
  return s;
}

}  // namespace

std::vector<imaging::SceneSpec> default_bench_specs(int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("bench: scene count must be >= 1");
  std::vector<imaging::SceneSpec> specs;
  for (int i = 0; i < count; ++i) {
    imaging::SceneSpec spec;
    spec.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    spec.width = 64;
    spec.height = 64;
    spec.layer_count = 4;
    spec.layer_depths = imaging::spread_depths(4, 0.15, 0.85);
    specs.push_back(spec);
  }
  return specs;
}

std::vector<BenchmarkScene> build_benchmark(std::span<const imaging::SceneSpec> scenes,
                                            const Renderer& renderer, std::mt19937_64& rng,
                                            const fs::path& out_dir,
                                            const BenchmarkOptions& options) {
  if (scenes.empty()) throw std::invalid_argument("build_benchmark: no scenes");
  const int level_lo = static_cast<int>(std::ceil(options.refocus_level_min));
  const int level_hi = static_cast<int>(std::floor(options.refocus_level_max));
  if (level_lo > level_hi) throw std::invalid_argument("build_benchmark: empty refocus level range");

  std::vector<BenchmarkScene> out;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const auto scene = imaging::generate_scene(scenes[si]);
    // Ground truth goes through the same 8-bit quantization as the files.
    const auto aif = imaging::quantize8(scene.image);
    const auto& depth = scene.depth;

    BenchmarkScene bs;
    std::ostringstream id;
    id << "scene_" << std::setw(3) << std::setfill('0') << si;
    bs.scene_id = id.str();
    fs::create_directories(out_dir / bs.scene_id);
    bs.aif_image_path = bs.scene_id + "/aif.png";
    bs.depth_path = bs.scene_id + "/depth.png";
    imaging::write_image(out_dir / bs.aif_image_path, aif);
    imaging::write_depth(out_dir / bs.depth_path, depth);

    auto save = [&](const imaging::RasterImage& img, const std::string& name) {
      const std::string rel = bs.scene_id + "/" + name;
      imaging::write_image(out_dir / rel, img);
      return rel;
    };

    // Refocus: two points on distinct layers when the scene has them.
    std::set<double> layer_set(depth.data().begin(), depth.data().end());
    std::vector<double> layers(layer_set.begin(), layer_set.end());
    std::shuffle(layers.begin(), layers.end(), rng);
    bs.degenerate_refocus = layers.size() < 2;
    const double d1 = layers[0];
    const double d2 = layers.size() > 1 ? layers[1] : layers[0];
    const Pixel p[2] = {random_pixel_at_depth(depth, d1, rng), random_pixel_at_depth(depth, d2, rng)};
    std::uniform_int_distribution<int> pick_level(level_lo, level_hi);
    const double b[2] = {static_cast<double>(pick_level(rng)),
                         static_cast<double>(pick_level(rng))};
    std::string rendered[2];
    for (int k = 0; k < 2; ++k) {
      rendered[k] = save(render_at(renderer, aif, depth, p[k], b[k], options.radius_scale),
                         "refocus_" + std::to_string(k) + ".png");
    }
    for (int k = 0; k < 2; ++k) {
      const int other = 1 - k;
      bs.refocus_samples.push_back({bs.scene_id + ":refocus:" + std::to_string(k), bs.scene_id,
                                    BenchTask::kRefocus, rendered[k], rendered[other],
                                    condition_at(depth, p[other], b[other])});
    }

    // Add bokeh: one point, four levels. Remove bokeh reuses those renders.
    std::uniform_int_distribution<int> px(0, depth.width() - 1);
    std::uniform_int_distribution<int> py(0, depth.height() - 1);
    const Pixel q{px(rng), py(rng)};
    for (double level : kAddBokehLevels) {
      const std::string tag = level_tag(level);
      const std::string rel = save(render_at(renderer, aif, depth, q, level, options.radius_scale),
                                   "bokeh_b" + tag + ".png");
      bs.add_bokeh_samples.push_back({bs.scene_id + ":add_bokeh:" + tag, bs.scene_id,
                                      BenchTask::kAddBokeh, bs.aif_image_path, rel,
                                      condition_at(depth, q, level)});
      bs.remove_bokeh_samples.push_back({bs.scene_id + ":remove_bokeh:" + tag, bs.scene_id,
                                         BenchTask::kRemoveBokeh, rel, bs.aif_image_path,
                                         {0.5, 0.5, 0.0}});
    }
    out.push_back(std::move(bs));
  }

  write_benchmark(out_dir / kBenchmarkManifest, out);
  std::vector<std::pair<std::string, std::string>> truth;
  for (const auto& bs : out)
    for (const auto& s : bs.all_samples()) truth.emplace_back(s.sample_id, s.target_path);
  write_predictions(out_dir / kGroundTruthPredictions, truth);
  return out;
}

void write_benchmark(const fs::path& path, std::span<const BenchmarkScene> scenes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  for (const auto& bs : scenes) {
    json j;
    j["scene_id"] = bs.scene_id;
    j["aif_image_path"] = bs.aif_image_path;
    j["depth_path"] = bs.depth_path;
    j["degenerate_refocus"] = bs.degenerate_refocus;
    json samples = json::array();
    for (const auto& s : bs.all_samples()) samples.push_back(sample_to_json(s));
    j["samples"] = std::move(samples);
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<BenchmarkScene> read_benchmark(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open benchmark manifest");
  std::vector<BenchmarkScene> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      BenchmarkScene bs;
      bs.scene_id = j.at("scene_id").get<std::string>();
      bs.aif_image_path = j.at("aif_image_path").get<std::string>();
      bs.depth_path = j.at("depth_path").get<std::string>();
      bs.degenerate_refocus = j.at("degenerate_refocus").get<bool>();
      for (const auto& js : j.at("samples")) {
        BenchmarkSample s = sample_from_json(js);
        switch (s.task) {
          case BenchTask::kRefocus: bs.refocus_samples.push_back(std::move(s)); break;
          case BenchTask::kAddBokeh: bs.add_bokeh_samples.push_back(std::move(s)); break;
          case BenchTask::kRemoveBokeh: bs.remove_bokeh_samples.push_back(std::move(s)); break;
        }
      }
      out.push_back(std::move(bs));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_predictions(const fs::path& path,
                       const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  for (const auto& [id, image] : entries) {
    out << json{{"sample_id", id}, {"image_path", image}}.dump() << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Predictions read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open prediction manifest");
  Predictions out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      fs::path p = j.at("image_path").get<std::string>();
      if (p.is_relative()) p = path.parent_path() / p;
      out[j.at("sample_id").get<std::string>()] = p;
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

namespace {

void add_to(TaskSummary& s, const SampleResult& r) {
  ++s.count;
  s.mae += r.mae;
  s.psnr += r.psnr;
}

void finish(TaskSummary& s) {
  if (s.count == 0) return;
  s.mae /= static_cast<double>(s.count);
  s.psnr /= static_cast<double>(s.count);
}

std::optional<double> try_lvcorr(const std::vector<LevelImage>& seq,
                                 const std::vector<LevelImage>& truth, LvcorrPairing pairing) {
  try {
    return pairing == LvcorrPairing::kDirect ? lvcorr(seq) : lvcorr_against_reference(seq, truth);
  } catch (const UndefinedCorrelation&) {
    return std::nullopt;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

}  // namespace

LvcorrPairing parse_lvcorr_pairing(std::string_view name) {
  if (name == "direct") return LvcorrPairing::kDirect;
  if (name == "reference") return LvcorrPairing::kReference;
  throw std::invalid_argument("unknown LVCorr pairing: " + std::string(name));
}

EvalReport evaluate(const Predictions& predictions, std::span<const BenchmarkScene> benchmark,
                    const fs::path& bench_dir, LvcorrPairing pairing) {
  EvalReport report;
  double lv_sum = 0.0;
  std::size_t lv_count = 0;
  for (const auto& bs : benchmark) {
    std::vector<LevelImage> predicted_seq, truth_seq;
    bool add_complete = true;
    for (const auto& s : bs.all_samples()) {
      auto it = predictions.find(s.sample_id);
      if (it == predictions.end()) {
        report.missing.push_back(s.sample_id);
        if (s.task == BenchTask::kAddBokeh) add_complete = false;
        continue;
      }
      imaging::RasterImage pred;
      try {
        pred = imaging::read_image(it->second);
      } catch (const std::exception&) {
        report.missing.push_back(s.sample_id);
        if (s.task == BenchTask::kAddBokeh) add_complete = false;
        continue;
      }
      const auto target = imaging::read_image(bench_dir / s.target_path);
      if (!pred.same_shape(target)) {
        report.missing.push_back(s.sample_id);
        if (s.task == BenchTask::kAddBokeh) add_complete = false;
        continue;
      }
      SampleResult r{s.sample_id, s.scene_id, s.task, mae(pred, target), psnr(pred, target)};
      add_to(report.tasks[s.task], r);
      add_to(report.aggregate, r);
      report.samples.push_back(r);
      if (s.task == BenchTask::kAddBokeh) {
        predicted_seq.push_back({s.condition.b, std::move(pred)});
        truth_seq.push_back({s.condition.b, target});
      }
    }
    SceneLvcorr lv{bs.scene_id, std::nullopt, try_lvcorr(truth_seq, truth_seq, pairing)};
    if (add_complete) lv.predicted = try_lvcorr(predicted_seq, truth_seq, pairing);
    if (lv.predicted) {
      lv_sum += *lv.predicted;
      ++lv_count;
    }
    report.lvcorr.push_back(std::move(lv));
  }
  for (auto& [task, summary] : report.tasks) finish(summary);
  finish(report.aggregate);
  if (lv_count > 0) report.mean_lvcorr = lv_sum / static_cast<double>(lv_count);
  return report;
}

namespace {

json summary_json(const TaskSummary& s) {
  return {{"count", s.count}, {"mae", s.mae}, {"psnr", s.psnr}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json j;
  json tasks = json::object();
  for (const auto& [task, summary] : report.tasks) {
    tasks[std::string(to_string(task))] = summary_json(summary);
  }
  j["tasks"] = std::move(tasks);
  j["aggregate"] = summary_json(report.aggregate);
  j["mean_lvcorr"] = optional_json(report.mean_lvcorr);
  json scenes = json::array();
  for (const auto& lv : report.lvcorr) {
    scenes.push_back({{"scene_id", lv.scene_id},
                      {"lvcorr", optional_json(lv.predicted)},
                      {"ground_truth_lvcorr", optional_json(lv.ground_truth)}});
  }
  j["scenes"] = std::move(scenes);
  json samples = json::array();
  for (const auto& r : report.samples) {
    samples.push_back({{"sample_id", r.sample_id},
                       {"task", std::string(to_string(r.task))},
                       {"mae", r.mae},
                       {"psnr", r.psnr}});
  }
  j["samples"] = std::move(samples);
  j["missing"] = report.missing;
  j["complete"] = report.complete();
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "task" << std::right << std::setw(8) << "count"
      << std::setw(12) << "MAE" << std::setw(12) << "PSNR(dB)" << '\n';
  auto row = [&](const std::string& name, const TaskSummary& s) {
    out << std::left << std::setw(14) << name << std::right << std::setw(8) << s.count
        << std::setw(12) << std::fixed << std::setprecision(5) << s.mae << std::setw(12)
        << std::setprecision(2) << s.psnr << '\n';
  };
  for (const auto& [task, summary] : report.tasks) row(std::string(to_string(task)), summary);
  row("all", report.aggregate);
  out << "LVCorr (add_bokeh, mean over scenes): ";
  if (report.mean_lvcorr) {
    out << std::setprecision(4) << *report.mean_lvcorr << '\n';
  } else {
    out << "n/a\n";
  }
  if (!report.missing.empty()) {
    out << "missing predictions (" << report.missing.size() << "):\n";
    for (const auto& id : report.missing) out << "  " << id << '\n';
  }
  return out.str();
}

}  // namespace refocus::metrics
