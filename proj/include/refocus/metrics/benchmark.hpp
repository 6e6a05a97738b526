#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "refocus/bokeh/render.hpp"
#include "refocus/dof/dof_sim.hpp"
#include "refocus/imaging/scene.hpp"

namespace refocus::metrics {

enum class BenchTask { kRefocus, kAddBokeh, kRemoveBokeh };
std::string_view to_string(BenchTask task);
BenchTask parse_bench_task(std::string_view name);

// Paths are relative to the benchmark directory.
struct BenchmarkSample {
  std::string sample_id;
  std::string scene_id;
  BenchTask task = BenchTask::kRefocus;
  std::string input_path;
  std::string target_path;
  dof::CameraCondition condition;

  friend bool operator==(const BenchmarkSample&, const BenchmarkSample&) = default;
};

struct BenchmarkScene {
  std::string scene_id;
  std::string aif_image_path;
  std::string depth_path;
  std::vector<BenchmarkSample> refocus_samples;       // 2
  std::vector<BenchmarkSample> add_bokeh_samples;     // 4, ascending level
  std::vector<BenchmarkSample> remove_bokeh_samples;  // 4, inputs = add-bokeh targets
  // Set when the scene has one depth layer so both refocus points share it.
  bool degenerate_refocus = false;

  std::vector<BenchmarkSample> all_samples() const;
  friend bool operator==(const BenchmarkScene&, const BenchmarkScene&) = default;
};

inline constexpr std::array<double, 4> kAddBokehLevels = {5.0, 10.0, 15.0, 20.0};

using Renderer = std::function<imaging::RasterImage(
    const imaging::RasterImage&, const imaging::DepthMap&, const bokeh::RenderParams&)>;

struct BenchmarkOptions {
  double refocus_level_min = 5.0;  // refocus levels are integers drawn from this range
  double refocus_level_max = 20.0;
  double radius_scale = 1.0;
};

// Renders each scene's samples into out_dir/<scene_id>/ and writes
// out_dir/benchmark.jsonl. Ground-truth renders use `renderer`.
std::vector<BenchmarkScene> build_benchmark(std::span<const imaging::SceneSpec> scenes,
                                            const Renderer& renderer, std::mt19937_64& rng,
                                            const std::filesystem::path& out_dir,
                                            const BenchmarkOptions& options = {});

// Scene specs used by the `bench` command: 64 x 64, four layers.
std::vector<imaging::SceneSpec> default_bench_specs(int count, std::uint64_t seed);

inline constexpr const char* kBenchmarkManifest = "benchmark.jsonl";
inline constexpr const char* kGroundTruthPredictions = "ground_truth_predictions.jsonl";

void write_benchmark(const std::filesystem::path& path, std::span<const BenchmarkScene> scenes);
std::vector<BenchmarkScene> read_benchmark(const std::filesystem::path& path);

// sample_id -> image path. Relative paths resolve against the prediction
// manifest's directory.
using Predictions = std::map<std::string, std::filesystem::path>;
void write_predictions(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& entries);
Predictions read_predictions(const std::filesystem::path& path);

struct SampleResult {
  std::string sample_id;
  std::string scene_id;
  BenchTask task;
  double mae = 0.0;
  double psnr = 0.0;
};

struct TaskSummary {
  std::size_t count = 0;
  double mae = 0.0;
  double psnr = 0.0;
};

struct SceneLvcorr {
  std::string scene_id;
  std::optional<double> predicted;  // empty when undefined or incomplete
  std::optional<double> ground_truth;
};

struct EvalReport {
  std::vector<SampleResult> samples;
  std::map<BenchTask, TaskSummary> tasks;
  TaskSummary aggregate;
  std::vector<SceneLvcorr> lvcorr;
  std::optional<double> mean_lvcorr;
  std::vector<std::string> missing;

  bool complete() const { return missing.empty(); }
};

// kDirect: Pearson(b, -LV). kReference: Pearson(LV(pred), LV(truth)) over
// the add-bokeh sequence.
enum class LvcorrPairing { kDirect, kReference };
LvcorrPairing parse_lvcorr_pairing(std::string_view name);

// Scores every prediction against its target. Missing or unreadable
// predictions are listed in `missing` and excluded from the means.
EvalReport evaluate(const Predictions& predictions, std::span<const BenchmarkScene> benchmark,
                    const std::filesystem::path& bench_dir,
                    LvcorrPairing pairing = LvcorrPairing::kDirect);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace refocus::metrics
