#include "refocus/cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

#include "refocus/bokeh/render.hpp"
#include "refocus/dof/dof_sim.hpp"
#include "refocus/dof/manifest.hpp"
#include "refocus/dof/perturb.hpp"
#include "refocus/flow/checkpoint.hpp"
#include "refocus/flow/trainer.hpp"
#include "refocus/imaging/image_io.hpp"
#include "refocus/metrics/benchmark.hpp"
#include "refocus/service/http_service.hpp"
#include "refocus/stack/focus_stack.hpp"

namespace refocus::cli {
namespace {

namespace fs = std::filesystem;

struct RenderArgs {
  std::string image, depth, out;
  double fx = 0.5, fy = 0.5, bokeh = 0.0, scale = 1.0, gamma = 1.0;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  auto img = imaging::read_image(a.image);
  const auto depth = imaging::read_depth(a.depth);
  if (!depth.same_size(img)) throw std::invalid_argument("image and depth dimensions differ");
  const bool linear = a.gamma != 1.0;
  if (linear) img = bokeh::apply_gamma(img, a.gamma);
  auto result = bokeh::refocus_classical(img, depth, a.fx, a.fy, a.bokeh, a.scale);
  if (linear) result = bokeh::apply_gamma(result, 1.0 / a.gamma);
  imaging::write_image(a.out, result);
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

struct SimulateArgs {
  std::string image, depth, out_dir, scene_id, kind = "photo";
  std::vector<double> planes, levels;
  std::uint64_t seed = 0;
  double eps = dof::kDefaultFocusEps;
  bool append = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const auto img = imaging::read_image(a.image);
  const auto depth = imaging::read_depth(a.depth);
  dof::SimulateOptions opts;
  opts.scene_id = a.scene_id.empty() ? fs::path(a.image).stem().string() : a.scene_id;
  opts.source_kind = dof::parse_source_kind(a.kind);
  if (!a.planes.empty()) opts.planes = a.planes;
  if (!a.levels.empty()) opts.levels = a.levels;
  opts.seed = a.seed;
  opts.eps = a.eps;
  fs::create_directories(a.out_dir);
  const auto variants = dof::simulate_variants(img, depth, opts, a.out_dir);
  const fs::path manifest = fs::path(a.out_dir) / "manifest.jsonl";
  dof::ManifestWriter writer(manifest, a.append);
  for (const auto& v : variants) writer.write(v);
  out << "wrote " << variants.size() << " variants to " << manifest.string() << '\n';
  return kExitOk;
}

struct StackArgs {
  std::string a, b, out, mask_out;
  double sigma = stack::kDefaultStackSigma;
};

int cmd_stack(const StackArgs& a, std::ostream& out) {
  const auto i1 = imaging::read_image(a.a);
  const auto i2 = imaging::read_image(a.b);
  const auto mask = stack::stack_mask(i1, i2, a.sigma);
  imaging::write_image(a.out, stack::stack_blend(i1, i2, mask));
  if (!a.mask_out.empty()) imaging::write_image(a.mask_out, mask.to_image());
  out << "wrote " << a.out << " (" << mask.count_ones() << " of " << mask.size()
      << " pixels from --a)\n";
  return kExitOk;
}

struct TrainArgs {
  std::string manifest, checkpoint, codec = "avgpool:2", loss = "mse", loss_log;
  long steps = 500;
  int batch = 8;
  double lambda = 0.1, dropout = 0.5, lr = 1e-3;
  std::uint64_t seed = 0;
  int log_every = 50;
  int hidden = 16;
};

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  end = std::min(end, v.size());
  if (begin >= end) return 0.0;
  return std::accumulate(v.begin() + begin, v.begin() + end, 0.0) / (end - begin);
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  flow::TrainConfig config;
  config.steps = a.steps;
  config.batch = a.batch;
  config.lambda_stack = a.lambda;
  config.depth_dropout_p = a.dropout;
  config.lr = a.lr;
  config.seed = a.seed;
  config.codec = stack::LatentCodec::parse(a.codec);
  if (a.loss == "mse") {
    config.norm = flow::LossNorm::kMse;
  } else if (a.loss == "l1") {
    config.norm = flow::LossNorm::kL1;
  } else {
    throw std::invalid_argument("--loss must be mse or l1");
  }
  config.validate();

  flow::NetArchitecture arch;
  arch.hidden_channels = a.hidden;
  flow::ConvVelocityNet model(arch);
  model.initialize(a.seed);
  flow::Trainer trainer(dof::read_manifest(a.manifest), config, model);

  std::ofstream log;
  if (!a.loss_log.empty()) {
    log.open(a.loss_log);
    if (!log) throw std::runtime_error(a.loss_log + ": cannot open for writing");
    log << "step,l_flow,l_stack,l_total\n";
  }
  std::vector<double> flow_losses;
  for (long s = 0; s < config.steps; ++s) {
    const auto b = trainer.step();
    flow_losses.push_back(b.l_flow);
    if (log) log << s << ',' << b.l_flow << ',' << b.l_stack << ',' << b.l_total << '\n';
    if (a.log_every > 0 && (s + 1) % a.log_every == 0) {
      out << "step " << std::setw(5) << s + 1 << "  l_flow " << std::fixed
          << std::setprecision(4) << b.l_flow << "  l_stack " << b.l_stack << "  l_total "
          << b.l_total << '\n';
    }
  }
  flow::save_checkpoint(a.checkpoint, model);
  const std::size_t n = flow_losses.size();
  const std::size_t w = std::min<std::size_t>(50, n);
  out << std::setprecision(4) << "mean l_flow first " << w << ": " << window_mean(flow_losses, 0, w)
      << ", last " << w << ": " << window_mean(flow_losses, n - w, n) << '\n';
  if (trainer.samples_seen() > 0) {
    out << "depth dropout frequency: "
        << static_cast<double>(trainer.depth_dropped()) / trainer.samples_seen() << '\n';
  }
  out << "wrote " << a.checkpoint << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string pred_manifest, bench_dir, report, lvcorr = "direct";
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto bench = metrics::read_benchmark(fs::path(a.bench_dir) / metrics::kBenchmarkManifest);
  const auto preds = metrics::read_predictions(a.pred_manifest);
  const auto report =
      metrics::evaluate(preds, bench, a.bench_dir, metrics::parse_lvcorr_pairing(a.lvcorr));
  std::ofstream f(a.report);
  if (!f) throw std::runtime_error(a.report + ": cannot open for writing");
  f << metrics::report_to_json(report) << '\n';
  out << metrics::report_to_table(report);
  if (!report.complete()) {
    err << report.missing.size() << " benchmark samples have no usable prediction\n";
    return kExitRuntimeError;
  }
  return kExitOk;
}

struct BenchArgs {
  int scenes = 12;
  std::string out_dir;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const auto specs = metrics::default_bench_specs(a.scenes, a.seed);
  std::mt19937_64 rng(a.seed);
  fs::create_directories(a.out_dir);
  const metrics::Renderer renderer = [](const imaging::RasterImage& img,
                                        const imaging::DepthMap& depth,
                                        const bokeh::RenderParams& p) {
    return bokeh::render_fast(img, depth, p);
  };
  const auto scenes = metrics::build_benchmark(specs, renderer, rng, a.out_dir);
  std::size_t samples = 0;
  for (const auto& s : scenes) samples += s.all_samples().size();
  out << "wrote " << scenes.size() << " scenes, " << samples << " samples to " << a.out_dir
      << '\n';
  return kExitOk;
}

struct PerturbArgs {
  std::string depth, kind, out;
  std::uint64_t seed = 0;
  dof::PerturbParams params;
};

int cmd_perturb(const PerturbArgs& a, std::ostream& out) {
  const auto kind = dof::parse_perturb_kind(a.kind);
  const auto depth = imaging::read_depth(a.depth);
  std::mt19937_64 rng(a.seed);
  imaging::write_depth(a.out, dof::perturb_depth(depth, kind, rng, a.params));
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

struct ServeArgs {
  int port = 8080;
  std::string host = "0.0.0.0", scene_dir, static_dir;
  int procedural = -1;
  std::uint64_t seed = 0;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  service::configure_logging_from_env();
  service::SceneStore store;
  if (!a.scene_dir.empty()) {
    out << "loaded " << store.load_directory(a.scene_dir) << " scenes from " << a.scene_dir
        << '\n';
  }
  const int procedural = a.procedural >= 0 ? a.procedural : (store.size() == 0 ? 3 : 0);
  store.add_procedural(procedural, a.seed);
  service::ServiceOptions opts;
  opts.host = a.host;
  opts.port = a.port;
  if (!a.static_dir.empty()) opts.static_dir = a.static_dir;
  service::HttpService server(store, opts);
  const int port = server.bind();
  if (port < 0) throw std::runtime_error("cannot bind port " + std::to_string(a.port));
  out << "serving " << store.size() << " scenes on http://" << a.host << ':' << port << std::endl;
  return server.listen() ? kExitOk : kExitRuntimeError;
}

struct DatasetArgs {
  std::string out_dir;
  dof::ProceduralDatasetOptions options;
};

int cmd_dataset(const DatasetArgs& a, std::ostream& out) {
  const auto variants = dof::build_procedural_dataset(a.out_dir, a.options);
  out << "wrote " << variants.size() << " variants to "
      << (fs::path(a.out_dir) / "manifest.jsonl").string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-of-field refocusing toolkit", "refocus"};
  app.require_subcommand(1);

  RenderArgs render;
  auto* c_render = app.add_subcommand("render", "Refocus an image with the classical renderer");
  c_render->add_option("--image", render.image, "All-in-focus input image")->required();
  c_render->add_option("--depth", render.depth, "Depth map (1 = closest)")->required();
  c_render->add_option("--fx", render.fx, "Focus point x in [0,1]")->required();
  c_render->add_option("--fy", render.fy, "Focus point y in [0,1]")->required();
  c_render->add_option("--bokeh", render.bokeh, "Bokeh level")->required();
  c_render->add_option("--out", render.out, "Output image (.png/.ppm)")->required();
  c_render->add_option("--scale", render.scale, "Blur radius scale");
  c_render->add_option("--gamma", render.gamma, "Render in linear light with this gamma");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Render the focus-plane x bokeh-level grid");
  c_sim->add_option("--image", sim.image)->required();
  c_sim->add_option("--depth", sim.depth)->required();
  c_sim->add_option("--out-dir", sim.out_dir)->required();
  c_sim->add_option("--planes", sim.planes, "Comma-separated focus depths")->delimiter(',');
  c_sim->add_option("--levels", sim.levels, "Comma-separated bokeh levels")->delimiter(',');
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--scene-id", sim.scene_id);
  c_sim->add_option("--kind", sim.kind, "photo or synthetic");
  c_sim->add_option("--eps", sim.eps, "Focus-set tolerance");
  c_sim->add_flag("--append", sim.append, "Append to an existing manifest");

  StackArgs stk;
  auto* c_stack = app.add_subcommand("stack", "Focus-stack two images");
  c_stack->add_option("--a", stk.a)->required();
  c_stack->add_option("--b", stk.b)->required();
  c_stack->add_option("--out", stk.out)->required();
  c_stack->add_option("--sigma", stk.sigma, "Sharpness smoothing sigma");
  c_stack->add_option("--mask-out", stk.mask_out, "Also write the stack mask");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train-toy", "Train the toy velocity model");
  c_train->add_option("--manifest", train.manifest)->required();
  c_train->add_option("--steps", train.steps)->required();
  c_train->add_option("--out-checkpoint", train.checkpoint)->required();
  c_train->add_option("--lambda", train.lambda, "Stacking loss weight");
  c_train->add_option("--dropout", train.dropout, "Depth dropout probability");
  c_train->add_option("--seed", train.seed);
  c_train->add_option("--batch", train.batch);
  c_train->add_option("--lr", train.lr);
  c_train->add_option("--codec", train.codec, "identity or avgpool:k");
  c_train->add_option("--loss", train.loss, "mse or l1");
  c_train->add_option("--hidden", train.hidden, "Hidden channels");
  c_train->add_option("--log-every", train.log_every);
  c_train->add_option("--loss-log", train.loss_log, "CSV of per-step losses");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score predictions against a benchmark");
  c_eval->add_option("--pred-manifest", ev.pred_manifest)->required();
  c_eval->add_option("--bench-dir", ev.bench_dir)->required();
  c_eval->add_option("--report", ev.report, "JSON report path")->required();
  c_eval->add_option("--lvcorr", ev.lvcorr, "LVCorr pairing: direct or reference")
      ->check(CLI::IsMember({"direct", "reference"}));

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Build the procedural benchmark");
  c_bench->add_option("--scenes", bench.scenes)->required()->check(CLI::PositiveNumber);
  c_bench->add_option("--out-dir", bench.out_dir)->required();
  c_bench->add_option("--seed", bench.seed)->required();

  PerturbArgs pert;
  auto* c_pert = app.add_subcommand("perturb-depth", "Apply a depth perturbation");
  c_pert->add_option("--depth", pert.depth)->required();
  c_pert->add_option("--kind", pert.kind, "dropout, random_mask, random_crop, gaussian_noise")
      ->required();
  c_pert->add_option("--out", pert.out)->required();
  c_pert->add_option("--seed", pert.seed)->required();
  c_pert->add_option("--mask-prob", pert.params.mask_probability);
  c_pert->add_option("--noise-std", pert.params.noise_stddev);

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP refocusing service");
  c_serve->add_option("--port", serve.port)->required();
  c_serve->add_option("--scene-dir", serve.scene_dir)->required();
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--static-dir", serve.static_dir, "Browser client assets");
  c_serve->add_option("--procedural", serve.procedural,
                      "Procedural scenes to add (default: 3 if the directory is empty)");
  c_serve->add_option("--seed", serve.seed);

  DatasetArgs data;
  auto* c_data = app.add_subcommand("make-dataset", "Generate a procedural training set");
  c_data->add_option("--out-dir", data.out_dir)->required();
  c_data->add_option("--scenes", data.options.scenes);
  c_data->add_option("--size", data.options.width, "Square image size");
  c_data->add_option("--seed", data.options.seed);

  std::vector<std::string> reversed(args.begin(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitUsage;
  }
  data.options.height = data.options.width;

  try {
    if (c_render->parsed()) return cmd_render(render, out);
    if (c_sim->parsed()) return cmd_simulate(sim, out);
    if (c_stack->parsed()) return cmd_stack(stk, out);
    if (c_train->parsed()) return cmd_train(train, out);
    if (c_eval->parsed()) return cmd_eval(ev, out, err);
    if (c_bench->parsed()) return cmd_bench(bench, out);
    if (c_pert->parsed()) return cmd_perturb(pert, out);
    if (c_serve->parsed()) return cmd_serve(serve, out);
    if (c_data->parsed()) return cmd_dataset(data, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace refocus::cli
