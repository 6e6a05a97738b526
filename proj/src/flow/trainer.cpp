#include "refocus/flow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "refocus/flow/tensor_ops.hpp"
#include "refocus/imaging/image_io.hpp"

namespace refocus::flow {

void TrainConfig::validate() const {
  if (!(depth_dropout_p >= 0.0 && depth_dropout_p <= 1.0)) {
    throw std::invalid_argument("TrainConfig: depth_dropout_p outside [0,1]");
  }
  if (!(lambda_stack >= 0.0)) throw std::invalid_argument("TrainConfig: lambda_stack < 0");
  if (steps < 0) throw std::invalid_argument("TrainConfig: negative steps");
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: momentum outside [0,1)");
  }
  schedule.validate();
}

void SgdMomentum::step(ParameterSet& params, const ParameterSet& grads) {
  if (!velocity_) velocity_ = grads.zeros_like();
  auto& vel = velocity_->items();
  const auto& g = grads.items();
  auto& p = params.items();
  if (vel.size() != p.size() || g.size() != p.size()) {
    throw std::invalid_argument("SgdMomentum: parameter layout changed");
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p[k].values.size(); ++i) {
      vel[k].values[i] = momentum_ * vel[k].values[i] + g[k].values[i];
      p[k].values[i] -= lr_ * vel[k].values[i];
    }
  }
}

LossBreakdown train_step(DifferentiableModel& model, std::span<const TrainingExample> batch,
                         const TrainConfig& config, std::mt19937_64& rng, SgdMomentum& optimizer) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  config.validate();

  struct Prepared {
    Tensor ref, x0, depth;
    bool dropped;
  };
  // Draw all randomness up front in a fixed order so the trajectory depends
  // only on the seed.
  std::bernoulli_distribution drop(config.depth_dropout_p);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Prepared> prepared;
  std::vector<FlowSample> flow_samples;
  std::vector<StackingInstance> stack_instances;
  LossBreakdown out;
  for (const auto& ex : batch) {
    if (!ex.reference.same_shape(ex.target)) {
      throw std::invalid_argument("train_step: reference and target differ in shape");
    }
    Prepared p;
    p.dropped = drop(rng);
    imaging::DepthMap depth = ex.depth;
    if (p.dropped) std::fill(depth.data().begin(), depth.data().end(), 0.0);
    p.ref = config.codec.encode(ex.reference);
    p.x0 = config.codec.encode(ex.target);
    p.depth = config.codec.resample(depth);
    const Tensor eps = normal_tensor(p.x0.channels, p.x0.height, p.x0.width, rng);
    flow_samples.push_back(perturb(p.x0, eps, unit(rng)));
    if (ex.sibling) {
      StackingInstance s;
      s.image1 = ex.target;
      s.image2 = *ex.sibling;
      s.cond1 = ex.target_cond;
      s.cond2 = ex.sibling_cond;
      s.ref = p.ref;
      s.depth = p.depth;
      s.eps = normal_tensor(p.x0.channels, p.x0.height, p.x0.width, rng);
      s.t = unit(rng);
      stack_instances.push_back(std::move(s));
    }
    out.depth_dropped += p.dropped ? 1 : 0;
    prepared.push_back(std::move(p));
  }
  out.samples = static_cast<int>(batch.size());
  out.stack_samples = static_cast<int>(stack_instances.size());

  ParameterSet grads = model.parameters().zeros_like();
  const double flow_weight = 1.0 / out.samples;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.l_flow += flow_weight * flow_loss_grad(model, flow_samples[i], batch[i].target_cond,
                                               prepared[i].ref, prepared[i].depth, grads,
                                               flow_weight, config.norm);
  }
  if (out.stack_samples > 0) {
    const StackingOptions opts{config.codec, config.stack_sigma, config.norm};
    const double mean_weight = 1.0 / out.stack_samples;
    for (const auto& s : stack_instances) {
      const double l = config.lambda_stack > 0.0
                           ? stacking_loss_grad(model, s, grads,
                                                config.lambda_stack * mean_weight, opts)
                           : stacking_loss(model, s, opts);
      out.l_stack += mean_weight * l;
    }
  }
  out.l_total = out.l_flow + config.lambda_stack * out.l_stack;
  optimizer.step(model.parameters(), grads);
  return out;
}

Trainer::Trainer(dof::Manifest manifest, TrainConfig config, DifferentiableModel& model)
    : manifest_(std::move(manifest)),
      config_(std::move(config)),
      model_(model),
      optimizer_(config_.lr, config_.momentum),
      rng_(config_.seed) {
  config_.validate();
  if (manifest_.scene_ids().empty()) throw std::invalid_argument("Trainer: empty manifest");
}

const imaging::RasterImage& Trainer::image(const std::string& rel) {
  auto it = images_.find(rel);
  if (it == images_.end()) {
    it = images_.emplace(rel, imaging::read_image(manifest_.resolve(rel))).first;
  }
  return it->second;
}

const imaging::DepthMap& Trainer::depth(const std::string& rel) {
  auto it = depths_.find(rel);
  if (it == depths_.end()) {
    it = depths_.emplace(rel, imaging::read_depth(manifest_.resolve(rel))).first;
  }
  return it->second;
}

namespace {

CameraCondition condition_for(const dof::DofVariant& v, std::mt19937_64& rng) {
  if (v.all_in_focus()) return {0.5, 0.5, 0.0};
  std::uniform_int_distribution<std::size_t> pick(0, v.focus_points.size() - 1);
  const auto fp = v.focus_points[pick(rng)];
  return {fp.fx, fp.fy, v.bokeh_level};
}

}  // namespace

TrainingExample Trainer::draw_example() {
  const double p_synth = dof::synth_probability(step_, std::max(config_.steps, 1L),
                                                config_.schedule);
  std::bernoulli_distribution synth(p_synth);
  const auto kind = synth(rng_) ? dof::SourceKind::kSynthetic : dof::SourceKind::kPhoto;

  // Scenes that cannot form a pair are skipped; give up after many misses.
  for (int attempt = 0; attempt < 64; ++attempt) {
    dof::SampledPair pair;
    try {
      pair = dof::sample_pair(manifest_, rng_, kind);
    } catch (const dof::SkipError&) {
      continue;
    }
    TrainingExample ex;
    ex.reference = image(pair.reference.image_path);
    ex.target = image(pair.target.image_path);
    ex.target_cond = pair.condition;
    ex.depth = depth(pair.target.depth_path);

    std::vector<std::size_t> siblings;
    for (std::size_t i : manifest_.scene_variants(pair.target.scene_id)) {
      const auto& v = manifest_.variants()[i];
      if (v.image_path == pair.target.image_path) continue;
      if (v.all_in_focus() || !v.focus_points.empty()) siblings.push_back(i);
    }
    if (!siblings.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, siblings.size() - 1);
      const auto& sib = manifest_.variants()[siblings[pick(rng_)]];
      ex.sibling = image(sib.image_path);
      ex.sibling_cond = condition_for(sib, rng_);
    }
    return ex;
  }
  throw std::runtime_error("Trainer: no scene in the manifest yields a training pair");
}

LossBreakdown Trainer::step() {
  std::vector<TrainingExample> batch;
  batch.reserve(config_.batch);
  for (int i = 0; i < config_.batch; ++i) batch.push_back(draw_example());
  LossBreakdown out = train_step(model_, batch, config_, rng_, optimizer_);
  ++step_;
  samples_ += out.samples;
  dropped_ += out.depth_dropped;
  return out;
}

GradCheckInstance random_grad_check_instance(int size, int channels, std::uint64_t seed) {
  if (size < 1 || (channels != 1 && channels != 3)) {
    throw std::invalid_argument("random_grad_check_instance: bad size or channels");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_image = [&] {
    imaging::RasterImage img(size, size, channels);
    for (double& v : img.data()) v = unit(rng);
    return img;
  };
  auto random_tensor = [&](int c) {
    Tensor t(c, size, size);
    for (double& v : t.data) v = unit(rng);
    return t;
  };

  GradCheckInstance inst;
  const Tensor x0 = random_tensor(channels);
  const Tensor eps = normal_tensor(channels, size, size, rng);
  inst.sample = perturb(x0, eps, 0.3 + 0.4 * unit(rng));
  inst.cond = {unit(rng), unit(rng), 20.0 * unit(rng)};
  inst.ref = random_tensor(channels);
  inst.depth = random_tensor(1);

  auto& s = inst.stacking;
  s.image1 = random_image();
  s.image2 = random_image();
  s.cond1 = {unit(rng), unit(rng), 20.0 * unit(rng)};
  s.cond2 = {unit(rng), unit(rng), 20.0 * unit(rng)};
  s.ref = inst.ref;
  s.depth = inst.depth;
  s.eps = normal_tensor(channels, size, size, rng);
  s.t = 0.3 + 0.4 * unit(rng);
  inst.stacking_options.codec = stack::LatentCodec::identity();
  return inst;
}

namespace {

double evaluate_loss(const DifferentiableModel& model, const GradCheckInstance& inst,
                     LossKind kind, ParameterSet* grads) {
  if (kind == LossKind::kFlow) {
    return grads ? flow_loss_grad(model, inst.sample, inst.cond, inst.ref, inst.depth, *grads)
                 : flow_loss(model, inst.sample, inst.cond, inst.ref, inst.depth);
  }
  return grads ? stacking_loss_grad(model, inst.stacking, *grads, 1.0, inst.stacking_options)
               : stacking_loss(model, inst.stacking, inst.stacking_options);
}

}  // namespace

GradCheckResult gradient_check(DifferentiableModel& model, const GradCheckInstance& inst,
                               LossKind kind, double h,
                               const std::function<void(ParameterSet&)>& corrupt) {
  ParameterSet analytic = model.parameters().zeros_like();
  evaluate_loss(model, inst, kind, &analytic);
  if (corrupt) corrupt(analytic);

  GradCheckResult result;
  auto& params = model.parameters().items();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& values = params[k].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = evaluate_loss(model, inst, kind, nullptr);
      values[i] = saved - h;
      const double down = evaluate_loss(model, inst, kind, nullptr);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.items()[k].values[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (result.checked == 1 || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = params[k].name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

Tensor integrate_latent(const VelocityModel& model, const CameraCondition& cond,
                        const Tensor& ref, const Tensor& depth, int n_steps, Tensor x) {
  if (n_steps < 1) throw std::invalid_argument("sample_image: n_steps must be >= 1");
  const double dt = 1.0 / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    const double t = 1.0 - k * dt;
    const Tensor v = model.predict({x, t, cond, ref, depth});
    require_same_shape(v, x, "sample_image: velocity");
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] -= dt * v.data[i];
  }
  return x;
}

imaging::RasterImage sample_image(const VelocityModel& model, const CameraCondition& cond,
                                  const Tensor& ref, const Tensor& depth, int n_steps,
                                  const stack::LatentCodec& codec, int width, int height,
                                  const Tensor& noise) {
  const Tensor z = integrate_latent(model, cond, ref, depth, n_steps, noise);
  imaging::RasterImage img = codec.decode(z, width, height);
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

imaging::RasterImage sample_image(const VelocityModel& model, const CameraCondition& cond,
                                  const Tensor& ref, const Tensor& depth, int n_steps,
                                  const stack::LatentCodec& codec, int width, int height,
                                  std::mt19937_64& rng) {
  const Tensor noise = normal_tensor(ref.channels, ref.height, ref.width, rng);
  return sample_image(model, cond, ref, depth, n_steps, codec, width, height, noise);
}

}  // namespace refocus::flow
