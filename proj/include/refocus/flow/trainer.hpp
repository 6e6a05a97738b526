#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "refocus/dof/manifest.hpp"
#include "refocus/flow/losses.hpp"
#include "refocus/flow/velocity_net.hpp"

namespace refocus::flow {

struct TrainConfig {
  double lambda_stack = 0.1;
  double depth_dropout_p = 0.5;
  long steps = 500;
  int batch = 8;
  double lr = 1e-3;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  dof::SamplerSchedule schedule;
  stack::LatentCodec codec = stack::LatentCodec::avgpool(2);
  double stack_sigma = stack::kDefaultStackSigma;
  LossNorm norm = LossNorm::kMse;

  void validate() const;
};

struct LossBreakdown {
  double l_flow = 0.0;
  double l_stack = 0.0;
  double l_total = 0.0;
  int samples = 0;
  int stack_samples = 0;
  int depth_dropped = 0;
};

// One training pair in pixel space. sibling is a third render of the same
// scene used by the stacking branch; without it that sample contributes no
// stacking term.
struct TrainingExample {
  imaging::RasterImage reference;
  imaging::RasterImage target;
  CameraCondition target_cond;
  std::optional<imaging::RasterImage> sibling;
  CameraCondition sibling_cond;
  imaging::DepthMap depth;
};

// Heavy-ball SGD: velocity = momentum * velocity + grad; theta -= lr * velocity.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(ParameterSet& params, const ParameterSet& grads);

 private:
  double lr_;
  double momentum_;
  std::optional<ParameterSet> velocity_;
};

// Depth dropout, flow loss on every example, stacking loss on examples with
// a sibling, then one optimizer update. Losses are batch means.
LossBreakdown train_step(DifferentiableModel& model, std::span<const TrainingExample> batch,
                         const TrainConfig& config, std::mt19937_64& rng, SgdMomentum& optimizer);

// Draws batches from a manifest following the source-kind schedule.
class Trainer {
 public:
  Trainer(dof::Manifest manifest, TrainConfig config, DifferentiableModel& model);

  LossBreakdown step();
  long steps_done() const { return step_; }
  long samples_seen() const { return samples_; }
  long depth_dropped() const { return dropped_; }

  // Exposed for tests: one example drawn as step() would.
  TrainingExample draw_example();

 private:
  const imaging::RasterImage& image(const std::string& rel);
  const imaging::DepthMap& depth(const std::string& rel);

  dof::Manifest manifest_;
  TrainConfig config_;
  DifferentiableModel& model_;
  SgdMomentum optimizer_;
  std::mt19937_64 rng_;
  long step_ = 0;
  long samples_ = 0;
  long dropped_ = 0;
  std::map<std::string, imaging::RasterImage> images_;
  std::map<std::string, imaging::DepthMap> depths_;
};

enum class LossKind { kFlow, kStacking };

struct GradCheckInstance {
  FlowSample sample;
  CameraCondition cond;
  Tensor ref;
  Tensor depth;
  StackingInstance stacking;
  StackingOptions stacking_options;
};

// Random size x size instance with the identity codec.
GradCheckInstance random_grad_check_instance(int size, int channels, std::uint64_t seed);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Relative errors use max(|analytic|, |numeric|, kGradCheckFloor) as the
// denominator. Central differences at h = 1e-5 on an O(1) loss carry about
// 1e-11 of rounding noise, so smaller entries are compared on this scale.
inline constexpr double kGradCheckFloor = 1e-4;

// Compares analytic gradients with central differences over every
// parameter entry. `corrupt` may edit the analytic gradients before the
// comparison (used to test the checker itself).
GradCheckResult gradient_check(DifferentiableModel& model, const GradCheckInstance& inst,
                               LossKind kind, double h = 1e-5,
                               const std::function<void(ParameterSet&)>& corrupt = {});

// Euler integration from t = 1 (noise) to t = 0 with n_steps uniform steps,
// then decode and clamp to [0,1].
imaging::RasterImage sample_image(const VelocityModel& model, const CameraCondition& cond,
                                  const Tensor& ref, const Tensor& depth, int n_steps,
                                  const stack::LatentCodec& codec, int width, int height,
                                  const Tensor& noise);
imaging::RasterImage sample_image(const VelocityModel& model, const CameraCondition& cond,
                                  const Tensor& ref, const Tensor& depth, int n_steps,
                                  const stack::LatentCodec& codec, int width, int height,
                                  std::mt19937_64& rng);

// The latent Euler trajectory's endpoint, before decoding.
Tensor integrate_latent(const VelocityModel& model, const CameraCondition& cond,
                        const Tensor& ref, const Tensor& depth, int n_steps, Tensor x);

}  // namespace refocus::flow
