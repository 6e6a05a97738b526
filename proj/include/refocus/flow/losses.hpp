#pragma once

#include <functional>
#include <optional>
#include <string>

#include "refocus/flow/flow.hpp"
#include "refocus/flow/velocity_net.hpp"
#include "refocus/stack/codec.hpp"
#include "refocus/stack/focus_stack.hpp"

namespace refocus::flow {

enum class LossNorm { kMse, kL1 };

// Velocity-regression loss for a ref -> target pair. When grads is given,
// weight * dL/dtheta is accumulated into it (model must be differentiable).
double flow_loss(const VelocityModel& model, const FlowSample& sample, const CameraCondition& cond,
                 const Tensor& ref, const Tensor& depth, LossNorm norm = LossNorm::kMse);
double flow_loss_grad(const DifferentiableModel& model, const FlowSample& sample,
                      const CameraCondition& cond, const Tensor& ref, const Tensor& depth,
                      ParameterSet& grads, double weight = 1.0, LossNorm norm = LossNorm::kMse);

// Two differently focused renders of one scene, plus the shared conditioning
// and noise for the stacking constraint. ref and depth live on the latent
// grid; mask overrides the sharpness mask when set.
struct StackingInstance {
  imaging::RasterImage image1;
  imaging::RasterImage image2;
  CameraCondition cond1;
  CameraCondition cond2;
  Tensor ref;
  Tensor depth;
  Tensor eps;
  double t = 0.5;
  std::optional<stack::StackMask> mask;
};

struct StackingOptions {
  stack::LatentCodec codec = stack::LatentCodec::identity();
  double smooth_sigma = stack::kDefaultStackSigma;
  LossNorm norm = LossNorm::kMse;
};

// Blends the two conditions' velocity predictions at the stacked image's
// noisy code with the latent mask and regresses eps - encode(I_stack).
double stacking_loss(const VelocityModel& model, const StackingInstance& inst,
                     const StackingOptions& options = {});
double stacking_loss_grad(const DifferentiableModel& model, const StackingInstance& inst,
                          ParameterSet& grads, double weight = 1.0,
                          const StackingOptions& options = {});

}  // namespace refocus::flow
