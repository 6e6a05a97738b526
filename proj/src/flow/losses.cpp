#include "refocus/flow/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "refocus/flow/tensor_ops.hpp"

namespace refocus::flow {
namespace {

// Mean of norm(residual) and, when dres is non-null, d(loss)/d(residual).
double reduce(const Tensor& residual, LossNorm norm, Tensor* dres) {
  if (residual.size() == 0) throw std::invalid_argument("loss: empty tensor");
  const double inv_n = 1.0 / static_cast<double>(residual.size());
  double acc = 0.0;
  if (dres) *dres = Tensor(residual.channels, residual.height, residual.width);
  for (std::size_t k = 0; k < residual.size(); ++k) {
    const double r = residual.data[k];
    if (norm == LossNorm::kMse) {
      acc += r * r;
      if (dres) dres->data[k] = 2.0 * r * inv_n;
    } else {
      acc += std::abs(r);
      if (dres) dres->data[k] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv_n;
    }
  }
  return acc * inv_n;
}

void check_flow_inputs(const FlowSample& sample, const Tensor& ref, const Tensor& depth) {
  require_same_shape(sample.xt, sample.v, "flow_loss: xt vs v");
  require_same_shape(sample.xt, ref, "flow_loss: xt vs ref");
  if (depth.channels != 1 || depth.height != ref.height || depth.width != ref.width) {
    throw std::invalid_argument("flow_loss: depth must be 1 x H x W");
  }
}

double flow_loss_impl(const VelocityModel& model, const FlowSample& sample,
                      const CameraCondition& cond, const Tensor& ref, const Tensor& depth,
                      LossNorm norm, const DifferentiableModel* diff, ParameterSet* grads,
                      double weight) {
  check_flow_inputs(sample, ref, depth);
  const ModelInput in{sample.xt, sample.t, cond, ref, depth};
  ForwardCache cache;
  Tensor pred = diff ? diff->forward(in, cache) : model.predict(in);
  require_same_shape(pred, sample.v, "flow_loss: prediction");
  Tensor residual = pred;
  for (std::size_t k = 0; k < residual.size(); ++k) residual.data[k] -= sample.v.data[k];
  Tensor dres;
  const double loss = reduce(residual, norm, diff ? &dres : nullptr);
  if (diff) {
    for (double& g : dres.data) g *= weight;
    diff->backward(cache, dres, *grads);
  }
  return loss;
}

struct StackingPlan {
  Tensor target;  // v_stack
  Tensor xt;
  stack::LatentMask mask;
};

StackingPlan plan_stacking(const StackingInstance& inst, const StackingOptions& options) {
  if (!inst.image1.same_shape(inst.image2)) {
    throw std::invalid_argument("stacking_loss: I1 and I2 differ in shape");
  }
  const stack::StackMask mask =
      inst.mask ? *inst.mask : stack::stack_mask(inst.image1, inst.image2, options.smooth_sigma);
  if (mask.width() != inst.image1.width() || mask.height() != inst.image1.height()) {
    throw std::invalid_argument("stacking_loss: mask size differs from images");
  }
  const auto stacked = stack::stack_blend(inst.image1, inst.image2, mask);
  const Tensor z = options.codec.encode(stacked);
  require_same_shape(z, inst.eps, "stacking_loss: latent vs eps");
  require_same_shape(z, inst.ref, "stacking_loss: latent vs ref");
  if (inst.depth.channels != 1 || inst.depth.height != z.height || inst.depth.width != z.width) {
    throw std::invalid_argument("stacking_loss: depth must be 1 x H x W on the latent grid");
  }
  FlowSample s = perturb(z, inst.eps, inst.t);
  return {std::move(s.v), std::move(s.xt), stack::downsample_mask(mask, z.width, z.height)};
}

double stacking_loss_impl(const VelocityModel& model, const StackingInstance& inst,
                          const StackingOptions& options, const DifferentiableModel* diff,
                          ParameterSet* grads, double weight) {
  const StackingPlan plan = plan_stacking(inst, options);
  const ModelInput in1{plan.xt, inst.t, inst.cond1, inst.ref, inst.depth};
  const ModelInput in2{plan.xt, inst.t, inst.cond2, inst.ref, inst.depth};
  ForwardCache cache1, cache2;
  const Tensor v1 = diff ? diff->forward(in1, cache1) : model.predict(in1);
  const Tensor v2 = diff ? diff->forward(in2, cache2) : model.predict(in2);
  require_same_shape(v1, plan.target, "stacking_loss: prediction");

  const std::size_t plane = plan.target.plane();
  Tensor residual = plan.target;
  for (std::size_t k = 0; k < residual.size(); ++k) {
    const double m = plan.mask.data[k % plane];
    residual.data[k] = m * v1.data[k] + (1.0 - m) * v2.data[k] - plan.target.data[k];
  }
  Tensor dres;
  const double loss = reduce(residual, options.norm, diff ? &dres : nullptr);
  if (diff) {
    Tensor d1 = dres;
    Tensor d2 = dres;
    for (std::size_t k = 0; k < dres.size(); ++k) {
      const double m = plan.mask.data[k % plane];
      d1.data[k] *= weight * m;
      d2.data[k] *= weight * (1.0 - m);
    }
    diff->backward(cache1, d1, *grads);
    diff->backward(cache2, d2, *grads);
  }
  return loss;
}

}  // namespace

double flow_loss(const VelocityModel& model, const FlowSample& sample, const CameraCondition& cond,
                 const Tensor& ref, const Tensor& depth, LossNorm norm) {
  return flow_loss_impl(model, sample, cond, ref, depth, norm, nullptr, nullptr, 0.0);
}

double flow_loss_grad(const DifferentiableModel& model, const FlowSample& sample,
                      const CameraCondition& cond, const Tensor& ref, const Tensor& depth,
                      ParameterSet& grads, double weight, LossNorm norm) {
  return flow_loss_impl(model, sample, cond, ref, depth, norm, &model, &grads, weight);
}

double stacking_loss(const VelocityModel& model, const StackingInstance& inst,
                     const StackingOptions& options) {
  return stacking_loss_impl(model, inst, options, nullptr, nullptr, 0.0);
}

double stacking_loss_grad(const DifferentiableModel& model, const StackingInstance& inst,
                          ParameterSet& grads, double weight, const StackingOptions& options) {
  return stacking_loss_impl(model, inst, options, &model, &grads, weight);
}

}  // namespace refocus::flow
