#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include "refocus/bokeh/render.hpp"
#include "refocus/flow/checkpoint.hpp"
#include "refocus/flow/flow.hpp"
#include "refocus/flow/losses.hpp"
#include "refocus/flow/trainer.hpp"
#include "refocus/flow/velocity_net.hpp"
#include "refocus/imaging/scene.hpp"
#include "test_util.hpp"

namespace refocus::flow {
namespace {

using refocus::testing::TempDir;

// Velocity model backed by a plain function, for oracle predictors.
class FnModel : public VelocityModel {
 public:
  explicit FnModel(std::function<Tensor(const ModelInput&)> fn) : fn_(std::move(fn)) {}
  Tensor predict(const ModelInput& in) const override { return fn_(in); }

 private:
  std::function<Tensor(const ModelInput&)> fn_;
};

Tensor tensor_of(int c, int h, int w, std::vector<double> values) {
  Tensor t(c, h, w);
  EXPECT_EQ(values.size(), t.size());
  t.data = std::move(values);
  return t;
}

Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor t(c, h, w);
  for (double& v : t.data) v = unit(rng);
  return t;
}

imaging::RasterImage gray2x2(double a, double b, double c, double d) {
  imaging::RasterImage img(2, 2, 1);
  img.at(0, 0) = a;
  img.at(1, 0) = b;
  img.at(0, 1) = c;
  img.at(1, 1) = d;
  return img;
}

NetArchitecture small_arch() {
  NetArchitecture arch;
  arch.hidden_channels = 8;
  arch.embed_dim = 4;
  arch.time_dim = 4;
  return arch;
}

TEST(Perturb, Endpoints) {
  const auto x0 = random_tensor(3, 4, 5, 1);
  std::mt19937_64 rng(2);
  const auto eps = normal_tensor(3, 4, 5, rng);
  EXPECT_EQ(perturb(x0, eps, 0.0).xt, x0);
  EXPECT_EQ(perturb(x0, eps, 1.0).xt, eps);
  const auto s = perturb(x0, eps, 0.37);
  for (std::size_t k = 0; k < s.v.size(); ++k) {
    EXPECT_EQ(s.v.data[k], eps.data[k] - x0.data[k]);
    EXPECT_NEAR(s.xt.data[k], x0.data[k] + s.v.data[k] * 0.37, 1e-15);
  }
  const Tensor zero(3, 4, 5);
  const auto z = perturb(zero, eps, 0.25);
  EXPECT_EQ(z.v, eps);
  for (std::size_t k = 0; k < z.xt.size(); ++k) EXPECT_EQ(z.xt.data[k], 0.25 * eps.data[k]);
}

TEST(Perturb, RejectsBadInputs) {
  EXPECT_THROW(perturb(Tensor(1, 2, 2), Tensor(1, 2, 3), 0.5), std::invalid_argument);
  EXPECT_THROW(perturb(Tensor(1, 2, 2), Tensor(1, 2, 2), 1.5), std::invalid_argument);
}

TEST(CameraToken, ZeroAndIdentityProjections) {
  const std::vector<double> zeros(8 * 3, 0.0), bias0(8, 0.0);
  for (double v : camera_token({0.3, 0.9, 12.0}, zeros, bias0)) EXPECT_EQ(v, 0.0);

  std::vector<double> w(8 * 3, 0.0);
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const auto tok = camera_token({0.5, 0.5, 10.0}, w, bias0);  // b / 20 = 0.5
  EXPECT_DOUBLE_EQ(tok[0], 0.5);
  EXPECT_DOUBLE_EQ(tok[1], 0.5);
  EXPECT_DOUBLE_EQ(tok[2], 0.5);
  for (int i = 3; i < 8; ++i) EXPECT_EQ(tok[i], 0.0);
}

TEST(CameraToken, LinearWithoutBias) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<double> w(6 * 3), bias(6, 0.0);
  for (double& v : w) v = normal(rng);
  const CameraCondition c1{0.2, 0.7, 4.0}, c2{0.9, 0.1, 16.0};
  const double a = 0.3, b = 0.6;
  const CameraCondition mix{a * c1.fx + b * c2.fx, a * c1.fy + b * c2.fy, a * c1.b + b * c2.b};
  const auto t1 = camera_token(c1, w, bias), t2 = camera_token(c2, w, bias);
  const auto tm = camera_token(mix, w, bias);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(tm[i], a * t1[i] + b * t2[i], 1e-12);
}

TEST(TimestepEmbedding, Shape) {
  const auto e = timestep_embedding(0.0, 8);
  ASSERT_EQ(e.size(), 8u);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(e[2 * i], 0.0);
    EXPECT_EQ(e[2 * i + 1], 1.0);
  }
  EXPECT_THROW(timestep_embedding(0.5, 3), std::invalid_argument);
}

TEST(ConvVelocityNet, OutputShapeAndZeroNetwork) {
  ConvVelocityNet net(small_arch());
  const auto xt = random_tensor(3, 6, 7, 4);
  const auto ref = random_tensor(3, 6, 7, 5);
  const auto depth = random_tensor(1, 6, 7, 6);
  const auto zero_out = net.predict({xt, 0.4, {0.1, 0.2, 5.0}, ref, depth});
  EXPECT_TRUE(zero_out.same_shape(xt));
  for (double v : zero_out.data) EXPECT_EQ(v, 0.0);

  net.initialize(7);
  const auto out = net.predict({xt, 0.4, {0.1, 0.2, 5.0}, ref, depth});
  EXPECT_TRUE(out.same_shape(xt));
  EXPECT_EQ(out, net.predict({xt, 0.4, {0.1, 0.2, 5.0}, ref, depth}));
  EXPECT_NE(out, net.predict({xt, 0.4, {0.1, 0.2, 6.0}, ref, depth}));
  EXPECT_NE(out, net.predict({xt, 0.9, {0.1, 0.2, 5.0}, ref, depth}));
}

TEST(ConvVelocityNet, RejectsMisalignedInputs) {
  ConvVelocityNet net(small_arch());
  const auto xt = random_tensor(3, 4, 4, 1);
  const auto depth = random_tensor(1, 4, 4, 2);
  const auto wrong = random_tensor(3, 4, 5, 3);
  EXPECT_THROW(net.predict({xt, 0.5, {}, wrong, depth}), std::invalid_argument);
  const auto wrong_depth = random_tensor(2, 4, 4, 4);
  EXPECT_THROW(net.predict({xt, 0.5, {}, xt, wrong_depth}), std::invalid_argument);
}

TEST(ConvVelocityNet, EveryParameterReceivesGradient) {
  ConvVelocityNet net(small_arch());
  net.initialize(8);
  // Non-zero biases so every path carries signal.
  for (auto& p : net.parameters().items()) {
    if (p.name.find("bias") != std::string::npos) {
      for (double& v : p.values) v = 0.05;
    }
  }
  const auto inst = random_grad_check_instance(6, 3, 9);
  auto grads = net.parameters().zeros_like();
  flow_loss_grad(net, inst.sample, inst.cond, inst.ref, inst.depth, grads);
  stacking_loss_grad(net, inst.stacking, grads, 1.0, inst.stacking_options);
  for (const auto& p : grads.items()) {
    double norm = 0.0;
    for (double g : p.values) norm += g * g;
    EXPECT_GT(norm, 0.0) << p.name;
  }
}

TEST(FlowLoss, OracleAndDegenerateCases) {
  const auto x0 = random_tensor(3, 4, 4, 10);
  std::mt19937_64 rng(11);
  const auto eps = normal_tensor(3, 4, 4, rng);
  const auto sample = perturb(x0, eps, 0.6);
  const auto ref = random_tensor(3, 4, 4, 12);
  const Tensor depth(1, 4, 4);
  const FnModel oracle([&](const ModelInput&) { return sample.v; });
  EXPECT_EQ(flow_loss(oracle, sample, {}, ref, depth), 0.0);
  EXPECT_EQ(flow_loss(oracle, sample, {}, ref, depth, LossNorm::kL1), 0.0);

  const ConvVelocityNet zero_net(NetArchitecture{});
  const auto still = perturb(x0, x0, 0.6);
  EXPECT_EQ(flow_loss(zero_net, still, {}, ref, depth), 0.0);
}

TEST(FlowLoss, HalfXtModelClosedForm) {
  // delta(x) = 0.5 xt on a 2x2 single-channel instance; expected value from
  // exact rational arithmetic: mean((0.5 xt - v)^2) = 1.04941875.
  const auto x0 = tensor_of(1, 2, 2, {0.2, -0.4, 1.0, 0.0});
  const auto eps = tensor_of(1, 2, 2, {1.0, 0.5, -0.3, 0.7});
  const auto sample = perturb(x0, eps, 0.3);
  const FnModel half([](const ModelInput& in) {
    Tensor out = in.xt;
    for (double& v : out.data) v *= 0.5;
    return out;
  });
  const Tensor ref(1, 2, 2), depth(1, 2, 2);
  EXPECT_NEAR(flow_loss(half, sample, {}, ref, depth), 1.04941875, 1e-12);

  ElementwiseLinearModel linear(1, 2, 2);
  for (double& v : linear.parameters().get("xt_gain").values) v = 0.5;
  EXPECT_NEAR(flow_loss(linear, sample, {}, ref, depth), 1.04941875, 1e-12);
}

struct ClosedFormInstance {
  StackingInstance inst;
  std::vector<double> gain = {0.5, -1.0, 2.0, 0.25};
};

ClosedFormInstance closed_form_instance() {
  ClosedFormInstance c;
  auto& s = c.inst;
  s.image1 = gray2x2(0.9, 0.1, 0.4, 0.6);
  s.image2 = gray2x2(0.2, 0.7, 0.5, 0.3);
  stack::StackMask m(2, 2);
  m.at(0, 0) = 1;
  m.at(1, 1) = 1;
  s.mask = m;
  s.cond1 = {0.1, 0.1, 2.0};
  s.cond2 = {0.9, 0.9, 6.0};
  s.ref = Tensor(1, 2, 2);
  s.depth = Tensor(1, 2, 2);
  s.eps = tensor_of(1, 2, 2, {0.3, -1.2, 0.8, 0.05});
  s.t = 0.25;
  return c;
}

TEST(StackingLoss, ElementwiseLinearClosedForm) {
  // I_stack = [0.9, 0.7, 0.5, 0.6], xt = [0.75, 0.225, 0.575, 0.4625],
  // v_stack = [-0.6, -1.9, 0.3, -0.55]; loss = 503993 / 409600.
  auto c = closed_form_instance();
  ElementwiseLinearModel model(1, 2, 2);
  model.parameters().get("xt_gain").values = c.gain;
  EXPECT_NEAR(stacking_loss(model, c.inst), 503993.0 / 409600.0, 1e-12);
}

TEST(StackingLoss, ConditionDependentClosedForm) {
  // Adds b * [0.1, 0.1, -0.1, 0.2] per condition, so the latent mask decides
  // which branch each cell sees; loss = 794041 / 409600.
  auto c = closed_form_instance();
  const std::vector<double> per_b = {0.1, 0.1, -0.1, 0.2};
  const FnModel model([&](const ModelInput& in) {
    Tensor out = in.xt;
    for (std::size_t k = 0; k < out.size(); ++k) {
      out.data[k] = c.gain[k] * in.xt.data[k] + in.cond.b * per_b[k];
    }
    return out;
  });
  EXPECT_NEAR(stacking_loss(model, c.inst), 794041.0 / 409600.0, 1e-12);
}

TEST(StackingLoss, OracleAndMaskAnnihilation) {
  auto c = closed_form_instance();
  const stack::StackMask& m = *c.inst.mask;
  const auto stacked = stack::stack_blend(c.inst.image1, c.inst.image2, m);
  const auto z = stack::LatentCodec::identity().encode(stacked);
  const auto target = perturb(z, c.inst.eps, c.inst.t).v;
  const FnModel oracle([&](const ModelInput&) { return target; });
  EXPECT_EQ(stacking_loss(oracle, c.inst), 0.0);

  // All-ones mask: only the first condition's branch matters.
  c.inst.mask = stack::StackMask(2, 2, 1);
  const auto z1 = stack::LatentCodec::identity().encode(c.inst.image1);
  const auto target1 = perturb(z1, c.inst.eps, c.inst.t).v;
  const FnModel first_only([&](const ModelInput& in) {
    if (in.cond == c.inst.cond1) return target1;
    Tensor junk = target1;
    for (double& v : junk.data) v += 17.0;
    return junk;
  });
  EXPECT_EQ(stacking_loss(first_only, c.inst), 0.0);
}

TEST(StackingLoss, VelocityIdentityWithSharedNoise) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto i1 = refocus::testing::random_image(5, 4, 3, 100 + trial);
    const auto i2 = refocus::testing::random_image(5, 4, 3, 200 + trial);
    stack::StackMask m(5, 4);
    std::bernoulli_distribution coin(0.5);
    for (auto& v : m.data()) v = coin(rng);
    const auto codec = stack::LatentCodec::identity();
    const auto eps = normal_tensor(3, 4, 5, rng);
    const auto vs = perturb(codec.encode(stack::stack_blend(i1, i2, m)), eps, 0.5).v;
    const auto v1 = perturb(codec.encode(i1), eps, 0.5).v;
    const auto v2 = perturb(codec.encode(i2), eps, 0.5).v;
    const auto lm = stack::downsample_mask(m, 5, 4);
    const auto blended = stack::latent_stack_blend(v1, v2, lm);
    for (std::size_t k = 0; k < vs.size(); ++k) EXPECT_NEAR(blended.data[k], vs.data[k], 1e-6);
  }
}

TEST(StackingLoss, ShapeMismatchThrows) {
  auto c = closed_form_instance();
  c.inst.eps = Tensor(1, 2, 3);
  ElementwiseLinearModel model(1, 2, 2);
  EXPECT_THROW(stacking_loss(model, c.inst), std::invalid_argument);
}

TEST(GradientCheck, ConvNetFlowAndStacking) {
  ConvVelocityNet net(small_arch());
  net.initialize(21, 0.5);
  const auto inst = random_grad_check_instance(8, 3, 22);
  for (auto kind : {LossKind::kFlow, LossKind::kStacking}) {
    const auto r = gradient_check(net, inst, kind);
    EXPECT_EQ(r.checked, net.parameters().total_size());
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst_parameter << "[" << r.worst_index << "]";
  }
}

TEST(GradientCheck, LinearModelIsExact) {
  ElementwiseLinearModel model(3, 8, 8);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal;
  for (auto& p : model.parameters().items()) {
    for (double& v : p.values) v = normal(rng);
  }
  const auto inst = random_grad_check_instance(8, 3, 24);
  for (auto kind : {LossKind::kFlow, LossKind::kStacking}) {
    EXPECT_LE(gradient_check(model, inst, kind).max_rel_error, 1e-6);
  }
}

TEST(GradientCheck, DetectsCorruptedGradient) {
  ConvVelocityNet net(small_arch());
  net.initialize(25, 0.5);
  const auto inst = random_grad_check_instance(8, 3, 26);
  const auto doubled = [](ParameterSet& g) {
    // Double the largest-magnitude entry.
    double* worst = nullptr;
    for (auto& p : g.items()) {
      for (double& v : p.values) {
        if (!worst || std::abs(v) > std::abs(*worst)) worst = &v;
      }
    }
    *worst *= 2.0;
  };
  for (auto kind : {LossKind::kFlow, LossKind::kStacking}) {
    EXPECT_GE(gradient_check(net, inst, kind, 1e-5, doubled).max_rel_error, 0.3);
  }
}

std::vector<TrainingExample> toy_batch(int n, std::uint64_t seed) {
  std::vector<TrainingExample> batch;
  for (int i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.reference = refocus::testing::random_image(8, 8, 3, seed + 3 * i);
    ex.target = refocus::testing::random_image(8, 8, 3, seed + 3 * i + 1);
    ex.target_cond = {0.25, 0.75, 5.0};
    if (i % 2 == 0) {
      ex.sibling = refocus::testing::random_image(8, 8, 3, seed + 3 * i + 2);
      ex.sibling_cond = {0.5, 0.5, 0.0};
    }
    ex.depth = imaging::DepthMap(8, 8, 0.4);
    batch.push_back(std::move(ex));
  }
  return batch;
}

TEST(TrainStep, BreakdownIsAdditive) {
  ConvVelocityNet net(small_arch());
  net.initialize(30);
  TrainConfig cfg;
  cfg.codec = stack::LatentCodec::identity();
  std::mt19937_64 rng(31);
  SgdMomentum opt(cfg.lr, cfg.momentum);
  const auto batch = toy_batch(4, 40);
  for (int i = 0; i < 3; ++i) {
    const auto b = train_step(net, batch, cfg, rng, opt);
    EXPECT_EQ(b.samples, 4);
    EXPECT_EQ(b.stack_samples, 2);
    EXPECT_GE(b.l_flow, 0.0);
    EXPECT_GT(b.l_stack, 0.0);
    EXPECT_NEAR(b.l_total, b.l_flow + cfg.lambda_stack * b.l_stack, 1e-9);
  }
}

TEST(TrainStep, ZeroLambdaGivesFlowOnlyTotal) {
  ConvVelocityNet net(small_arch());
  net.initialize(32);
  TrainConfig cfg;
  cfg.lambda_stack = 0.0;
  std::mt19937_64 rng(33);
  SgdMomentum opt(cfg.lr, cfg.momentum);
  const auto b = train_step(net, toy_batch(4, 50), cfg, rng, opt);
  EXPECT_EQ(b.l_total, b.l_flow);
}

TEST(TrainStep, EmptyBatchAndBadConfigThrow) {
  ConvVelocityNet net(small_arch());
  TrainConfig cfg;
  std::mt19937_64 rng(0);
  SgdMomentum opt(cfg.lr, cfg.momentum);
  EXPECT_THROW(train_step(net, std::span<const TrainingExample>{}, cfg, rng, opt),
               std::invalid_argument);
  cfg.depth_dropout_p = 1.5;
  EXPECT_THROW(train_step(net, toy_batch(1, 0), cfg, rng, opt), std::invalid_argument);
  cfg.depth_dropout_p = 0.5;
  cfg.lambda_stack = -1.0;
  EXPECT_THROW(train_step(net, toy_batch(1, 0), cfg, rng, opt), std::invalid_argument);
}

TEST(TrainStep, DepthDropoutRate) {
  ConvVelocityNet net(NetArchitecture{1, 1, 1, 1, 0, 0, false});
  TrainConfig cfg;
  cfg.codec = stack::LatentCodec::identity();
  std::mt19937_64 rng(34);
  SgdMomentum opt(cfg.lr, cfg.momentum);
  std::vector<TrainingExample> batch(100);
  for (auto& ex : batch) {
    ex.reference = imaging::RasterImage(1, 1, 1, 0.5);
    ex.target = imaging::RasterImage(1, 1, 1, 0.2);
    ex.depth = imaging::DepthMap(1, 1, 0.7);
  }
  long dropped = 0;
  for (int s = 0; s < 100; ++s) dropped += train_step(net, batch, cfg, rng, opt).depth_dropped;
  const double frac = dropped / 10000.0;
  EXPECT_GE(frac, 0.485);
  EXPECT_LE(frac, 0.515);
}

TEST(TrainStep, DeterministicTrajectories) {
  auto run = [] {
    ConvVelocityNet net(small_arch());
    net.initialize(35);
    TrainConfig cfg;
    std::mt19937_64 rng(36);
    SgdMomentum opt(cfg.lr, cfg.momentum);
    const auto batch = toy_batch(4, 60);
    std::vector<double> losses;
    for (int i = 0; i < 5; ++i) losses.push_back(train_step(net, batch, cfg, rng, opt).l_total);
    return std::pair{losses, net.parameters().items().front().values};
  };
  EXPECT_EQ(run(), run());
}

TEST(Sgd, MomentumUpdate) {
  ParameterSet params;
  params.add("w", {2}).values = {1.0, -1.0};
  ParameterSet grads = params.zeros_like();
  grads.get("w").values = {0.5, 0.25};
  SgdMomentum opt(0.1, 0.9);
  opt.step(params, grads);
  EXPECT_DOUBLE_EQ(params.get("w").values[0], 1.0 - 0.1 * 0.5);
  opt.step(params, grads);
  // velocity = 0.9 * 0.5 + 0.5 = 0.95
  EXPECT_DOUBLE_EQ(params.get("w").values[0], 1.0 - 0.05 - 0.095);
}

TEST(SampleImage, OracleRecoversTargetInOneStep) {
  const auto x_star = random_tensor(3, 5, 5, 40);
  const FnModel oracle([&](const ModelInput& in) {
    // v = (xt - x*) / t is eps - x* along the straight path.
    Tensor v = in.xt;
    for (std::size_t k = 0; k < v.size(); ++k) v.data[k] = (in.xt.data[k] - x_star.data[k]) / in.t;
    return v;
  });
  std::mt19937_64 rng(41);
  const auto noise = normal_tensor(3, 5, 5, rng);
  const Tensor ref(3, 5, 5), depth(1, 5, 5);
  const auto z = integrate_latent(oracle, {}, ref, depth, 1, noise);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(z.data[k], x_star.data[k], 1e-12);
  const auto img = sample_image(oracle, {}, ref, depth, 1, stack::LatentCodec::identity(), 5, 5,
                                noise);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(img.at(x, y, c), x_star.at(c, y, x), 1e-12);
    }
  }
}

TEST(SampleImage, OneStepIsSingleEulerUpdate) {
  ConvVelocityNet net(small_arch());
  net.initialize(42);
  std::mt19937_64 rng(43);
  const auto noise = normal_tensor(3, 4, 4, rng);
  const auto ref = random_tensor(3, 4, 4, 44);
  const auto depth = random_tensor(1, 4, 4, 45);
  const CameraCondition cond{0.3, 0.6, 7.0};
  const auto v = net.predict({noise, 1.0, cond, ref, depth});
  const auto z = integrate_latent(net, cond, ref, depth, 1, noise);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_EQ(z.data[k], noise.data[k] - v.data[k]);
  EXPECT_THROW(integrate_latent(net, cond, ref, depth, 0, noise), std::invalid_argument);
}

TEST(Checkpoint, RoundTripAtFloatPrecision) {
  TempDir dir;
  ConvVelocityNet net(small_arch());
  net.initialize(50);
  save_checkpoint(dir / "m.ckpt", net);
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.architecture(), net.architecture());
  const auto& a = net.parameters().items();
  const auto& b = back.parameters().items();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].name, b[k].name);
    EXPECT_EQ(a[k].shape, b[k].shape);
    for (std::size_t i = 0; i < a[k].values.size(); ++i) {
      EXPECT_EQ(static_cast<double>(static_cast<float>(a[k].values[i])), b[k].values[i]);
    }
  }
  // A reloaded model serializes to the same bytes.
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(net));
}

TEST(Checkpoint, RejectsTamperedFiles) {
  ConvVelocityNet net(small_arch());
  net.initialize(51);
  const std::string good = serialize_checkpoint(net);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(good.substr(0, good.size() - 3)), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(good + "x"), CheckpointError);

  // Change the leading dim of out.bias from 3 to 4.
  std::string bad_shape = good;
  const auto pos = bad_shape.find("out.bias");
  ASSERT_NE(pos, std::string::npos);
  const std::size_t dim_at = pos + std::strlen("out.bias") + 4;
  ASSERT_EQ(static_cast<unsigned char>(bad_shape[dim_at]), 3);
  bad_shape[dim_at] = 4;
  try {
    deserialize_checkpoint(bad_shape);
    FAIL() << "expected a shape error";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, ArchitectureDescriptorRoundTrip) {
  NetArchitecture arch = small_arch();
  arch.linear_skip = false;
  EXPECT_EQ(architecture_from_json(architecture_to_json(arch)), arch);
  EXPECT_THROW(architecture_from_json("{\"kernel\": 3}"), CheckpointError);
  EXPECT_THROW(architecture_from_json("not json"), CheckpointError);
}

TEST(Overfit, SingleSceneReproducesTarget) {
  // One fixed pair, trained until the sampler lands near the target.
  imaging::SceneSpec spec;
  spec.seed = 60;
  spec.width = spec.height = 12;
  spec.layer_count = 2;
  spec.layer_depths = {0.3, 0.7};
  const auto scene = imaging::generate_scene(spec);
  bokeh::RenderParams p;
  p.focus_depth = 0.3;
  p.bokeh_level = 6.0;
  TrainingExample ex;
  ex.reference = scene.image;
  ex.target = bokeh::render_fast(scene.image, scene.depth, p);
  ex.target_cond = {0.0, 0.0, 6.0};
  ex.depth = scene.depth;

  NetArchitecture arch = small_arch();
  arch.hidden_channels = 16;
  ConvVelocityNet net(arch);
  net.initialize(61);
  TrainConfig cfg;
  cfg.codec = stack::LatentCodec::identity();
  cfg.lambda_stack = 0.0;
  cfg.lr = 1e-2;
  std::mt19937_64 rng(62);
  SgdMomentum opt(cfg.lr, cfg.momentum);
  const std::vector<TrainingExample> batch(8, ex);
  for (int step = 0; step < 3000; ++step) train_step(net, batch, cfg, rng, opt);

  const auto codec = stack::LatentCodec::identity();
  const auto ref = codec.encode(ex.reference);
  const auto depth = codec.resample(ex.depth);
  const auto out = sample_image(net, ex.target_cond, ref, depth, 20, codec, 12, 12, rng);
  double mae = 0.0;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    mae += std::abs(out.data()[i] - ex.target.data()[i]);
  }
  mae /= static_cast<double>(out.data().size());
  EXPECT_LE(mae, 0.15);
}

}  // namespace
}  // namespace refocus::flow
