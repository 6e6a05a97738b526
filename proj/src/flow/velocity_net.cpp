#include "refocus/flow/velocity_net.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "refocus/flow/tensor_ops.hpp"

namespace refocus::flow {
namespace {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("parameter: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string layer_name(int i) { return "conv" + std::to_string(i); }

}  // namespace

Parameter& ParameterSet::add(std::string name, std::vector<int> shape) {
  if (contains(name)) throw std::invalid_argument("parameter already exists: " + name);
  const std::size_t n = shape_size(shape);
  items_.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  return items_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : items_)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return true;
  return false;
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.values.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& p : items_) out.add(p.name, p.shape);
  return out;
}

void ParameterSet::fill(double v) {
  for (auto& p : items_) std::fill(p.values.begin(), p.values.end(), v);
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
  if (other.items_.size() != items_.size()) throw std::invalid_argument("add_scaled: mismatch");
  for (std::size_t k = 0; k < items_.size(); ++k) {
    auto& dst = items_[k].values;
    const auto& src = other.items_[k].values;
    if (dst.size() != src.size()) throw std::invalid_argument("add_scaled: size mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  }
}

double ParameterSet::squared_norm() const {
  double acc = 0.0;
  for (const auto& p : items_)
    for (double v : p.values) acc += v * v;
  return acc;
}

void validate_input(const ModelInput& in) {
  require_same_shape(in.xt, in.ref, "velocity model: xt vs ref");
  if (in.depth.channels != 1 || in.depth.height != in.xt.height ||
      in.depth.width != in.xt.width) {
    throw std::invalid_argument("velocity model: depth must be 1 x H x W on the xt grid");
  }
}

void NetArchitecture::validate() const {
  if (latent_channels < 1 || hidden_channels < 1 || hidden_layers < 1) {
    throw std::invalid_argument("NetArchitecture: sizes must be positive");
  }
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("NetArchitecture: odd kernel");
  if (embed_dim < 0 || time_dim < 0 || time_dim % 2 != 0) {
    throw std::invalid_argument("NetArchitecture: bad embedding widths");
  }
}

ConvVelocityNet::ConvVelocityNet(NetArchitecture arch) : arch_(arch) {
  arch_.validate();
  const int k = arch_.kernel;
  params_.add("cam.weight", {arch_.embed_dim, 3});
  params_.add("cam.bias", {arch_.embed_dim});
  int in_ch = arch_.input_channels();
  for (int i = 0; i < arch_.hidden_layers; ++i) {
    params_.add(layer_name(i) + ".weight", {arch_.hidden_channels, in_ch, k, k});
    params_.add(layer_name(i) + ".bias", {arch_.hidden_channels});
    in_ch = arch_.hidden_channels;
  }
  params_.add("out.weight", {arch_.latent_channels, in_ch, k, k});
  params_.add("out.bias", {arch_.latent_channels});
  if (arch_.linear_skip) {
    params_.add("skip.weight", {arch_.latent_channels, 2 * arch_.latent_channels + 1, 1, 1});
  }
}

void ConvVelocityNet::initialize(std::uint64_t seed, double output_scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : params_.items()) {
    const bool is_bias = p.shape.size() == 1;
    if (is_bias) {
      std::fill(p.values.begin(), p.values.end(), 0.0);
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < p.shape.size(); ++d) fan_in *= static_cast<std::size_t>(p.shape[d]);
    double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    if (p.name == "out.weight" || p.name == "skip.weight") scale *= output_scale;
    for (double& v : p.values) v = scale * normal(rng);
  }
}

// Cache layout: [0] assembled input, then (pre, act) per hidden layer, then
// the condition vector as a 1 x 1 x 3 tensor.
Tensor ConvVelocityNet::forward(const ModelInput& in, ForwardCache& cache) const {
  validate_input(in);
  if (in.xt.channels != arch_.latent_channels) {
    throw std::invalid_argument("ConvVelocityNet: latent channel mismatch");
  }
  const int h = in.xt.height;
  const int w = in.xt.width;
  const std::size_t plane = in.xt.plane();
  const int c = arch_.latent_channels;

  const auto token = camera_token(in.cond, params_.get("cam.weight").values,
                                  params_.get("cam.bias").values);
  const auto temb = timestep_embedding(in.t, arch_.time_dim);

  Tensor x(arch_.input_channels(), h, w);
  auto dst = x.data.begin();
  dst = std::copy(in.xt.data.begin(), in.xt.data.end(), dst);
  dst = std::copy(in.ref.data.begin(), in.ref.data.end(), dst);
  dst = std::copy(in.depth.data.begin(), in.depth.data.end(), dst);
  for (double v : token) dst = std::fill_n(dst, plane, v);
  for (double v : temb) dst = std::fill_n(dst, plane, v);

  cache.tensors.clear();
  cache.scalars.clear();
  cache.tensors.push_back(x);

  const Tensor* act = &cache.tensors.back();
  for (int i = 0; i < arch_.hidden_layers; ++i) {
    Tensor pre(arch_.hidden_channels, h, w);
    conv2d_forward(*act, params_.get(layer_name(i) + ".weight").values,
                   params_.get(layer_name(i) + ".bias").values, arch_.kernel, pre);
    Tensor post = pre;
    for (double& v : post.data) v = silu(v);
    cache.tensors.push_back(std::move(pre));
    cache.tensors.push_back(std::move(post));
    act = &cache.tensors.back();
  }

  Tensor out(c, h, w);
  conv2d_forward(*act, params_.get("out.weight").values, params_.get("out.bias").values,
                 arch_.kernel, out);
  if (arch_.linear_skip) {
    Tensor skip_in(2 * c + 1, h, w);
    std::copy_n(x.data.begin(), skip_in.size(), skip_in.data.begin());
    Tensor skip_out(c, h, w);
    conv2d_forward(skip_in, params_.get("skip.weight").values, {}, 1, skip_out);
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += skip_out.data[k];
  }

  Tensor cond(1, 1, 3);
  cond.data = condition_vector(in.cond);
  cache.tensors.push_back(std::move(cond));
  cache.scalars.push_back(in.t);
  return out;
}

void ConvVelocityNet::backward(const ForwardCache& cache, const Tensor& dout,
                               ParameterSet& grads) const {
  const int layers = arch_.hidden_layers;
  if (cache.tensors.size() != static_cast<std::size_t>(2 * layers + 2)) {
    throw std::invalid_argument("ConvVelocityNet: cache does not come from this model");
  }
  const Tensor& x = cache.tensors.front();
  const int c = arch_.latent_channels;
  const int h = x.height;
  const int w = x.width;
  const std::size_t plane = x.plane();
  if (dout.channels != c || dout.height != h || dout.width != w) {
    throw std::invalid_argument("ConvVelocityNet: dout shape mismatch");
  }

  Tensor dx(x.channels, h, w);
  if (arch_.linear_skip) {
    Tensor skip_in(2 * c + 1, h, w);
    std::copy_n(x.data.begin(), skip_in.size(), skip_in.data.begin());
    Tensor dskip(2 * c + 1, h, w);
    conv2d_backward(skip_in, params_.get("skip.weight").values, 1, dout,
                    grads.get("skip.weight").values, {}, &dskip);
    std::copy(dskip.data.begin(), dskip.data.end(), dx.data.begin());
  }

  const Tensor& last_act = cache.tensors[2 * layers];
  Tensor dact(last_act.channels, h, w);
  conv2d_backward(last_act, params_.get("out.weight").values, arch_.kernel, dout,
                  grads.get("out.weight").values, grads.get("out.bias").values, &dact);

  for (int i = layers - 1; i >= 0; --i) {
    const Tensor& pre = cache.tensors[2 * i + 1];
    Tensor dpre(pre.channels, h, w);
    for (std::size_t k = 0; k < pre.size(); ++k) dpre.data[k] = dact.data[k] * silu_grad(pre.data[k]);
    const Tensor& layer_in = i == 0 ? x : cache.tensors[2 * i];
    Tensor dlayer_in(layer_in.channels, h, w);
    conv2d_backward(layer_in, params_.get(layer_name(i) + ".weight").values, arch_.kernel, dpre,
                    grads.get(layer_name(i) + ".weight").values,
                    grads.get(layer_name(i) + ".bias").values, &dlayer_in);
    if (i == 0) {
      for (std::size_t k = 0; k < dx.size(); ++k) dx.data[k] += dlayer_in.data[k];
    } else {
      dact = std::move(dlayer_in);
    }
  }

  // Token planes are constant per image, so their gradient is a plane sum.
  const Tensor& cond = cache.tensors.back();
  auto& dw = grads.get("cam.weight").values;
  auto& db = grads.get("cam.bias").values;
  const std::size_t token_begin = static_cast<std::size_t>(2 * c + 1) * plane;
  for (int k = 0; k < arch_.embed_dim; ++k) {
    const auto first = dx.data.begin() + static_cast<std::ptrdiff_t>(token_begin + k * plane);
    const double g = std::accumulate(first, first + static_cast<std::ptrdiff_t>(plane), 0.0);
    db[k] += g;
    for (int j = 0; j < 3; ++j) dw[3 * k + j] += g * cond.data[j];
  }
}

ElementwiseLinearModel::ElementwiseLinearModel(int channels, int height, int width)
    : channels_(channels), height_(height), width_(width) {
  params_.add("xt_gain", {channels, height, width});
  params_.add("ref_gain", {channels, height, width});
  params_.add("bias", {channels, height, width});
}

Tensor ElementwiseLinearModel::forward(const ModelInput& in, ForwardCache& cache) const {
  validate_input(in);
  if (in.xt.channels != channels_ || in.xt.height != height_ || in.xt.width != width_) {
    throw std::invalid_argument("ElementwiseLinearModel: input shape mismatch");
  }
  const auto& a = params_.get("xt_gain").values;
  const auto& b = params_.get("ref_gain").values;
  const auto& c = params_.get("bias").values;
  Tensor out(channels_, height_, width_);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.data[k] = a[k] * in.xt.data[k] + b[k] * in.ref.data[k] + c[k];
  }
  cache.tensors = {in.xt, in.ref};
  cache.scalars.clear();
  return out;
}

void ElementwiseLinearModel::backward(const ForwardCache& cache, const Tensor& dout,
                                      ParameterSet& grads) const {
  if (cache.tensors.size() != 2) throw std::invalid_argument("ElementwiseLinearModel: bad cache");
  auto& da = grads.get("xt_gain").values;
  auto& db = grads.get("ref_gain").values;
  auto& dc = grads.get("bias").values;
  for (std::size_t k = 0; k < dout.size(); ++k) {
    da[k] += dout.data[k] * cache.tensors[0].data[k];
    db[k] += dout.data[k] * cache.tensors[1].data[k];
    dc[k] += dout.data[k];
  }
}

}  // namespace refocus::flow
