#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refocus/flow/flow.hpp"
#include "refocus/tensor.hpp"

namespace refocus::flow {

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

// Ordered collection of named real arrays.
class ParameterSet {
 public:
  Parameter& add(std::string name, std::vector<int> shape);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }
  std::size_t total_size() const;

  // Same names and shapes, all values zero.
  ParameterSet zeros_like() const;
  void fill(double v);
  // this += scale * other (shapes must match).
  void add_scaled(const ParameterSet& other, double scale);
  double squared_norm() const;

 private:
  std::vector<Parameter> items_;
};

// Inputs to the velocity predictor. ref and xt share a shape; depth is a
// single channel on the same grid.
struct ModelInput {
  const Tensor& xt;
  double t;
  CameraCondition cond;
  const Tensor& ref;
  const Tensor& depth;
};

void validate_input(const ModelInput& in);

class VelocityModel {
 public:
  virtual ~VelocityModel() = default;
  // Output has xt's shape.
  virtual Tensor predict(const ModelInput& in) const = 0;
};

// Opaque per-call record of what backward needs.
struct ForwardCache {
  std::vector<Tensor> tensors;
  std::vector<double> scalars;
};

class DifferentiableModel : public VelocityModel {
 public:
  virtual Tensor forward(const ModelInput& in, ForwardCache& cache) const = 0;
  // Accumulates dL/dtheta into grads given dL/doutput.
  virtual void backward(const ForwardCache& cache, const Tensor& dout,
                        ParameterSet& grads) const = 0;
  virtual ParameterSet& parameters() = 0;
  virtual const ParameterSet& parameters() const = 0;

  Tensor predict(const ModelInput& in) const override {
    ForwardCache cache;
    return forward(in, cache);
  }
};

struct NetArchitecture {
  int latent_channels = 3;
  int hidden_channels = 16;
  int hidden_layers = 3;
  int kernel = 3;
  int embed_dim = 8;  // camera token width
  int time_dim = 8;   // sinusoidal timestep embedding width
  bool linear_skip = true;

  // [xt, ref, depth, token, time embedding].
  int input_channels() const { return 2 * latent_channels + 1 + embed_dim + time_dim; }
  void validate() const;
  friend bool operator==(const NetArchitecture&, const NetArchitecture&) = default;
};

// Conv stack: hidden_layers convolutions with SiLU, a linear output
// convolution, and an optional 1x1 linear path from [xt, ref, depth] to the
// output. The camera token and time embedding enter as constant planes.
class ConvVelocityNet : public DifferentiableModel {
 public:
  explicit ConvVelocityNet(NetArchitecture arch = {});

  const NetArchitecture& architecture() const { return arch_; }

  // Gaussian weights scaled by 1/sqrt(fan_in); biases zero.
  void initialize(std::uint64_t seed, double output_scale = 0.1);

  Tensor forward(const ModelInput& in, ForwardCache& cache) const override;
  void backward(const ForwardCache& cache, const Tensor& dout,
                ParameterSet& grads) const override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }

 private:
  NetArchitecture arch_;
  ParameterSet params_;
};

// out = xt_gain * xt + ref_gain * ref + bias, elementwise on a fixed grid.
// The loss is quadratic in its parameters, which makes it a clean target for
// the gradient checker.
class ElementwiseLinearModel : public DifferentiableModel {
 public:
  ElementwiseLinearModel(int channels, int height, int width);

  Tensor forward(const ModelInput& in, ForwardCache& cache) const override;
  void backward(const ForwardCache& cache, const Tensor& dout,
                ParameterSet& grads) const override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }

 private:
  int channels_, height_, width_;
  ParameterSet params_;
};

}  // namespace refocus::flow
