#pragma once

#include <random>
#include <span>
#include <vector>

#include "refocus/dof/dof_sim.hpp"
#include "refocus/tensor.hpp"

namespace refocus::flow {

using dof::CameraCondition;

// Rectified-flow tuple: v = eps - x0 and xt = x0 + v t.
struct FlowSample {
  Tensor x0;
  Tensor eps;
  double t = 0.0;
  Tensor v;
  Tensor xt;
};

// Builds the straight-line perturbation of x0 toward eps at time t.
FlowSample perturb(const Tensor& x0, const Tensor& eps, double t);

// Bokeh levels are divided by this before projection (top of the
// simulation grid), keeping the conditioning triple O(1).
inline constexpr double kBokehNormalizer = 20.0;

// [fx, fy, b / 20].
std::vector<double> condition_vector(const CameraCondition& cond);

// weights (d_emb x 3, row-major) * condition_vector(cond) + bias.
std::vector<double> camera_token(const CameraCondition& cond, std::span<const double> weights,
                                 std::span<const double> bias);

// Sinusoidal embedding of t: [sin(t f_0), cos(t f_0), ...] with dim/2
// geometrically spaced frequencies in [1, 100]. dim must be even.
std::vector<double> timestep_embedding(double t, int dim);

// Unit-normal tensor of the given shape.
Tensor normal_tensor(int channels, int height, int width, std::mt19937_64& rng);

}  // namespace refocus::flow
