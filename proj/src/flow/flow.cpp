#include "refocus/flow/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace refocus::flow {

FlowSample perturb(const Tensor& x0, const Tensor& eps, double t) {
  if (!x0.same_shape(eps)) throw std::invalid_argument("perturb: x0 and eps shapes differ");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("perturb: t outside [0,1]");
  FlowSample s{x0, eps, t, Tensor(x0.channels, x0.height, x0.width),
               Tensor(x0.channels, x0.height, x0.width)};
  for (std::size_t i = 0; i < x0.size(); ++i) {
    s.v.data[i] = eps.data[i] - x0.data[i];
    // (1 - t) x0 + t eps equals x0 + v t, and is exact at both endpoints.
    s.xt.data[i] = (1.0 - t) * x0.data[i] + t * eps.data[i];
  }
  return s;
}

std::vector<double> condition_vector(const CameraCondition& cond) {
  return {cond.fx, cond.fy, cond.b / kBokehNormalizer};
}

std::vector<double> camera_token(const CameraCondition& cond, std::span<const double> weights,
                                 std::span<const double> bias) {
  if (weights.size() != 3 * bias.size()) {
    throw std::invalid_argument("camera_token: weights must be d_emb x 3");
  }
  const auto c = condition_vector(cond);
  std::vector<double> token(bias.begin(), bias.end());
  for (std::size_t k = 0; k < token.size(); ++k) {
    for (std::size_t j = 0; j < 3; ++j) token[k] += weights[3 * k + j] * c[j];
  }
  return token;
}

std::vector<double> timestep_embedding(double t, int dim) {
  if (dim < 0 || dim % 2 != 0) throw std::invalid_argument("timestep_embedding: dim must be even");
  const int half = dim / 2;
  std::vector<double> emb(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = half > 1 ? std::pow(100.0, static_cast<double>(i) / (half - 1)) : 1.0;
    emb[2 * i] = std::sin(t * freq);
    emb[2 * i + 1] = std::cos(t * freq);
  }
  return emb;
}

Tensor normal_tensor(int channels, int height, int width, std::mt19937_64& rng) {
  Tensor out(channels, height, width);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data) v = normal(rng);
  return out;
}

}  // namespace refocus::flow
