#pragma once

#include <random>
#include <string>
#include <vector>

#include "geaet/ops.hpp"

namespace geaet {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

// Initializers. Weight matrices act on row vectors: y = x W.
Tensor glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng);
Tensor normal_init(Index rows, Index cols, double stddev, std::mt19937_64& rng);
Tensor identity_plus_noise(Index d, double stddev, std::mt19937_64& rng);

struct Linear {
  Tensor weight;
  Tensor bias;  // 1 x out, or empty when bias is off

  static Linear create(Index in, Index out, std::mt19937_64& rng, bool with_bias = true);
  bool has_bias() const { return bias.size() > 0; }
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double epsilon = 1e-5;

  static LayerNorm create(Index d);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, epsilon); }
  void collect(ParamList& out, const std::string& prefix) const;
};

/// x -> second(relu(first(x)))
struct Mlp {
  Linear first;
  Linear second;

  static Mlp create(Index in, Index hidden, Index out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const { return second(relu(first(x))); }
  void collect(ParamList& out, const std::string& prefix) const;
};

}  // namespace geaet
