#include "geaet/nn.hpp"

#include <cmath>

namespace geaet {

Tensor glorot_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return Tensor(std::move(w), true);
}

Tensor normal_init(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix w(rows, cols);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return Tensor(std::move(w), true);
}

Tensor identity_plus_noise(Index d, double stddev, std::mt19937_64& rng) {
  Tensor t = normal_init(d, d, stddev, rng);
  t.mutable_value().diagonal().array() += 1.0;
  return t;
}

Linear Linear::create(Index in, Index out, std::mt19937_64& rng, bool with_bias) {
  Linear l;
  l.weight = glorot_uniform(in, out, rng);
  l.bias = with_bias ? Tensor::zeros(1, out, true) : Tensor(Matrix(0, 0));
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return has_bias() ? add(y, bias) : y;
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  if (has_bias()) out.push_back({prefix + ".bias", bias});
}

LayerNorm LayerNorm::create(Index d) {
  LayerNorm n;
  n.gamma = Tensor::constant(1, d, 1.0, true);
  n.beta = Tensor::zeros(1, d, true);
  return n;
}

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Mlp Mlp::create(Index in, Index hidden, Index out, std::mt19937_64& rng) {
  Mlp m;
  m.first = Linear::create(in, hidden, rng);
  m.second = Linear::create(hidden, out, rng);
  return m;
}

void Mlp::collect(ParamList& out, const std::string& prefix) const {
  first.collect(out, prefix + ".0");
  second.collect(out, prefix + ".1");
}

}  // namespace geaet
