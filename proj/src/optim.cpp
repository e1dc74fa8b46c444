#include "geaet/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace geaet {

double lr_at(int epoch, const CosineSchedule& s) {
  if (epoch < 0 || epoch >= s.total_epochs) {
    throw std::out_of_range("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(s.total_epochs) + ")");
  }
  if (epoch < s.warmup_epochs) return s.base_lr * (epoch + 1) / s.warmup_epochs;
  const double progress = static_cast<double>(epoch - s.warmup_epochs) / (s.total_epochs - s.warmup_epochs);
  return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(const ParamList& params, AdamWState& state, double lr) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
      state.v.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adamw_step: parameter list changed between steps");
  ++state.step;
  const double c1 = 1.0 - std::pow(AdamWState::kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(AdamWState::kBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    Matrix& theta = t.mutable_value();
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    if (t.has_grad()) {
      const Matrix& g = t.grad();
      m = AdamWState::kBeta1 * m + (1.0 - AdamWState::kBeta1) * g;
      v = AdamWState::kBeta2 * v + (1.0 - AdamWState::kBeta2) * g.cwiseProduct(g);
    } else {
      m *= AdamWState::kBeta1;
      v *= AdamWState::kBeta2;
    }
    // Same update as theta -= lr * (adam + decay * theta), with the decay
    // factored out so a pure-decay step is exactly theta * (1 - lr * decay).
    theta.array() = theta.array() * (1.0 - lr * state.weight_decay) -
                    lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + AdamWState::kEpsilon));
  }
}

void zero_grad(const ParamList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace geaet
