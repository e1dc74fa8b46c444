#pragma once

#include <cstdint>
#include <vector>

#include "geaet/nn.hpp"

namespace geaet {

struct CosineSchedule {
  double base_lr = 1e-3;
  int warmup_epochs = 5;
  int total_epochs = 100;
};

/// Linear warmup (epoch+1)/warmup, then cosine decay towards 0.
/// Throws std::out_of_range outside [0, total_epochs).
double lr_at(int epoch, const CosineSchedule& sched);

struct AdamWState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step = 0;
  std::vector<Matrix> m, v;
};

/// One decoupled-decay Adam update. Parameters without a gradient are
/// treated as having a zero gradient.
void adamw_step(const ParamList& params, AdamWState& state, double lr);

void zero_grad(const ParamList& params);

}  // namespace geaet
