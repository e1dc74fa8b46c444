#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "geaet/tensor.hpp"

namespace geaet {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "<param index>[r,c]" of the worst coordinate
};

/// Compares reverse-mode gradients of `loss_fn` against central differences
/// over every coordinate of every tensor in `params`. Error per coordinate is
/// |a - n| / max(1, |a|, |n|); the maximum is returned.
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params, double h = 1e-5);

/// Single-input form: f maps x to a scalar.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

}  // namespace geaet
