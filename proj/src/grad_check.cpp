#include "geaet/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace geaet {

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params, double h) {
  std::vector<bool> previous;
  for (auto& p : params) {
    previous.push_back(p.requires_grad());
    p.set_requires_grad(true);
    p.zero_grad();
  }
  Tape::current().clear();
  Tensor loss = loss_fn();
  backward(loss);

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Matrix analytic = p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
    Matrix& value = p.mutable_value();
    for (Index r = 0; r < p.rows(); ++r) {
      for (Index c = 0; c < p.cols(); ++c) {
        const double saved = value(r, c);
        value(r, c) = saved + h;
        const double up = loss_fn().item();
        value(r, c) = saved - h;
        const double down = loss_fn().item();
        value(r, c) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic(r, c);
        const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        if (err > result.max_rel_err || !std::isfinite(err)) {
          result.max_rel_err = std::isfinite(err) ? err : INFINITY;
          result.worst = std::to_string(i) + "[" + std::to_string(r) + "," + std::to_string(c) + "]";
        }
      }
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].set_requires_grad(previous[i]);
  }
  return result;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor probe(x.value(), true);
  std::vector<Tensor> params{probe};
  return grad_check([&] { return f(probe); }, params, h).max_rel_err;
}

}  // namespace geaet
