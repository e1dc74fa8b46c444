#include "geaet/losses.hpp"

#include <cmath>
#include <string>

namespace geaet {

using detail::accumulate;
using detail::record;

namespace {

void check_labels(const Matrix& logits, std::span<const int> labels, const char* op) {
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= logits.cols()) {
      throw IndexError(std::string(op) + ": label " + std::to_string(labels[i]) + " at position " +
                       std::to_string(i) + " outside [0, " + std::to_string(logits.cols()) + ")");
    }
  }
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  check_labels(z, labels, "cross_entropy");
  const Index n = z.rows();
  if (n == 0) throw ShapeError("cross_entropy: no rows");
  Matrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double mx = z.row(i).maxCoeff();
    probs.row(i) = (z.row(i).array() - mx).exp().matrix();
    const double s = probs.row(i).sum();
    probs.row(i) /= s;
    total += std::log(s) + mx - z(i, labels[static_cast<std::size_t>(i)]);
  }
  std::vector<int> lab(labels.begin(), labels.end());
  auto ln = logits.node();
  return record("cross_entropy", Matrix::Constant(1, 1, total / static_cast<double>(n)), {&logits},
                [ln, probs = std::move(probs), lab = std::move(lab)](const Matrix& g) {
                  Matrix d = probs;
                  for (std::size_t i = 0; i < lab.size(); ++i) d(static_cast<Index>(i), lab[i]) -= 1.0;
                  accumulate(ln, d * (g(0, 0) / static_cast<double>(lab.size())));
                });
}

Tensor l1_loss(const Tensor& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("l1_loss: prediction " + pred.shape() + " vs target " + shape_str(target.rows(), target.cols()));
  }
  const double n = static_cast<double>(pred.size());
  Matrix diff = pred.value() - target;
  const double loss = diff.cwiseAbs().sum() / n;
  auto pn = pred.node();
  return record("l1_loss", Matrix::Constant(1, 1, loss), {&pred}, [pn, diff = std::move(diff), n](const Matrix& g) {
    Matrix s = diff.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
    accumulate(pn, s * (g(0, 0) / n));
  });
}

double accuracy(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw ShapeError("accuracy: " + std::to_string(labels.size()) + " labels for " + std::to_string(logits.rows()) +
                     " rows");
  }
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    if (best == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double mae(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mae: shape mismatch");
  if (pred.size() == 0) return 0.0;
  return (pred - target).cwiseAbs().sum() / static_cast<double>(pred.size());
}

}  // namespace geaet
