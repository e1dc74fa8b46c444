#pragma once

#include <span>

#include "geaet/tensor.hpp"

namespace geaet {

/// Mean over rows of -log softmax(logits)[label]. Throws IndexError for a
/// label outside [0, cols).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Mean absolute error over every entry; subgradient 0 where pred == target.
Tensor l1_loss(const Tensor& pred, const Matrix& target);

/// Fraction of rows whose argmax equals the label. Ties go to the lowest
/// index.
double accuracy(const Matrix& logits, std::span<const int> labels);
double mae(const Matrix& pred, const Matrix& target);

}  // namespace geaet
