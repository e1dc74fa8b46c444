#pragma once

#include <span>
#include <vector>

#include "geaet/tensor.hpp"

namespace geaet {

/// Contiguous row blocks of a batched tensor, one per graph.
/// `offsets` has count()+1 entries starting at 0.
struct Segments {
  std::vector<Index> offsets{0};

  static Segments single(Index rows) { return Segments{{0, rows}}; }
  static Segments from_sizes(std::span<const Index> sizes);

  Index count() const { return static_cast<Index>(offsets.size()) - 1; }
  Index total() const { return offsets.back(); }
  Index begin(Index g) const { return offsets[g]; }
  Index end(Index g) const { return offsets[g + 1]; }
  Index size(Index g) const { return offsets[g + 1] - offsets[g]; }
};

// Products. Both count rows*inner*cols multiply-adds.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor transpose(const Tensor& a);

// Pointwise. `b` may match `a`, be a 1 x cols row, or a 1x1 scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

// Normalizations.
Tensor row_softmax(const Tensor& a);
Tensor col_softmax(const Tensor& a);
Tensor segment_col_softmax(const Tensor& a, const Segments& segments);
Tensor row_l1_normalize(const Tensor& a, double epsilon);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon = 1e-5);

// Row routing. scatter_add accumulates in ascending source-row order.
Tensor gather_rows(const Tensor& a, std::span<const Index> idx);
Tensor scatter_add_rows(const Tensor& src, std::span<const Index> idx, Index n);
Tensor mul_rows(const Tensor& a, std::span<const double> coeff);  // row i scaled by coeff[i]
/// out[dst[k]] += coeff[k] * h[src[k]] over k in order; the fused form of
/// scatter_add_rows(mul_rows(gather_rows(h, src), coeff), dst, n).
Tensor propagate(const Tensor& h, std::span<const Index> src, std::span<const Index> dst,
                 std::span<const double> coeff, Index n);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, Index from, Index to);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor segment_mean(const Tensor& x, const Segments& segments);

/// Scaled dot-product attention confined to each segment: rows of segment g
/// attend only to rows of segment g. When `probs` is non-null the per-segment
/// attention matrices are appended to it.
Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Segments& segments,
                         double scale, std::vector<Matrix>* probs = nullptr);

}  // namespace geaet
