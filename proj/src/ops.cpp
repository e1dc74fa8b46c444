#include "geaet/ops.hpp"

#include <cmath>
#include <string>

namespace geaet {

using detail::accumulate;
using detail::record;

Segments Segments::from_sizes(std::span<const Index> sizes) {
  Segments s;
  s.offsets.reserve(sizes.size() + 1);
  for (Index n : sizes) s.offsets.push_back(s.offsets.back() + n);
  return s;
}

namespace {

enum class Broadcast { same, row, scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
}

Matrix expand(const Matrix& b, Index rows, Index cols, Broadcast kind) {
  switch (kind) {
    case Broadcast::same:
      return b;
    case Broadcast::row:
      return b.replicate(rows, 1);
    case Broadcast::scalar:
      return Matrix::Constant(rows, cols, b(0, 0));
  }
  return b;
}

Matrix reduce_to(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::same:
      return g;
    case Broadcast::row:
      return g.colwise().sum();
    case Broadcast::scalar:
      return Matrix::Constant(1, 1, g.sum());
  }
  return g;
}

void check_segments(const Segments& s, Index rows, const char* op) {
  if (s.total() != rows) {
    throw ShapeError(std::string(op) + ": segments cover " + std::to_string(s.total()) +
                     " rows but tensor has " + std::to_string(rows));
  }
}

// In-place row softmax with per-row max subtraction.
void softmax_rows_inplace(Eigen::Ref<Matrix> m) {
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ " + a.shape() + " x " + b.shape());
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  FlopCounter::add(static_cast<std::uint64_t>(a.rows() * a.cols() * b.cols()));
  auto an = a.node(), bn = b.node();
  return record("matmul", std::move(out), {&a, &b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) accumulate(an, g * bn->value.transpose());
    if (bn->requires_grad) accumulate(bn, an->value.transpose() * g);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ " + a.shape() + " x " + b.shape() + "^T");
  }
  Matrix out(a.rows(), b.rows());
  out.noalias() = a.value() * b.value().transpose();
  FlopCounter::add(static_cast<std::uint64_t>(a.rows() * a.cols() * b.rows()));
  auto an = a.node(), bn = b.node();
  return record("matmul_nt", std::move(out), {&a, &b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) accumulate(an, g * bn->value);
    if (bn->requires_grad) accumulate(bn, g.transpose() * an->value);
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  auto an = a.node();
  return record("transpose", std::move(out), {&a},
                [an](const Matrix& g) { accumulate(an, g.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "add");
  Matrix out;
  if (kind == Broadcast::row) {
    out = a.value().rowwise() + b.value().row(0);
  } else {
    out = a.value() + expand(b.value(), a.rows(), a.cols(), kind);
  }
  auto an = a.node(), bn = b.node();
  return record("add", std::move(out), {&a, &b}, [an, bn, kind](const Matrix& g) {
    accumulate(an, g);
    if (bn->requires_grad) accumulate(bn, reduce_to(g, kind));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "sub");
  Matrix out = a.value() - expand(b.value(), a.rows(), a.cols(), kind);
  auto an = a.node(), bn = b.node();
  return record("sub", std::move(out), {&a, &b}, [an, bn, kind](const Matrix& g) {
    accumulate(an, g);
    if (bn->requires_grad) accumulate(bn, -reduce_to(g, kind));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "mul");
  Matrix bx = expand(b.value(), a.rows(), a.cols(), kind);
  Matrix out = a.value().cwiseProduct(bx);
  FlopCounter::add(static_cast<std::uint64_t>(out.size()));
  auto an = a.node(), bn = b.node();
  return record("mul", std::move(out), {&a, &b}, [an, bn, kind, bx = std::move(bx)](const Matrix& g) {
    if (an->requires_grad) accumulate(an, g.cwiseProduct(bx));
    if (bn->requires_grad) accumulate(bn, reduce_to(g.cwiseProduct(an->value), kind));
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  const Broadcast kind = broadcast_kind(a, b, "div");
  Matrix bx = expand(b.value(), a.rows(), a.cols(), kind);
  Matrix out = a.value().cwiseQuotient(bx);
  FlopCounter::add(static_cast<std::uint64_t>(out.size()));
  auto an = a.node(), bn = b.node();
  return record("div", std::move(out), {&a, &b}, [an, bn, kind, bx = std::move(bx)](const Matrix& g) {
    if (an->requires_grad) accumulate(an, g.cwiseQuotient(bx));
    if (bn->requires_grad) {
      Matrix gb = -(g.array() * an->value.array() / bx.array().square()).matrix();
      accumulate(bn, reduce_to(gb, kind));
    }
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  Matrix out = a.value().array() + c;
  auto an = a.node();
  return record("add_scalar", std::move(out), {&a}, [an](const Matrix& g) { accumulate(an, g); });
}

Tensor scale(const Tensor& a, double c) {
  Matrix out = a.value() * c;
  auto an = a.node();
  return record("scale", std::move(out), {&a}, [an, c](const Matrix& g) { accumulate(an, g * c); });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  auto an = a.node();
  return record("relu", std::move(out), {&a}, [an](const Matrix& g) {
    accumulate(an, (an->value.array() > 0.0).select(g, 0.0).matrix());
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  auto an = a.node();
  Matrix y = out;
  return record("sigmoid", std::move(out), {&a}, [an, y = std::move(y)](const Matrix& g) {
    accumulate(an, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Tensor row_softmax(const Tensor& a) {
  Matrix y = a.value();
  softmax_rows_inplace(y);
  auto an = a.node();
  Matrix saved = y;
  return record("row_softmax", std::move(y), {&a}, [an, y = std::move(saved)](const Matrix& g) {
    Vector dots = g.cwiseProduct(y).rowwise().sum();
    accumulate(an, (y.array() * (g.colwise() - dots).array()).matrix());
  });
}

Tensor col_softmax(const Tensor& a) { return segment_col_softmax(a, Segments::single(a.rows())); }

Tensor segment_col_softmax(const Tensor& a, const Segments& segments) {
  check_segments(segments, a.rows(), "segment_col_softmax");
  Matrix y = a.value();
  for (Index s = 0; s < segments.count(); ++s) {
    const Index n = segments.size(s);
    if (n == 0) continue;
    auto block = y.middleRows(segments.begin(s), n);
    const Eigen::RowVectorXd mx = block.colwise().maxCoeff();
    block = (block.rowwise() - mx).array().exp().matrix();
    const Eigen::RowVectorXd total = block.colwise().sum();
    block.array().rowwise() /= total.array();
  }
  auto an = a.node();
  Matrix saved = y;
  return record("segment_col_softmax", std::move(y), {&a},
                [an, y = std::move(saved), segments](const Matrix& g) {
                  Matrix gx(y.rows(), y.cols());
                  for (Index s = 0; s < segments.count(); ++s) {
                    const Index n = segments.size(s);
                    if (n == 0) continue;
                    const Index b = segments.begin(s);
                    auto yb = y.middleRows(b, n);
                    auto gb = g.middleRows(b, n);
                    const Eigen::RowVectorXd dots = gb.cwiseProduct(yb).colwise().sum();
                    gx.middleRows(b, n) = (yb.array() * (gb.rowwise() - dots).array()).matrix();
                  }
                  accumulate(an, std::move(gx));
                });
}

Tensor row_l1_normalize(const Tensor& a, double epsilon) {
  Vector denom = a.value().rowwise().sum().array() + epsilon;
  Matrix out = a.value().array().colwise() / denom.array();
  auto an = a.node();
  return record("row_l1_normalize", std::move(out), {&a}, [an, denom = std::move(denom)](const Matrix& g) {
    // d out_ij / d a_ik = delta_jk / D - a_ij / D^2
    Vector dots = g.cwiseProduct(an->value).rowwise().sum();
    Matrix gx = g.array().colwise() / denom.array();
    gx.colwise() -= (dots.array() / denom.array().square()).matrix();
    accumulate(an, std::move(gx));
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 || beta.cols() != x.cols()) {
    throw ShapeError("layer_norm: gamma/beta must be 1x" + std::to_string(x.cols()) + ", got " + gamma.shape() +
                     " and " + beta.shape());
  }
  const Index d = x.cols();
  Vector mu = x.value().rowwise().mean();
  Matrix centered = x.value().colwise() - mu;
  Vector inv = (centered.array().square().rowwise().sum() / static_cast<double>(d) + epsilon).rsqrt();
  Matrix xhat = centered.array().colwise() * inv.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  FlopCounter::add(static_cast<std::uint64_t>(2 * out.size()));
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return record("layer_norm", std::move(out), {&x, &gamma, &beta},
                [xn, gn, bn, xhat = std::move(xhat), inv = std::move(inv), d](const Matrix& g) {
                  if (gn->requires_grad) accumulate(gn, g.cwiseProduct(xhat).colwise().sum());
                  if (bn->requires_grad) accumulate(bn, g.colwise().sum());
                  if (xn->requires_grad) {
                    Matrix gh = g.array().rowwise() * gn->value.row(0).array();
                    Vector m1 = gh.rowwise().sum() / static_cast<double>(d);
                    Vector m2 = gh.cwiseProduct(xhat).rowwise().sum() / static_cast<double>(d);
                    Matrix gx = gh;
                    gx.colwise() -= m1;
                    gx -= (xhat.array().colwise() * m2.array()).matrix();
                    gx = gx.array().colwise() * inv.array();
                    accumulate(xn, std::move(gx));
                  }
                });
}

Tensor gather_rows(const Tensor& a, std::span<const Index> idx) {
  const Index n = a.rows();
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n) {
      throw IndexError("gather_rows: index " + std::to_string(idx[i]) + " at position " + std::to_string(i) +
                       " out of range for " + std::to_string(n) + " rows");
    }
    out.row(static_cast<Index>(i)) = a.value().row(idx[i]);
  }
  auto an = a.node();
  std::vector<Index> ids(idx.begin(), idx.end());
  return record("gather_rows", std::move(out), {&a}, [an, ids = std::move(ids)](const Matrix& g) {
    if (!an->requires_grad) return;
    Matrix& ga = detail::grad_slot(an);
    for (std::size_t i = 0; i < ids.size(); ++i) ga.row(ids[i]) += g.row(static_cast<Index>(i));
  });
}

Tensor scatter_add_rows(const Tensor& src, std::span<const Index> idx, Index n) {
  if (static_cast<Index>(idx.size()) != src.rows()) {
    throw ShapeError("scatter_add_rows: " + std::to_string(idx.size()) + " indices for " + src.shape());
  }
  Matrix out = Matrix::Zero(n, src.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n) {
      throw IndexError("scatter_add_rows: index " + std::to_string(idx[i]) + " at position " + std::to_string(i) +
                       " out of range for " + std::to_string(n) + " rows");
    }
    out.row(idx[i]) += src.value().row(static_cast<Index>(i));
  }
  FlopCounter::add(static_cast<std::uint64_t>(src.size()));
  auto sn = src.node();
  std::vector<Index> ids(idx.begin(), idx.end());
  return record("scatter_add_rows", std::move(out), {&src}, [sn, ids = std::move(ids)](const Matrix& g) {
    Matrix gs(static_cast<Index>(ids.size()), g.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) gs.row(static_cast<Index>(i)) = g.row(ids[i]);
    accumulate(sn, std::move(gs));
  });
}

Tensor mul_rows(const Tensor& a, std::span<const double> coeff) {
  if (static_cast<Index>(coeff.size()) != a.rows()) {
    throw ShapeError("mul_rows: " + std::to_string(coeff.size()) + " coefficients for " + a.shape());
  }
  Vector c = Eigen::Map<const Vector>(coeff.data(), static_cast<Index>(coeff.size()));
  Matrix out = a.value().array().colwise() * c.array();
  FlopCounter::add(static_cast<std::uint64_t>(out.size()));
  auto an = a.node();
  return record("mul_rows", std::move(out), {&a}, [an, c = std::move(c)](const Matrix& g) {
    accumulate(an, (g.array().colwise() * c.array()).matrix());
  });
}

Tensor propagate(const Tensor& h, std::span<const Index> src, std::span<const Index> dst,
                 std::span<const double> coeff, Index n) {
  if (src.size() != dst.size() || src.size() != coeff.size()) {
    throw ShapeError("propagate: " + std::to_string(src.size()) + " sources, " + std::to_string(dst.size()) +
                     " targets and " + std::to_string(coeff.size()) + " coefficients");
  }
  const Index rows = h.rows();
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k] < 0 || src[k] >= rows || dst[k] < 0 || dst[k] >= n) {
      throw IndexError("propagate: arc " + std::to_string(src[k]) + "->" + std::to_string(dst[k]) + " at position " +
                       std::to_string(k) + " out of range for " + std::to_string(rows) + " -> " + std::to_string(n) +
                       " rows");
    }
  }
  const Matrix& hv = h.value();
  Matrix out = Matrix::Zero(n, h.cols());
  for (std::size_t k = 0; k < src.size(); ++k) out.row(dst[k]) += coeff[k] * hv.row(src[k]);
  FlopCounter::add(static_cast<std::uint64_t>(src.size()) * static_cast<std::uint64_t>(h.cols()));
  auto hn = h.node();
  return record("propagate", std::move(out), {&h},
                [hn, from = std::vector<Index>(src.begin(), src.end()), to = std::vector<Index>(dst.begin(), dst.end()),
                 c = std::vector<double>(coeff.begin(), coeff.end())](const Matrix& g) {
                  if (!hn->requires_grad) return;
                  Matrix& gh = detail::grad_slot(hn);
                  for (std::size_t k = 0; k < from.size(); ++k) gh.row(from[k]) += c[k] * g.row(to[k]);
                });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ " + parts[0].shape() + " vs " + p.shape());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::shared_ptr<TensorNode>> nodes;
  bool needs = false;
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
    nodes.push_back(p.node());
    needs = needs || p.requires_grad();
  }
  return record("concat_cols", std::move(out), needs, [nodes = std::move(nodes)](const Matrix& g) {
    Index off = 0;
    for (const auto& n : nodes) {
      const Index w = n->value.cols();
      if (n->requires_grad) accumulate(n, g.middleCols(off, w));
      off += w;
    }
  });
}

Tensor slice_cols(const Tensor& a, Index from, Index to) {
  if (from < 0 || from >= to || to > a.cols()) {
    throw IndexError("slice_cols: [" + std::to_string(from) + ", " + std::to_string(to) + ") out of bounds for " +
                     a.shape());
  }
  Matrix out = a.value().middleCols(from, to - from);
  auto an = a.node();
  return record("slice_cols", std::move(out), {&a}, [an, from, to](const Matrix& g) {
    if (an->requires_grad) detail::grad_slot(an).middleCols(from, to - from) += g;
  });
}

Tensor sum(const Tensor& a) {
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  auto an = a.node();
  return record("sum", std::move(out), {&a}, [an](const Matrix& g) {
    accumulate(an, Matrix::Constant(an->value.rows(), an->value.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  Matrix out = Matrix::Constant(1, 1, a.value().sum() / n);
  auto an = a.node();
  return record("mean", std::move(out), {&a}, [an, n](const Matrix& g) {
    accumulate(an, Matrix::Constant(an->value.rows(), an->value.cols(), g(0, 0) / n));
  });
}

Tensor segment_mean(const Tensor& x, const Segments& segments) {
  check_segments(segments, x.rows(), "segment_mean");
  Matrix out = Matrix::Zero(segments.count(), x.cols());
  for (Index s = 0; s < segments.count(); ++s) {
    const Index n = segments.size(s);
    if (n > 0) out.row(s) = x.value().middleRows(segments.begin(s), n).colwise().mean();
  }
  auto xn = x.node();
  return record("segment_mean", std::move(out), {&x}, [xn, segments](const Matrix& g) {
    Matrix gx(xn->value.rows(), xn->value.cols());
    for (Index s = 0; s < segments.count(); ++s) {
      const Index n = segments.size(s);
      if (n == 0) continue;
      gx.middleRows(segments.begin(s), n) = (g.row(s) / static_cast<double>(n)).replicate(n, 1);
    }
    accumulate(xn, std::move(gx));
  });
}

Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Segments& segments, double scale,
                         std::vector<Matrix>* probs) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols()) {
    throw ShapeError("segment_attention: incompatible q " + q.shape() + ", k " + k.shape() + ", v " + v.shape());
  }
  check_segments(segments, q.rows(), "segment_attention");
  Matrix out(q.rows(), v.cols());
  std::vector<Matrix> saved(static_cast<std::size_t>(segments.count()));
  std::uint64_t flops = 0;
  for (Index s = 0; s < segments.count(); ++s) {
    const Index n = segments.size(s), b = segments.begin(s);
    if (n == 0) continue;
    Matrix p(n, n);
    p.noalias() = scale * (q.value().middleRows(b, n) * k.value().middleRows(b, n).transpose());
    softmax_rows_inplace(p);
    out.middleRows(b, n).noalias() = p * v.value().middleRows(b, n);
    flops += static_cast<std::uint64_t>(n * n * (q.cols() + v.cols()));
    if (probs) probs->push_back(p);
    saved[static_cast<std::size_t>(s)] = std::move(p);
  }
  FlopCounter::add(flops);
  auto qn = q.node(), kn = k.node(), vn = v.node();
  return record("segment_attention", std::move(out), {&q, &k, &v},
                [qn, kn, vn, segments, scale, saved = std::move(saved)](const Matrix& g) {
                  Matrix gq = Matrix::Zero(qn->value.rows(), qn->value.cols());
                  Matrix gk = Matrix::Zero(kn->value.rows(), kn->value.cols());
                  Matrix gv = Matrix::Zero(vn->value.rows(), vn->value.cols());
                  for (Index s = 0; s < segments.count(); ++s) {
                    const Index n = segments.size(s), b = segments.begin(s);
                    if (n == 0) continue;
                    const Matrix& p = saved[static_cast<std::size_t>(s)];
                    auto gb = g.middleRows(b, n);
                    gv.middleRows(b, n).noalias() = p.transpose() * gb;
                    Matrix gp = gb * vn->value.middleRows(b, n).transpose();
                    Vector dots = gp.cwiseProduct(p).rowwise().sum();
                    Matrix gs = (p.array() * (gp.colwise() - dots).array()).matrix() * scale;
                    gq.middleRows(b, n).noalias() = gs * kn->value.middleRows(b, n);
                    gk.middleRows(b, n).noalias() = gs.transpose() * qn->value.middleRows(b, n);
                  }
                  if (qn->requires_grad) accumulate(qn, std::move(gq));
                  if (kn->requires_grad) accumulate(kn, std::move(gk));
                  if (vn->requires_grad) accumulate(vn, std::move(gv));
                });
}

}  // namespace geaet
