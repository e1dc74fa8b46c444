#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "geaet/experiments.hpp"
#include "geaet/grad_check.hpp"
#include "geaet/mpnn.hpp"

using namespace geaet;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

Matrix layer_norm_rows(const Matrix& x, const Matrix& gamma, const Matrix& beta) {
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    for (Index j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mu) / std::sqrt(var + 1e-5) * gamma(0, j) + beta(0, j);
  }
  return out;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

struct Instance {
  Graph graph;
  ArcIndex arcs;
  Matrix x, e;
};

Instance random_instance(Index n, Index edges, Index d, std::mt19937_64& rng) {
  Instance in;
  in.graph = random_graph(n, edges, 0, 0, rng);
  in.arcs = ArcIndex::of(in.graph);
  in.x = randn(n, d, rng);
  in.e = randn(in.graph.num_arcs(), d, rng);
  return in;
}

ArcIndex permute_arcs(const ArcIndex& arcs, const std::vector<Index>& perm) {
  std::vector<Index> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  ArcIndex out;
  out.num_nodes = arcs.num_nodes;
  for (Index a = 0; a < arcs.num_arcs(); ++a) {
    out.src.push_back(inverse[static_cast<std::size_t>(arcs.src[static_cast<std::size_t>(a)])]);
    out.dst.push_back(inverse[static_cast<std::size_t>(arcs.dst[static_cast<std::size_t>(a)])]);
  }
  return out;
}

Matrix permute_rows(const Matrix& m, const std::vector<Index>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

TEST(GCN, EdgelessGraphIsDenseLayer) {
  std::mt19937_64 rng(1);
  const GCNLayer l = GCNLayer::create(3, rng);
  const ArcIndex arcs{4, {}, {}};
  const Matrix x = randn(4, 3, rng);
  const Matrix out = l(Tensor(x), Tensor::zeros(0, 3), arcs).x.value();
  const Matrix want = relu((x * l.linear.weight.value()).rowwise() + l.linear.bias.value().row(0));
  EXPECT_LT(max_abs(out - want), 1e-14);
}

TEST(GCN, SingleEdgeAveragesEndpoints) {
  std::mt19937_64 rng(2);
  GCNLayer l = GCNLayer::create(2, rng);
  l.linear.weight.mutable_value().setIdentity();
  l.linear.bias.mutable_value().setConstant(10.0);  // keeps relu inactive
  const ArcIndex arcs{2, {0, 1}, {1, 0}};
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  const Matrix out = l(Tensor(x), Tensor::zeros(2, 2), arcs).x.value();
  EXPECT_LT(max_abs(out.row(0).array() - 10.0 - (x.row(0) + x.row(1)).array() / 2.0), 1e-14);
}

TEST(GCN, MatchesDenseNormalizedAdjacency) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 5; ++t) {
    const Instance in = random_instance(8, 12, 4, rng);
    const GCNLayer l = GCNLayer::create(4, rng);
    Matrix a = Matrix::Identity(8, 8);
    for (Index k = 0; k < in.arcs.num_arcs(); ++k) a(in.arcs.dst[static_cast<std::size_t>(k)], in.arcs.src[static_cast<std::size_t>(k)]) = 1.0;
    const Eigen::VectorXd dinv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
    const Matrix norm = dinv.asDiagonal() * a * dinv.asDiagonal();
    const Matrix want = relu((norm * in.x * l.linear.weight.value()).rowwise() + l.linear.bias.value().row(0));
    const NodeEdge out = l(Tensor(in.x), Tensor(in.e), in.arcs);
    EXPECT_LT(max_abs(out.x.value() - want), 1e-12);
    EXPECT_EQ(out.e.value(), in.e);
  }
}

TEST(GatedGCN, NodeWithoutInArcs) {
  std::mt19937_64 rng(4);
  const GatedGCNLayer l = GatedGCNLayer::create(3, rng);
  const ArcIndex arcs{3, {0}, {1}};
  const Matrix x = randn(3, 3, rng);
  const Matrix out = l(Tensor(x), Tensor(randn(1, 3, rng)), arcs).x.value();
  for (Index i : {0, 2}) {
    const Matrix hi = x.row(i) * l.u.value();
    const Matrix want = x.row(i) + relu(layer_norm_rows(hi, l.node_norm.gamma.value(), l.node_norm.beta.value()));
    EXPECT_LT(max_abs(out.row(i) - want), 1e-12);
  }
}

TEST(GatedGCN, EqualGatesGiveScaledMean) {
  std::mt19937_64 rng(5);
  GatedGCNLayer l = GatedGCNLayer::create(2, rng);
  // No dependence on the sender so every arc into node 0 gets the same gate.
  l.b.mutable_value().setZero();
  const ArcIndex arcs{4, {1, 2, 3}, {0, 0, 0}};
  const Matrix x = randn(4, 2, rng);
  Matrix e(3, 2);
  e.rowwise() = randn(1, 2, rng).row(0);
  const Matrix hat = x.row(0) * l.a.value() + e.row(0) * l.c.value();
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-hat.array()).exp());
  const Matrix vx = x * l.v.value();
  const Eigen::ArrayXXd mean = (vx.row(1) + vx.row(2) + vx.row(3)).array() / 3.0;
  const Matrix agg = (3.0 * s / (3.0 * s + GatedGCNLayer::kGateEpsilon) * mean).matrix();
  const Matrix h = x.row(0) * l.u.value() + agg;
  const Matrix want = x.row(0) + relu(layer_norm_rows(h, l.node_norm.gamma.value(), l.node_norm.beta.value()));
  EXPECT_LT(max_abs(l(Tensor(x), Tensor(e), arcs).x.value().row(0) - want), 1e-12);
}

TEST(GatedGCN, MatchesPerArcLoop) {
  std::mt19937_64 rng(6);
  const Index d = 3;
  const Instance in = random_instance(6, 8, d, rng);
  const GatedGCNLayer l = GatedGCNLayer::create(d, rng);
  const Index m = in.arcs.num_arcs(), n = 6;
  Matrix e_hat(m, d);
  for (Index k = 0; k < m; ++k) {
    const Index i = in.arcs.dst[static_cast<std::size_t>(k)], j = in.arcs.src[static_cast<std::size_t>(k)];
    e_hat.row(k) = in.x.row(i) * l.a.value() + in.x.row(j) * l.b.value() + in.e.row(k) * l.c.value();
  }
  Matrix num = Matrix::Zero(n, d), den = Matrix::Zero(n, d);
  for (Index k = 0; k < m; ++k) {
    const Index i = in.arcs.dst[static_cast<std::size_t>(k)], j = in.arcs.src[static_cast<std::size_t>(k)];
    for (Index c = 0; c < d; ++c) {
      const double g = 1.0 / (1.0 + std::exp(-e_hat(k, c)));
      num(i, c) += g * (in.x.row(j) * l.v.value())(0, c);
      den(i, c) += g;
    }
  }
  const Matrix h = in.x * l.u.value() + num.cwiseQuotient((den.array() + 1e-6).matrix());
  const Matrix want_x = in.x + relu(layer_norm_rows(h, l.node_norm.gamma.value(), l.node_norm.beta.value()));
  const Matrix want_e = in.e + relu(layer_norm_rows(e_hat, l.edge_norm.gamma.value(), l.edge_norm.beta.value()));
  const NodeEdge out = l(Tensor(in.x), Tensor(in.e), in.arcs);
  EXPECT_LT(max_abs(out.x.value() - want_x), 1e-10);
  EXPECT_LT(max_abs(out.e.value() - want_e), 1e-10);
}

TEST(GINE, EdgelessIsMlp) {
  std::mt19937_64 rng(7);
  const GINELayer l = GINELayer::create(3, rng);
  const Matrix x = randn(4, 3, rng);
  const Matrix out = l(Tensor(x), Tensor::zeros(0, 3), ArcIndex{4, {}, {}}).x.value();
  EXPECT_LT(max_abs(out - l.mlp(Tensor(x)).value()), 1e-14);
}

TEST(GINE, CancelledMessage) {
  std::mt19937_64 rng(8);
  GINELayer l = GINELayer::create(3, rng);
  l.epsilon.mutable_value()(0, 0) = 0.3;
  const Matrix x = randn(2, 3, rng);
  const Matrix e = -x.row(1);
  const Matrix out = l(Tensor(x), Tensor(e), ArcIndex{2, {1}, {0}}).x.value();
  EXPECT_LT(max_abs(out.row(0) - l.mlp(Tensor(Matrix(1.3 * x.row(0)))).value()), 1e-14);
}

TEST(GINE, MatchesLoop) {
  std::mt19937_64 rng(9);
  const Instance in = random_instance(7, 10, 4, rng);
  GINELayer l = GINELayer::create(4, rng);
  l.epsilon.mutable_value()(0, 0) = -0.2;
  Matrix agg = 0.8 * in.x;
  for (Index k = 0; k < in.arcs.num_arcs(); ++k) {
    agg.row(in.arcs.dst[static_cast<std::size_t>(k)]) +=
        relu(Matrix(in.x.row(in.arcs.src[static_cast<std::size_t>(k)]) + in.e.row(k)));
  }
  EXPECT_LT(max_abs(l(Tensor(in.x), Tensor(in.e), in.arcs).x.value() - l.mlp(Tensor(agg)).value()), 1e-12);
}

TEST(Mpnn, PermutationEquivariant) {
  std::mt19937_64 rng(10);
  const Instance in = random_instance(9, 14, 4, rng);
  const GCNLayer gcn = GCNLayer::create(4, rng);
  const GatedGCNLayer gated = GatedGCNLayer::create(4, rng);
  const GINELayer gine = GINELayer::create(4, rng);
  std::vector<Index> perm(9);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const ArcIndex parcs = permute_arcs(in.arcs, perm);
  const Tensor x(in.x), px(permute_rows(in.x, perm)), e(in.e);
  EXPECT_LT(max_abs(gcn(px, e, parcs).x.value() - permute_rows(gcn(x, e, in.arcs).x.value(), perm)), 1e-10);
  EXPECT_LT(max_abs(gine(px, e, parcs).x.value() - permute_rows(gine(x, e, in.arcs).x.value(), perm)), 1e-10);
  const NodeEdge a = gated(x, e, in.arcs), b = gated(px, e, parcs);
  EXPECT_LT(max_abs(b.x.value() - permute_rows(a.x.value(), perm)), 1e-10);
  EXPECT_LT(max_abs(b.e.value() - a.e.value()), 1e-10);
}

TEST(Mpnn, OneHopLocality) {
  std::mt19937_64 rng(11);
  const Instance in = random_instance(10, 12, 3, rng);
  const GCNLayer gcn = GCNLayer::create(3, rng);
  const GatedGCNLayer gated = GatedGCNLayer::create(3, rng);
  const GINELayer gine = GINELayer::create(3, rng);
  for (Index i = 0; i < 10; ++i) {
    std::vector<bool> keep(10, false);
    keep[static_cast<std::size_t>(i)] = true;
    for (Index k = 0; k < in.arcs.num_arcs(); ++k)
      if (in.arcs.dst[static_cast<std::size_t>(k)] == i) keep[static_cast<std::size_t>(in.arcs.src[static_cast<std::size_t>(k)])] = true;
    Matrix masked = in.x;
    for (Index j = 0; j < 10; ++j)
      if (!keep[static_cast<std::size_t>(j)]) masked.row(j).setZero();
    const Tensor x(in.x), xm(masked), e(in.e);
    EXPECT_EQ(gcn(x, e, in.arcs).x.value().row(i), gcn(xm, e, in.arcs).x.value().row(i));
    EXPECT_EQ(gated(x, e, in.arcs).x.value().row(i), gated(xm, e, in.arcs).x.value().row(i));
    EXPECT_EQ(gine(x, e, in.arcs).x.value().row(i), gine(xm, e, in.arcs).x.value().row(i));
  }
}

TEST(Mpnn, FlopsGrowLinearlyInArcs) {
  std::mt19937_64 rng(12);
  const GCNLayer gcn = GCNLayer::create(4, rng);
  const GatedGCNLayer gated = GatedGCNLayer::create(4, rng);
  const GINELayer gine = GINELayer::create(4, rng);
  auto increments = [&](auto& layer) {
    std::vector<double> f;
    for (Index edges : {1000, 2000, 4000}) {
      const Instance in = random_instance(400, edges, 4, rng);
      FlopCounter::reset();
      layer(Tensor(in.x), Tensor(in.e), in.arcs);
      f.push_back(static_cast<double>(FlopCounter::multiply_adds()));
    }
    // Node-side work is fixed at n = 400, so the arc-side part must double.
    return (f[2] - f[1]) / (f[1] - f[0]);
  };
  EXPECT_NEAR(increments(gcn), 2.0, 1e-9);
  EXPECT_NEAR(increments(gated), 2.0, 1e-9);
  EXPECT_NEAR(increments(gine), 2.0, 1e-9);
}

TEST(Mpnn, GradCheck) {
  std::mt19937_64 rng(13);
  const Instance in = random_instance(6, 7, 3, rng);
  auto check = [&](auto layer, const char* name) {
    ParamList named;
    layer.collect(named, name);
    std::vector<Tensor> params{Tensor(in.x, true), Tensor(in.e, true)};
    for (auto& p : named) params.push_back(p.tensor.set_requires_grad(true));
    const Tensor rx(randn(6, 3, rng)), re(randn(in.arcs.num_arcs(), 3, rng));
    auto loss = [&] {
      const NodeEdge o = layer(params[0], params[1], in.arcs);
      return add(sum(mul(o.x, rx)), sum(mul(o.e, re)));
    };
    EXPECT_LT(grad_check(loss, params).max_rel_err, 1e-4) << name;
  };
  check(GCNLayer::create(3, rng), "gcn");
  check(GatedGCNLayer::create(3, rng), "gatedgcn");
  check(GINELayer::create(3, rng), "gine");
}

TEST(Mpnn, KindNames) {
  for (MpnnKind k : {MpnnKind::none, MpnnKind::gcn, MpnnKind::gatedgcn, MpnnKind::gine})
    EXPECT_EQ(mpnn_kind_from_string(to_string(k)), k);
  EXPECT_THROW(mpnn_kind_from_string("gat"), std::invalid_argument);
}
