#include "geaet/mpnn.hpp"

#include <cmath>

namespace geaet {

const char* to_string(MpnnKind kind) {
  switch (kind) {
    case MpnnKind::none: return "none";
    case MpnnKind::gcn: return "gcn";
    case MpnnKind::gatedgcn: return "gatedgcn";
    case MpnnKind::gine: return "gine";
  }
  return "?";
}

MpnnKind mpnn_kind_from_string(const std::string& s) {
  if (s == "none") return MpnnKind::none;
  if (s == "gcn") return MpnnKind::gcn;
  if (s == "gatedgcn") return MpnnKind::gatedgcn;
  if (s == "gine") return MpnnKind::gine;
  throw std::invalid_argument("unknown mpnn kind '" + s + "' (expected none, gcn, gatedgcn or gine)");
}

ArcIndex ArcIndex::of(const Graph& g) {
  ArcIndex a;
  a.num_nodes = g.num_nodes;
  a.src.reserve(g.edges.size());
  a.dst.reserve(g.edges.size());
  for (const Arc& arc : g.edges) {
    a.src.push_back(arc.src);
    a.dst.push_back(arc.dst);
  }
  return a;
}

ArcIndex ArcIndex::of(const Batch& b) { return ArcIndex{b.num_nodes, b.src, b.dst}; }

std::vector<double> gcn_coefficients(const ArcIndex& arcs) {
  std::vector<double> deg(static_cast<std::size_t>(arcs.num_nodes), 1.0);
  for (Index d : arcs.dst) deg[static_cast<std::size_t>(d)] += 1.0;
  std::vector<double> coeff;
  coeff.reserve(static_cast<std::size_t>(arcs.num_arcs() + arcs.num_nodes));
  for (Index k = 0; k < arcs.num_arcs(); ++k) {
    coeff.push_back(1.0 / std::sqrt(deg[static_cast<std::size_t>(arcs.src[k])] *
                                    deg[static_cast<std::size_t>(arcs.dst[k])]));
  }
  for (double d : deg) coeff.push_back(1.0 / d);
  return coeff;
}

GCNLayer GCNLayer::create(Index d, std::mt19937_64& rng) { return GCNLayer{Linear::create(d, d, rng)}; }

NodeEdge GCNLayer::operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const {
  // Transform first so messages are d wide regardless of the input width.
  Tensor h = matmul(x, linear.weight);
  const std::vector<double> coeff = gcn_coefficients(arcs);
  std::vector<Index> from(arcs.src);
  std::vector<Index> to(arcs.dst);
  for (Index i = 0; i < arcs.num_nodes; ++i) {
    from.push_back(i);
    to.push_back(i);
  }
  Tensor agg = propagate(h, from, to, coeff, arcs.num_nodes);
  return {relu(add(agg, linear.bias)), e};
}

void GCNLayer::collect(ParamList& out, const std::string& prefix) const { linear.collect(out, prefix); }

GatedGCNLayer GatedGCNLayer::create(Index d, std::mt19937_64& rng) {
  GatedGCNLayer l;
  l.a = glorot_uniform(d, d, rng);
  l.b = glorot_uniform(d, d, rng);
  l.c = glorot_uniform(d, d, rng);
  l.u = glorot_uniform(d, d, rng);
  l.v = glorot_uniform(d, d, rng);
  l.node_norm = LayerNorm::create(d);
  l.edge_norm = LayerNorm::create(d);
  return l;
}

NodeEdge GatedGCNLayer::operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const {
  const Index n = arcs.num_nodes;
  Tensor ax = matmul(x, a);
  Tensor bx = matmul(x, b);
  Tensor vx = matmul(x, v);
  // Arc src -> dst carries the message from j = src into i = dst.
  Tensor e_hat = add(add(gather_rows(ax, arcs.dst), gather_rows(bx, arcs.src)), matmul(e, c));
  Tensor e_out = add(e, relu(edge_norm(e_hat)));
  Tensor gate = sigmoid(e_hat);
  Tensor num = scatter_add_rows(mul(gate, gather_rows(vx, arcs.src)), arcs.dst, n);
  Tensor den = add_scalar(scatter_add_rows(gate, arcs.dst, n), kGateEpsilon);
  Tensor h = add(matmul(x, u), div(num, den));
  Tensor x_out = add(x, relu(node_norm(h)));
  return {x_out, e_out};
}

void GatedGCNLayer::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".A", a});
  out.push_back({prefix + ".B", b});
  out.push_back({prefix + ".C", c});
  out.push_back({prefix + ".U", u});
  out.push_back({prefix + ".V", v});
  node_norm.collect(out, prefix + ".node_norm");
  edge_norm.collect(out, prefix + ".edge_norm");
}

GINELayer GINELayer::create(Index d, std::mt19937_64& rng) {
  GINELayer l;
  l.epsilon = Tensor::zeros(1, 1, true);
  l.mlp = Mlp::create(d, d, d, rng);
  return l;
}

NodeEdge GINELayer::operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const {
  Tensor msg = relu(add(gather_rows(x, arcs.src), e));
  Tensor agg = scatter_add_rows(msg, arcs.dst, arcs.num_nodes);
  Tensor self = mul(x, add_scalar(epsilon, 1.0));
  return {mlp(add(self, agg)), e};
}

void GINELayer::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".eps", epsilon});
  mlp.collect(out, prefix + ".mlp");
}

}  // namespace geaet
