#pragma once

#include <random>
#include <string>

#include "geaet/graph.hpp"
#include "geaet/nn.hpp"

namespace geaet {

enum class MpnnKind { none, gcn, gatedgcn, gine };

const char* to_string(MpnnKind kind);
MpnnKind mpnn_kind_from_string(const std::string& s);

/// Arc structure of a graph or batch as consumed by the message-passing layers.
struct ArcIndex {
  Index num_nodes = 0;
  std::vector<Index> src;
  std::vector<Index> dst;

  static ArcIndex of(const Graph& g);
  static ArcIndex of(const Batch& b);
  Index num_arcs() const { return static_cast<Index>(src.size()); }
};

struct NodeEdge {
  Tensor x;
  Tensor e;
};

/// relu(D^-1/2 (A+I) D^-1/2 X W + b). Edge features pass through.
struct GCNLayer {
  Linear linear;

  static GCNLayer create(Index d, std::mt19937_64& rng);
  NodeEdge operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Residual gated graph convolution with an edge update.
struct GatedGCNLayer {
  static constexpr double kGateEpsilon = 1e-6;
  Tensor a, b, c, u, v;  // d x d
  LayerNorm node_norm;
  LayerNorm edge_norm;

  static GatedGCNLayer create(Index d, std::mt19937_64& rng);
  NodeEdge operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// mlp((1+eps) x_i + sum_j relu(x_j + e_ij)). Edge features pass through.
struct GINELayer {
  Tensor epsilon;  // 1 x 1, learnable
  Mlp mlp;

  static GINELayer create(Index d, std::mt19937_64& rng);
  NodeEdge operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Symmetric normalization coefficient 1/sqrt((deg_src+1)(deg_dst+1)) per
/// arc, followed by one self-loop coefficient 1/(deg_i+1) per node.
std::vector<double> gcn_coefficients(const ArcIndex& arcs);

}  // namespace geaet
