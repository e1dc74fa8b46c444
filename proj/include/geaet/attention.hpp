#pragma once

#include <random>
#include <vector>

#include "geaet/nn.hpp"
#include "geaet/ops.hpp"

namespace geaet {

inline constexpr double kRowNormEpsilon = 1e-12;

struct UnitToggles {
  bool node = true;    // external node key/value units
  bool edge = true;    // external edge key/value units
  bool shared = true;  // shared d x d unit; identity when off
  friend bool operator==(const UnitToggles&, const UnitToggles&) = default;
};

/// Learnable memories shared by every input graph.
struct ExternalUnits {
  Tensor shared;      // d x d
  Tensor node_key;    // S x d
  Tensor node_value;  // S x d
  Tensor edge_key;    // S x d
  Tensor edge_value;  // S x d
  UnitToggles toggles;

  static ExternalUnits create(Index d, Index unit_count, std::mt19937_64& rng, UnitToggles toggles = {});
  Index dim() const { return node_key.cols(); }
  Index unit_count() const { return node_key.rows(); }
  void collect(ParamList& out, const std::string& prefix) const;
};

enum class Stream { node, edge };

/// Column softmax within each segment, then every row divided by its sum
/// plus `epsilon`.
Tensor double_normalize(const Tensor& scores, const Segments& segments, double epsilon = kRowNormEpsilon);

/// Single-head external attention: Norm((X U_s) U_k^T) U_v. The attention
/// matrix is copied to `attention` when given.
Tensor gea_forward(const Tensor& x, const ExternalUnits& units, Stream which, const Segments& segments,
                   Matrix* attention = nullptr);

/// Heads share the units: head h reads column block h of X U_s, U_k and U_v.
/// Per-head outputs are concatenated and projected by `out_proj`.
Tensor multi_head_gea(const Tensor& x, const ExternalUnits& units, Stream which, Index heads, const Tensor& out_proj,
                      const Segments& segments, std::vector<Matrix>* head_attention = nullptr);

struct GEANetBlock {
  ExternalUnits units;
  Index heads = 1;
  Tensor node_out;  // d x d
  Tensor edge_out;  // d x d

  static GEANetBlock create(Index d, Index unit_count, Index heads, std::mt19937_64& rng, UnitToggles toggles = {});
  void collect(ParamList& out, const std::string& prefix) const;
};

struct StreamPair {
  Tensor x;
  Tensor e;
};

/// Residual external attention on both streams; a disabled stream passes its
/// input through untouched.
StreamPair geanet(const Tensor& x, const Tensor& e, const GEANetBlock& block, const Segments& node_segments,
                  const Segments& edge_segments, std::vector<Matrix>* node_attention = nullptr);

struct SelfAttentionLayer {
  Tensor w_query, w_key, w_value;  // d x d
  Tensor w_out;                    // d x d
  Index heads = 1;

  static SelfAttentionLayer create(Index d, Index heads, std::mt19937_64& rng);
  Index head_dim() const { return w_query.cols() / heads; }
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Multi-head softmax attention restricted to each graph segment.
/// `attention`, when given, receives [head][segment] probability matrices.
Tensor self_attention(const Tensor& x, const SelfAttentionLayer& layer, const Segments& segments,
                      std::vector<std::vector<Matrix>>* attention = nullptr);

}  // namespace geaet
