#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "geaet/attention.hpp"
#include "geaet/graph.hpp"
#include "geaet/mpnn.hpp"
#include "geaet/posenc.hpp"

namespace geaet {

/// Layout of raw node or edge features the embedding expects.
struct FeatureSchema {
  enum class Kind { none, dense, categorical };
  Kind kind = Kind::none;
  Index width = 0;            // dense columns
  std::vector<Index> vocab;   // categorical: id range per tuple slot

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

const char* to_string(FeatureSchema::Kind kind);
FeatureSchema::Kind feature_kind_from_string(const std::string& s);

/// Smallest schema that accepts `f` (vocab = max id + 1 per slot).
FeatureSchema infer_schema(const Features& f);
/// Elementwise widening of two schemas of the same kind.
FeatureSchema merge_schema(const FeatureSchema& a, const FeatureSchema& b);

enum class HeadKind { node_classify, graph_classify, graph_regress };

const char* to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& s);
HeadKind head_for(TargetKind kind);

struct ModelConfig {
  Index hidden = 32;
  Index layers = 4;
  Index units = 8;        // S
  Index self_heads = 4;
  Index ext_heads = 4;
  MpnnKind mpnn = MpnnKind::gcn;
  bool tlayer = true;
  bool geanet = true;
  UnitToggles unit_toggles;
  bool geanet_reads_mpnn = false;  // GEANet node stream reads X_M instead of X^l
  PosEncConfig pe;
  HeadKind head = HeadKind::graph_classify;
  Index outputs = 2;
  FeatureSchema node_input;
  FeatureSchema edge_input;

  /// Throws std::invalid_argument with the offending field.
  void validate() const;
};

struct EmbeddingLayer {
  FeatureSchema node_schema, edge_schema;
  Tensor node_weight;  // d_alpha x d, or sum(vocab) x d lookup rows
  Tensor node_bias;    // u^0, 1 x d
  Tensor edge_weight;
  Tensor edge_bias;    // v^0
  Tensor pe_weight;    // k x d (T^0), empty when pe is off
  std::vector<Index> node_offsets, edge_offsets;  // first lookup row per slot

  static EmbeddingLayer create(const ModelConfig& config, std::mt19937_64& rng);
  /// X^0 and E^0. `pos_enc` must be n x k when T^0 is present.
  NodeEdge operator()(const Batch& b) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// layernorm(Z + W2 relu(W1 Z)), hidden width 2d.
struct FeedForward {
  Mlp mlp;
  LayerNorm norm;

  static FeedForward create(Index d, std::mt19937_64& rng);
  Tensor operator()(const Tensor& z) const { return norm(add(z, mlp(z))); }
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Attention matrices captured during one forward pass.
struct LayerTrace {
  std::vector<Matrix> gea;                 // [head], rows of the whole batch x S
  std::vector<std::vector<Matrix>> self;   // [head][graph]
};

struct GEAETLayer {
  MpnnKind mpnn_kind = MpnnKind::none;
  GCNLayer gcn;
  GatedGCNLayer gatedgcn;
  GINELayer gine;
  bool use_tlayer = true;
  SelfAttentionLayer attention;
  LayerNorm attention_norm;
  bool use_geanet = true;
  bool geanet_reads_mpnn = false;
  GEANetBlock geanet;
  FeedForward ffn;

  static GEAETLayer create(const ModelConfig& config, std::mt19937_64& rng);
  /// With `edges_read` false the GEANet edge stream is skipped and the MPNN
  /// edge output is passed on in its place.
  NodeEdge operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs, const Segments& node_segments,
                      const Segments& edge_segments, LayerTrace* trace = nullptr, bool edges_read = true) const;
  NodeEdge message_passing(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct PredictionHead {
  HeadKind kind = HeadKind::graph_classify;
  Mlp mlp;

  static PredictionHead create(const ModelConfig& config, std::mt19937_64& rng);
  /// Graph kinds read the target-node row when the batch names one, else
  /// the per-graph mean.
  Tensor operator()(const Tensor& x, const Batch& b) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
};

class GEAETModel {
 public:
  GEAETModel() = default;
  static GEAETModel create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  /// Logits (node rows or one row per graph) or regression outputs. Edge
  /// states that no later MPNN reads do not affect the result and are not
  /// computed unless `compute_unread_edges` is set.
  Tensor forward(const Batch& b, ForwardTrace* trace = nullptr, bool compute_unread_edges = false) const;
  /// Stable, uniquely named list of every trainable tensor in use.
  ParamList parameters() const;
  Index parameter_count() const;

  const EmbeddingLayer& embedding() const { return embedding_; }
  const std::vector<GEAETLayer>& layers() const { return layers_; }
  std::vector<GEAETLayer>& layers() { return layers_; }
  EmbeddingLayer& embedding() { return embedding_; }

 private:
  ModelConfig config_;
  EmbeddingLayer embedding_;
  std::vector<GEAETLayer> layers_;
  PredictionHead head_;
};

/// Stacks per-graph positional encodings into b.pos_enc.
void attach_pos_enc(Batch& b, std::span<const Matrix> per_graph);

}  // namespace geaet
