#include "geaet/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace geaet {

const char* to_string(FeatureSchema::Kind kind) {
  switch (kind) {
    case FeatureSchema::Kind::none: return "none";
    case FeatureSchema::Kind::dense: return "dense";
    case FeatureSchema::Kind::categorical: return "categorical";
  }
  return "?";
}

FeatureSchema::Kind feature_kind_from_string(const std::string& s) {
  if (s == "none") return FeatureSchema::Kind::none;
  if (s == "dense") return FeatureSchema::Kind::dense;
  if (s == "categorical") return FeatureSchema::Kind::categorical;
  throw std::invalid_argument("unknown feature kind '" + s + "'");
}

FeatureSchema infer_schema(const Features& f) {
  FeatureSchema s;
  if (const auto* m = std::get_if<Matrix>(&f)) {
    s.kind = FeatureSchema::Kind::dense;
    s.width = m->cols();
  } else if (const auto* c = std::get_if<Categorical>(&f)) {
    s.kind = FeatureSchema::Kind::categorical;
    for (const auto& row : c->ids) {
      if (s.vocab.size() < row.size()) s.vocab.resize(row.size(), 0);
      for (std::size_t k = 0; k < row.size(); ++k) s.vocab[k] = std::max<Index>(s.vocab[k], row[k] + 1);
    }
    s.width = static_cast<Index>(s.vocab.size());
  }
  return s;
}

FeatureSchema merge_schema(const FeatureSchema& a, const FeatureSchema& b) {
  if (a.kind == FeatureSchema::Kind::none) return b;
  if (b.kind == FeatureSchema::Kind::none) return a;
  if (a.kind != b.kind || a.width != b.width) {
    throw SchemaError(std::string("feature schemas differ: ") + to_string(a.kind) + " vs " + to_string(b.kind));
  }
  FeatureSchema out = a;
  for (std::size_t k = 0; k < out.vocab.size(); ++k) out.vocab[k] = std::max(a.vocab[k], b.vocab[k]);
  return out;
}

const char* to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::node_classify: return "node_classify";
    case HeadKind::graph_classify: return "graph_classify";
    case HeadKind::graph_regress: return "graph_regress";
  }
  return "?";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "node_classify") return HeadKind::node_classify;
  if (s == "graph_classify") return HeadKind::graph_classify;
  if (s == "graph_regress") return HeadKind::graph_regress;
  throw std::invalid_argument("unknown head kind '" + s + "'");
}

HeadKind head_for(TargetKind kind) {
  switch (kind) {
    case TargetKind::node: return HeadKind::node_classify;
    case TargetKind::graph_class: return HeadKind::graph_classify;
    case TargetKind::graph_reg: return HeadKind::graph_regress;
  }
  return HeadKind::graph_classify;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("model." + field + ": " + why);
  };
  if (hidden < 1) fail("hidden", "must be positive");
  if (layers < 0) fail("layers", "must be non-negative");
  if (units < 1) fail("units", "must be positive");
  if (self_heads < 1 || hidden % self_heads != 0) fail("self_heads", "must divide hidden");
  if (ext_heads < 1 || hidden % ext_heads != 0) fail("ext_heads", "must divide hidden");
  if (outputs < 1) fail("outputs", "must be positive");
  if (layers > 0 && mpnn == MpnnKind::none && !tlayer && !geanet) {
    fail("mpnn", "at least one of mpnn, tlayer and geanet must be enabled");
  }
  if (pe.kind != PosEncKind::none && pe.k < 1) fail("pe.k", "must be at least 1");
  if (node_input.kind == FeatureSchema::Kind::dense && node_input.width < 1) fail("node_input.width", "empty");
  if (edge_input.kind == FeatureSchema::Kind::dense && edge_input.width < 1) fail("edge_input.width", "empty");
}

namespace {

std::vector<Index> slot_offsets(const FeatureSchema& s) {
  std::vector<Index> off(s.vocab.size(), 0);
  for (std::size_t k = 1; k < off.size(); ++k) off[k] = off[k - 1] + s.vocab[k - 1];
  return off;
}

Index input_rows(const FeatureSchema& s) {
  switch (s.kind) {
    case FeatureSchema::Kind::none: return 0;
    case FeatureSchema::Kind::dense: return s.width;
    case FeatureSchema::Kind::categorical: return std::accumulate(s.vocab.begin(), s.vocab.end(), Index{0});
  }
  return 0;
}

Tensor make_input_weight(const FeatureSchema& s, Index d, std::mt19937_64& rng) {
  const Index rows = input_rows(s);
  if (rows == 0) return Tensor();
  if (s.kind == FeatureSchema::Kind::dense) return glorot_uniform(rows, d, rng);
  // Lookup rows of a one-hot projection.
  return normal_init(rows, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
}

Tensor embed_features(const Features& f, Index rows, const FeatureSchema& schema, const std::vector<Index>& offsets,
                      const Tensor& weight, const Tensor& bias, const char* what) {
  const Index d = bias.cols();
  switch (schema.kind) {
    case FeatureSchema::Kind::none:
      if (!std::holds_alternative<std::monostate>(f)) {
        throw SchemaError(std::string(what) + " features present but the model expects none");
      }
      return add(Tensor::zeros(rows, d), bias);
    case FeatureSchema::Kind::dense: {
      const auto* m = std::get_if<Matrix>(&f);
      if (!m || m->cols() != schema.width) {
        throw SchemaError(std::string(what) + " features must be dense with " + std::to_string(schema.width) +
                          " columns");
      }
      return add(matmul(Tensor(*m), weight), bias);
    }
    case FeatureSchema::Kind::categorical: {
      const auto* c = std::get_if<Categorical>(&f);
      if (!c) throw SchemaError(std::string(what) + " features must be categorical");
      const std::size_t slots = schema.vocab.size();
      std::vector<Index> lookup, target;
      lookup.reserve(c->ids.size() * slots);
      target.reserve(c->ids.size() * slots);
      for (std::size_t r = 0; r < c->ids.size(); ++r) {
        const auto& row = c->ids[r];
        if (row.size() != slots) {
          throw SchemaError(std::string(what) + " row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                            " ids, expected " + std::to_string(slots));
        }
        for (std::size_t k = 0; k < slots; ++k) {
          if (row[k] < 0 || row[k] >= schema.vocab[k]) {
            throw SchemaError(std::string(what) + " row " + std::to_string(r) + " slot " + std::to_string(k) +
                              ": id " + std::to_string(row[k]) + " outside vocabulary of " +
                              std::to_string(schema.vocab[k]));
          }
          lookup.push_back(offsets[k] + row[k]);
          target.push_back(static_cast<Index>(r));
        }
      }
      return add(scatter_add_rows(gather_rows(weight, lookup), target, rows), bias);
    }
  }
  return Tensor();
}

}  // namespace

EmbeddingLayer EmbeddingLayer::create(const ModelConfig& config, std::mt19937_64& rng) {
  const Index d = config.hidden;
  EmbeddingLayer e;
  e.node_schema = config.node_input;
  e.edge_schema = config.edge_input;
  e.node_offsets = slot_offsets(e.node_schema);
  e.edge_offsets = slot_offsets(e.edge_schema);
  e.node_weight = make_input_weight(e.node_schema, d, rng);
  e.edge_weight = make_input_weight(e.edge_schema, d, rng);
  e.node_bias = Tensor::zeros(1, d, true);
  e.edge_bias = Tensor::zeros(1, d, true);
  if (config.pe.kind != PosEncKind::none) e.pe_weight = glorot_uniform(config.pe.k, d, rng);
  return e;
}

NodeEdge EmbeddingLayer::operator()(const Batch& b) const {
  Tensor x = embed_features(b.node_features, b.num_nodes, node_schema, node_offsets, node_weight, node_bias, "node");
  Tensor e = embed_features(b.edge_features, b.num_arcs(), edge_schema, edge_offsets, edge_weight, edge_bias, "edge");
  if (pe_weight.size() > 0) {
    if (!b.pos_enc || b.pos_enc->rows() != b.num_nodes || b.pos_enc->cols() != pe_weight.rows()) {
      throw SchemaError("positional encoding missing or not " + shape_str(b.num_nodes, pe_weight.rows()));
    }
    x = add(x, matmul(Tensor(*b.pos_enc), pe_weight));
  }
  return {x, e};
}

void EmbeddingLayer::collect(ParamList& out, const std::string& prefix) const {
  if (node_weight.size() > 0) out.push_back({prefix + ".node_weight", node_weight});
  out.push_back({prefix + ".node_bias", node_bias});
  if (edge_weight.size() > 0) out.push_back({prefix + ".edge_weight", edge_weight});
  out.push_back({prefix + ".edge_bias", edge_bias});
  if (pe_weight.size() > 0) out.push_back({prefix + ".pe_weight", pe_weight});
}

FeedForward FeedForward::create(Index d, std::mt19937_64& rng) {
  return FeedForward{Mlp::create(d, 2 * d, d, rng), LayerNorm::create(d)};
}

void FeedForward::collect(ParamList& out, const std::string& prefix) const {
  mlp.collect(out, prefix + ".mlp");
  norm.collect(out, prefix + ".norm");
}

GEAETLayer GEAETLayer::create(const ModelConfig& config, std::mt19937_64& rng) {
  const Index d = config.hidden;
  GEAETLayer l;
  l.mpnn_kind = config.mpnn;
  switch (config.mpnn) {
    case MpnnKind::none: break;
    case MpnnKind::gcn: l.gcn = GCNLayer::create(d, rng); break;
    case MpnnKind::gatedgcn: l.gatedgcn = GatedGCNLayer::create(d, rng); break;
    case MpnnKind::gine: l.gine = GINELayer::create(d, rng); break;
  }
  // Both optional blocks are always initialized so that toggling one does not
  // shift the random stream of the others.
  l.use_tlayer = config.tlayer;
  l.attention = SelfAttentionLayer::create(d, config.self_heads, rng);
  l.attention_norm = LayerNorm::create(d);
  l.use_geanet = config.geanet;
  l.geanet_reads_mpnn = config.geanet_reads_mpnn;
  l.geanet = GEANetBlock::create(d, config.units, config.ext_heads, rng, config.unit_toggles);
  l.ffn = FeedForward::create(d, rng);
  return l;
}

NodeEdge GEAETLayer::message_passing(const Tensor& x, const Tensor& e, const ArcIndex& arcs) const {
  switch (mpnn_kind) {
    case MpnnKind::none: return {x, e};
    case MpnnKind::gcn: return gcn(x, e, arcs);
    case MpnnKind::gatedgcn: return gatedgcn(x, e, arcs);
    case MpnnKind::gine: return gine(x, e, arcs);
  }
  return {x, e};
}

NodeEdge GEAETLayer::operator()(const Tensor& x, const Tensor& e, const ArcIndex& arcs,
                                const Segments& node_segments, const Segments& edge_segments,
                                LayerTrace* trace, bool edges_read) const {
  NodeEdge m = message_passing(x, e, arcs);
  Tensor z = m.x;
  Tensor e_next = m.e;
  if (use_tlayer) {
    std::vector<std::vector<Matrix>>* probs = trace ? &trace->self : nullptr;
    z = add(z, attention_norm(add(x, self_attention(x, attention, node_segments, probs))));
  }
  if (use_geanet) {
    std::vector<Matrix>* gea = trace ? &trace->gea : nullptr;
    const Tensor& e_in = edges_read ? m.e : Tensor::zeros(0, m.e.cols());
    StreamPair g = geaet::geanet(geanet_reads_mpnn ? m.x : x, e_in, geanet, node_segments, edge_segments, gea);
    z = add(z, g.x);
    if (edges_read) e_next = g.e;
  }
  return {ffn(z), e_next};
}

void GEAETLayer::collect(ParamList& out, const std::string& prefix) const {
  switch (mpnn_kind) {
    case MpnnKind::none: break;
    case MpnnKind::gcn: gcn.collect(out, prefix + ".gcn"); break;
    case MpnnKind::gatedgcn: gatedgcn.collect(out, prefix + ".gatedgcn"); break;
    case MpnnKind::gine: gine.collect(out, prefix + ".gine"); break;
  }
  if (use_tlayer) {
    attention.collect(out, prefix + ".attention");
    attention_norm.collect(out, prefix + ".attention_norm");
  }
  if (use_geanet) geanet.collect(out, prefix + ".geanet");
  ffn.collect(out, prefix + ".ffn");
}

PredictionHead PredictionHead::create(const ModelConfig& config, std::mt19937_64& rng) {
  return PredictionHead{config.head, Mlp::create(config.hidden, config.hidden, config.outputs, rng)};
}

Tensor PredictionHead::operator()(const Tensor& x, const Batch& b) const {
  if (kind == HeadKind::node_classify) {
    if (b.target_kind != TargetKind::node) throw SchemaError("node head on a graph-level batch");
    return mlp(x);
  }
  if (b.target_kind == TargetKind::node) throw SchemaError("graph head on a node-level batch");
  if (!b.target_nodes.empty()) return mlp(gather_rows(x, b.target_nodes));
  return mlp(segment_mean(x, b.node_segments));
}

void PredictionHead::collect(ParamList& out, const std::string& prefix) const { mlp.collect(out, prefix + ".mlp"); }

GEAETModel GEAETModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  GEAETModel m;
  m.config_ = config;
  m.embedding_ = EmbeddingLayer::create(config, rng);
  for (Index l = 0; l < config.layers; ++l) m.layers_.push_back(GEAETLayer::create(config, rng));
  m.head_ = PredictionHead::create(config, rng);
  return m;
}

Tensor GEAETModel::forward(const Batch& b, ForwardTrace* trace, bool compute_unread_edges) const {
  NodeEdge h = embedding_(b);
  const ArcIndex arcs = ArcIndex::of(b);
  if (trace) trace->layers.assign(layers_.size(), LayerTrace{});
  // read_later[l]: some layer after l runs an MPNN that reads edge features.
  std::vector<bool> read_later(layers_.size(), compute_unread_edges);
  for (std::size_t l = layers_.size(); l-- > 1;) {
    const MpnnKind k = layers_[l].mpnn_kind;
    read_later[l - 1] = read_later[l - 1] || read_later[l] || k == MpnnKind::gatedgcn || k == MpnnKind::gine;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l](h.x, h.e, arcs, b.node_segments, b.edge_segments, trace ? &trace->layers[l] : nullptr,
                   read_later[l]);
  }
  return head_(h.x, b);
}

ParamList GEAETModel::parameters() const {
  ParamList out;
  embedding_.collect(out, "embedding");
  for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].collect(out, "layers." + std::to_string(l));
  head_.collect(out, "head");
  return out;
}

Index GEAETModel::parameter_count() const {
  Index n = 0;
  for (const auto& p : parameters()) n += p.tensor.size();
  return n;
}

void attach_pos_enc(Batch& b, std::span<const Matrix> per_graph) {
  if (static_cast<Index>(per_graph.size()) != b.num_graphs()) {
    throw ShapeError("attach_pos_enc: " + std::to_string(per_graph.size()) + " encodings for " +
                     std::to_string(b.num_graphs()) + " graphs");
  }
  const Index k = per_graph.empty() ? 0 : per_graph.front().cols();
  Matrix pe(b.num_nodes, k);
  for (std::size_t g = 0; g < per_graph.size(); ++g) {
    const Matrix& p = per_graph[g];
    const Index begin = b.node_segments.begin(static_cast<Index>(g));
    if (p.rows() != b.node_segments.size(static_cast<Index>(g)) || p.cols() != k) {
      throw ShapeError("attach_pos_enc: graph " + std::to_string(g) + " encoding is " +
                       shape_str(p.rows(), p.cols()));
    }
    pe.middleRows(begin, p.rows()) = p;
  }
  b.pos_enc = std::move(pe);
}

}  // namespace geaet
