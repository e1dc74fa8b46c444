#include "geaet/attention.hpp"

#include <cmath>
#include <string>

namespace geaet {

namespace {

void check_heads(Index d, Index heads, const char* op) {
  if (heads < 1 || d % heads != 0) {
    throw ShapeError(std::string(op) + ": width " + std::to_string(d) + " is not divisible by " +
                     std::to_string(heads) + " heads");
  }
}

struct KeyValue {
  const Tensor& key;
  const Tensor& value;
};

KeyValue units_for(const ExternalUnits& units, Stream which) {
  if (which == Stream::node) return {units.node_key, units.node_value};
  return {units.edge_key, units.edge_value};
}

Tensor apply_shared(const Tensor& x, const ExternalUnits& units) {
  if (x.cols() != units.dim()) {
    throw ShapeError("external attention: feature width " + std::to_string(x.cols()) + " but units are " +
                     std::to_string(units.dim()) + " wide");
  }
  return units.toggles.shared ? matmul(x, units.shared) : x;
}

}  // namespace

ExternalUnits ExternalUnits::create(Index d, Index unit_count, std::mt19937_64& rng, UnitToggles toggles) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  ExternalUnits u;
  u.shared = glorot_uniform(d, d, rng);
  u.node_key = normal_init(unit_count, d, stddev, rng);
  u.node_value = normal_init(unit_count, d, stddev, rng);
  u.edge_key = normal_init(unit_count, d, stddev, rng);
  u.edge_value = normal_init(unit_count, d, stddev, rng);
  u.toggles = toggles;
  return u;
}

void ExternalUnits::collect(ParamList& out, const std::string& prefix) const {
  if (toggles.shared) out.push_back({prefix + ".shared", shared});
  if (toggles.node) {
    out.push_back({prefix + ".node_key", node_key});
    out.push_back({prefix + ".node_value", node_value});
  }
  if (toggles.edge) {
    out.push_back({prefix + ".edge_key", edge_key});
    out.push_back({prefix + ".edge_value", edge_value});
  }
}

Tensor double_normalize(const Tensor& scores, const Segments& segments, double epsilon) {
  return row_l1_normalize(segment_col_softmax(scores, segments), epsilon);
}

Tensor gea_forward(const Tensor& x, const ExternalUnits& units, Stream which, const Segments& segments,
                   Matrix* attention) {
  const KeyValue kv = units_for(units, which);
  Tensor z = apply_shared(x, units);
  Tensor a = double_normalize(matmul_nt(z, kv.key), segments);
  if (attention) *attention = a.value();
  return matmul(a, kv.value);
}

Tensor multi_head_gea(const Tensor& x, const ExternalUnits& units, Stream which, Index heads, const Tensor& out_proj,
                      const Segments& segments, std::vector<Matrix>* head_attention) {
  const Index d = units.dim();
  check_heads(d, heads, "multi_head_gea");
  const KeyValue kv = units_for(units, which);
  Tensor z = apply_shared(x, units);
  const Index width = d / heads;
  std::vector<Tensor> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (Index h = 0; h < heads; ++h) {
    const Index from = h * width, to = from + width;
    Tensor zh = heads == 1 ? z : slice_cols(z, from, to);
    Tensor kh = heads == 1 ? kv.key : slice_cols(kv.key, from, to);
    Tensor vh = heads == 1 ? kv.value : slice_cols(kv.value, from, to);
    Tensor a = double_normalize(matmul_nt(zh, kh), segments);
    if (head_attention) head_attention->push_back(a.value());
    outs.push_back(matmul(a, vh));
  }
  Tensor cat = heads == 1 ? outs.front() : concat_cols(outs);
  return matmul(cat, out_proj);
}

GEANetBlock GEANetBlock::create(Index d, Index unit_count, Index heads, std::mt19937_64& rng, UnitToggles toggles) {
  check_heads(d, heads, "GEANetBlock");
  GEANetBlock b;
  b.units = ExternalUnits::create(d, unit_count, rng, toggles);
  b.heads = heads;
  const double noise = 1.0 / std::sqrt(static_cast<double>(d)) * 0.1;
  b.node_out = identity_plus_noise(d, noise, rng);
  b.edge_out = identity_plus_noise(d, noise, rng);
  return b;
}

void GEANetBlock::collect(ParamList& out, const std::string& prefix) const {
  units.collect(out, prefix + ".units");
  if (units.toggles.node) out.push_back({prefix + ".node_out", node_out});
  if (units.toggles.edge) out.push_back({prefix + ".edge_out", edge_out});
}

StreamPair geanet(const Tensor& x, const Tensor& e, const GEANetBlock& block, const Segments& node_segments,
                  const Segments& edge_segments, std::vector<Matrix>* node_attention) {
  const UnitToggles& t = block.units.toggles;
  StreamPair out{x, e};
  if (t.node) {
    out.x = add(x, multi_head_gea(x, block.units, Stream::node, block.heads, block.node_out, node_segments,
                                  node_attention));
  }
  if (t.edge && e.rows() > 0) {
    out.e = add(e, multi_head_gea(e, block.units, Stream::edge, block.heads, block.edge_out, edge_segments));
  }
  return out;
}

SelfAttentionLayer SelfAttentionLayer::create(Index d, Index heads, std::mt19937_64& rng) {
  check_heads(d, heads, "SelfAttentionLayer");
  SelfAttentionLayer l;
  l.w_query = glorot_uniform(d, d, rng);
  l.w_key = glorot_uniform(d, d, rng);
  l.w_value = glorot_uniform(d, d, rng);
  l.w_out = identity_plus_noise(d, 0.1 / std::sqrt(static_cast<double>(d)), rng);
  l.heads = heads;
  return l;
}

void SelfAttentionLayer::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".w_query", w_query});
  out.push_back({prefix + ".w_key", w_key});
  out.push_back({prefix + ".w_value", w_value});
  out.push_back({prefix + ".w_out", w_out});
}

Tensor self_attention(const Tensor& x, const SelfAttentionLayer& layer, const Segments& segments,
                      std::vector<std::vector<Matrix>>* attention) {
  const Index d = layer.w_query.rows();
  if (x.cols() != d) throw ShapeError("self_attention: input " + x.shape() + " vs width " + std::to_string(d));
  check_heads(d, layer.heads, "self_attention");
  const Index width = d / layer.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  Tensor q = matmul(x, layer.w_query);
  Tensor k = matmul(x, layer.w_key);
  Tensor v = matmul(x, layer.w_value);
  std::vector<Tensor> outs;
  for (Index h = 0; h < layer.heads; ++h) {
    const Index from = h * width, to = from + width;
    std::vector<Matrix>* probs = nullptr;
    if (attention) probs = &attention->emplace_back();
    if (layer.heads == 1) {
      outs.push_back(segment_attention(q, k, v, segments, scale, probs));
    } else {
      outs.push_back(segment_attention(slice_cols(q, from, to), slice_cols(k, from, to), slice_cols(v, from, to),
                                       segments, scale, probs));
    }
  }
  Tensor cat = layer.heads == 1 ? outs.front() : concat_cols(outs);
  return matmul(cat, layer.w_out);
}

}  // namespace geaet
