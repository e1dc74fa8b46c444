#include "geaet/graph.hpp"

#include <set>
#include <string>
#include <utility>

namespace geaet {

bool features_equal(const Features& a, const Features& b) {
  if (a.index() != b.index()) return false;
  if (const auto* ma = std::get_if<Matrix>(&a)) {
    const auto& mb = std::get<Matrix>(b);
    return ma->rows() == mb.rows() && ma->cols() == mb.cols() && *ma == mb;
  }
  if (const auto* ca = std::get_if<Categorical>(&a)) return *ca == std::get<Categorical>(b);
  return true;
}

Index feature_rows(const Features& f) {
  if (const auto* m = std::get_if<Matrix>(&f)) return m->rows();
  if (const auto* c = std::get_if<Categorical>(&f)) return static_cast<Index>(c->ids.size());
  return -1;
}

const char* to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::node:
      return "node";
    case TargetKind::graph_class:
      return "graph_class";
    case TargetKind::graph_reg:
      return "graph_reg";
  }
  return "?";
}

TargetKind target_kind_from_string(const std::string& s) {
  if (s == "node") return TargetKind::node;
  if (s == "graph_class") return TargetKind::graph_class;
  if (s == "graph_reg") return TargetKind::graph_reg;
  throw SchemaError("unknown target kind '" + s + "'");
}

bool operator==(const Graph& a, const Graph& b) {
  return a.num_nodes == b.num_nodes && a.edges == b.edges && features_equal(a.node_features, b.node_features) &&
         features_equal(a.edge_features, b.edge_features) && a.target == b.target && a.target_node == b.target_node;
}

namespace {

std::size_t feature_width(const Features& f) {
  if (const auto* m = std::get_if<Matrix>(&f)) return static_cast<std::size_t>(m->cols());
  if (const auto* c = std::get_if<Categorical>(&f)) return c->ids.empty() ? 0 : c->ids.front().size();
  return 0;
}

void check_features(const Features& f, Index rows, const char* what) {
  if (std::holds_alternative<std::monostate>(f)) return;
  if (feature_rows(f) != rows) {
    throw SchemaError(std::string(what) + " has " + std::to_string(feature_rows(f)) + " rows, expected " +
                      std::to_string(rows));
  }
  if (const auto* c = std::get_if<Categorical>(&f)) {
    const std::size_t w = feature_width(f);
    for (const auto& t : c->ids) {
      if (t.size() != w) throw SchemaError(std::string(what) + ": categorical tuples differ in width");
      for (int id : t) {
        if (id < 0) throw SchemaError(std::string(what) + ": negative categorical id");
      }
    }
  }
}

bool same_schema(const Features& a, const Features& b) {
  return a.index() == b.index() && (std::holds_alternative<std::monostate>(a) || feature_width(a) == feature_width(b));
}

template <typename Range, typename Get>
Batch merge(const Range& graphs, Get get) {
  if (graphs.empty()) throw SchemaError("make_batch: no graphs");
  const Graph& first = get(graphs[0]);
  Batch b;
  b.target_kind = first.target.kind;
  std::vector<Index> node_sizes, arc_sizes;
  Matrix dense_nodes, dense_edges;
  Categorical cat_nodes, cat_edges;
  Index total_nodes = 0, total_arcs = 0;
  for (const auto& ref : graphs) {
    const Graph& g = get(ref);
    if (!same_schema(g.node_features, first.node_features) || !same_schema(g.edge_features, first.edge_features) ||
        g.target.kind != first.target.kind || g.target_node.has_value() != first.target_node.has_value()) {
      throw SchemaError("make_batch: graphs have different feature or target schemas");
    }
    total_nodes += g.num_nodes;
    total_arcs += g.num_arcs();
  }
  if (const auto* m = std::get_if<Matrix>(&first.node_features)) dense_nodes.resize(total_nodes, m->cols());
  if (const auto* m = std::get_if<Matrix>(&first.edge_features)) dense_edges.resize(total_arcs, m->cols());

  Index node_off = 0, arc_off = 0;
  b.edges.reserve(static_cast<std::size_t>(total_arcs));
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = get(graphs[gi]);
    for (const Arc& a : g.edges) b.edges.push_back({a.src + node_off, a.dst + node_off});
    for (Index i = 0; i < g.num_nodes; ++i) b.graph_id.push_back(static_cast<Index>(gi));
    if (const auto* m = std::get_if<Matrix>(&g.node_features)) dense_nodes.middleRows(node_off, m->rows()) = *m;
    if (const auto* c = std::get_if<Categorical>(&g.node_features)) {
      cat_nodes.ids.insert(cat_nodes.ids.end(), c->ids.begin(), c->ids.end());
    }
    if (const auto* m = std::get_if<Matrix>(&g.edge_features)) dense_edges.middleRows(arc_off, m->rows()) = *m;
    if (const auto* c = std::get_if<Categorical>(&g.edge_features)) {
      cat_edges.ids.insert(cat_edges.ids.end(), c->ids.begin(), c->ids.end());
    }
    b.labels.insert(b.labels.end(), g.target.labels.begin(), g.target.labels.end());
    b.values.insert(b.values.end(), g.target.values.begin(), g.target.values.end());
    if (g.target_node) b.target_nodes.push_back(*g.target_node + node_off);
    node_sizes.push_back(g.num_nodes);
    arc_sizes.push_back(g.num_arcs());
    node_off += g.num_nodes;
    arc_off += g.num_arcs();
  }
  b.num_nodes = total_nodes;
  if (std::holds_alternative<Matrix>(first.node_features)) b.node_features = std::move(dense_nodes);
  if (std::holds_alternative<Categorical>(first.node_features)) b.node_features = std::move(cat_nodes);
  if (std::holds_alternative<Matrix>(first.edge_features)) b.edge_features = std::move(dense_edges);
  if (std::holds_alternative<Categorical>(first.edge_features)) b.edge_features = std::move(cat_edges);
  b.node_segments = Segments::from_sizes(node_sizes);
  b.edge_segments = Segments::from_sizes(arc_sizes);
  b.src.reserve(b.edges.size());
  b.dst.reserve(b.edges.size());
  for (const Arc& a : b.edges) {
    b.src.push_back(a.src);
    b.dst.push_back(a.dst);
  }
  return b;
}


Features slice_features(const Features& f, Index begin, Index n) {
  if (const auto* m = std::get_if<Matrix>(&f)) return Matrix(m->middleRows(begin, n));
  if (const auto* c = std::get_if<Categorical>(&f)) {
    Categorical out;
    out.ids.assign(c->ids.begin() + begin, c->ids.begin() + begin + n);
    return out;
  }
  return std::monostate{};
}

}  // namespace

void validate(const Graph& g) {
  if (g.num_nodes < 0) throw SchemaError("negative node count");
  std::set<std::pair<Index, Index>> seen;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Arc& a = g.edges[i];
    if (a.src < 0 || a.src >= g.num_nodes || a.dst < 0 || a.dst >= g.num_nodes) {
      throw SchemaError("arc " + std::to_string(i) + " has an endpoint outside [0, " + std::to_string(g.num_nodes) + ")");
    }
    if (a.src == a.dst) throw SchemaError("arc " + std::to_string(i) + " is a self-loop");
    if (!seen.insert({a.src, a.dst}).second) throw SchemaError("arc " + std::to_string(i) + " is a duplicate");
  }
  for (const auto& [s, d] : seen) {
    if (!seen.count({d, s})) throw SchemaError("arc (" + std::to_string(s) + "," + std::to_string(d) + ") lacks its reverse");
  }
  check_features(g.node_features, g.num_nodes, "node features");
  check_features(g.edge_features, g.num_arcs(), "edge features");
  switch (g.target.kind) {
    case TargetKind::node:
      if (static_cast<Index>(g.target.labels.size()) != g.num_nodes || !g.target.values.empty()) {
        throw SchemaError("node target needs one label per node");
      }
      break;
    case TargetKind::graph_class:
      if (g.target.labels.size() != 1 || !g.target.values.empty()) throw SchemaError("graph_class target needs one label");
      break;
    case TargetKind::graph_reg:
      if (g.target.values.empty() || !g.target.labels.empty()) throw SchemaError("graph_reg target needs values");
      break;
  }
  if (g.target_node && (*g.target_node < 0 || *g.target_node >= g.num_nodes)) {
    throw SchemaError("target_node out of range");
  }
}

void symmetrize(Graph& g) {
  std::set<std::pair<Index, Index>> present;
  for (const Arc& a : g.edges) present.insert({a.src, a.dst});
  std::vector<Arc> arcs;
  std::vector<Index> source_row;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Arc& a = g.edges[i];
    arcs.push_back(a);
    source_row.push_back(static_cast<Index>(i));
    if (!present.count({a.dst, a.src})) {
      present.insert({a.dst, a.src});
      arcs.push_back({a.dst, a.src});
      source_row.push_back(static_cast<Index>(i));
    }
  }
  if (arcs.size() == g.edges.size()) return;
  if (const auto* m = std::get_if<Matrix>(&g.edge_features)) {
    Matrix out(static_cast<Index>(arcs.size()), m->cols());
    for (std::size_t i = 0; i < arcs.size(); ++i) out.row(static_cast<Index>(i)) = m->row(source_row[i]);
    g.edge_features = std::move(out);
  } else if (const auto* c = std::get_if<Categorical>(&g.edge_features)) {
    Categorical out;
    for (Index r : source_row) out.ids.push_back(c->ids[static_cast<std::size_t>(r)]);
    g.edge_features = std::move(out);
  }
  g.edges = std::move(arcs);
}

std::vector<Index> in_degrees(const Graph& g) {
  std::vector<Index> deg(static_cast<std::size_t>(g.num_nodes), 0);
  for (const Arc& a : g.edges) ++deg[static_cast<std::size_t>(a.dst)];
  return deg;
}

Batch make_batch(std::span<const Graph> graphs) {
  return merge(graphs, [](const Graph& g) -> const Graph& { return g; });
}

Batch make_batch(std::span<const Graph* const> graphs) {
  return merge(graphs, [](const Graph* g) -> const Graph& { return *g; });
}

std::vector<Graph> unbatch(const Batch& b) {
  std::vector<Graph> out;
  const Index count = b.num_graphs();
  const std::size_t reg_dim = b.target_kind == TargetKind::graph_reg && count > 0
                                  ? b.values.size() / static_cast<std::size_t>(count)
                                  : 0;
  for (Index g = 0; g < count; ++g) {
    Graph graph;
    const Index n0 = b.node_segments.begin(g), n = b.node_segments.size(g);
    const Index a0 = b.edge_segments.begin(g), m = b.edge_segments.size(g);
    graph.num_nodes = n;
    for (Index i = 0; i < m; ++i) {
      const Arc& a = b.edges[static_cast<std::size_t>(a0 + i)];
      graph.edges.push_back({a.src - n0, a.dst - n0});
    }
    graph.node_features = slice_features(b.node_features, n0, n);
    graph.edge_features = slice_features(b.edge_features, a0, m);
    graph.target.kind = b.target_kind;
    switch (b.target_kind) {
      case TargetKind::node:
        graph.target.labels.assign(b.labels.begin() + n0, b.labels.begin() + n0 + n);
        break;
      case TargetKind::graph_class:
        graph.target.labels = {b.labels[static_cast<std::size_t>(g)]};
        break;
      case TargetKind::graph_reg:
        graph.target.values.assign(b.values.begin() + static_cast<std::ptrdiff_t>(g * reg_dim),
                                   b.values.begin() + static_cast<std::ptrdiff_t>((g + 1) * reg_dim));
        break;
    }
    if (!b.target_nodes.empty()) graph.target_node = b.target_nodes[static_cast<std::size_t>(g)] - n0;
    out.push_back(std::move(graph));
  }
  return out;
}

Graph permute_nodes(const Graph& g, std::span<const Index> perm) {
  if (static_cast<Index>(perm.size()) != g.num_nodes) throw SchemaError("permute_nodes: permutation size mismatch");
  std::vector<Index> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<Index>(i);
  Graph out = g;
  for (Arc& a : out.edges) a = {inv[static_cast<std::size_t>(a.src)], inv[static_cast<std::size_t>(a.dst)]};
  if (const auto* m = std::get_if<Matrix>(&g.node_features)) {
    Matrix p(m->rows(), m->cols());
    for (std::size_t i = 0; i < perm.size(); ++i) p.row(static_cast<Index>(i)) = m->row(perm[i]);
    out.node_features = std::move(p);
  } else if (const auto* c = std::get_if<Categorical>(&g.node_features)) {
    Categorical p;
    for (Index old : perm) p.ids.push_back(c->ids[static_cast<std::size_t>(old)]);
    out.node_features = std::move(p);
  }
  if (g.target.kind == TargetKind::node) {
    for (std::size_t i = 0; i < perm.size(); ++i) out.target.labels[i] = g.target.labels[static_cast<std::size_t>(perm[i])];
  }
  if (g.target_node) out.target_node = inv[static_cast<std::size_t>(*g.target_node)];
  return out;
}

}  // namespace geaet
