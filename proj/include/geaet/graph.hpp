#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "geaet/ops.hpp"

namespace geaet {

class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Arc {
  Index src = 0;
  Index dst = 0;
  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Per-row tuples of categorical ids (all tuples share one width).
struct Categorical {
  std::vector<std::vector<int>> ids;
  friend bool operator==(const Categorical&, const Categorical&) = default;
};

/// Raw features: absent, dense rows, or categorical id tuples.
using Features = std::variant<std::monostate, Matrix, Categorical>;

bool features_equal(const Features& a, const Features& b);
Index feature_rows(const Features& f);

enum class TargetKind { node, graph_class, graph_reg };

const char* to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& s);

struct Target {
  TargetKind kind = TargetKind::graph_class;
  std::vector<int> labels;    // node / graph_class
  std::vector<double> values;  // graph_reg
  friend bool operator==(const Target&, const Target&) = default;
};

/// Undirected graphs carry both orientations of every edge as arcs.
struct Graph {
  Index num_nodes = 0;
  std::vector<Arc> edges;
  Features node_features;
  Features edge_features;
  Target target;
  std::optional<Index> target_node;

  Index num_arcs() const { return static_cast<Index>(edges.size()); }
};

bool operator==(const Graph& a, const Graph& b);

/// Throws SchemaError when endpoints, duplicates, feature row counts or the
/// target do not match the graph.
void validate(const Graph& g);

/// Adds any missing reverse arc right after its partner; edge features of
/// the new arc copy the partner's row.
void symmetrize(Graph& g);

std::vector<Index> in_degrees(const Graph& g);

/// Block-diagonal merge of several graphs.
struct Batch {
  Index num_nodes = 0;
  std::vector<Arc> edges;
  std::vector<Index> src, dst;  // edges split into index arrays
  Features node_features;
  Features edge_features;
  TargetKind target_kind = TargetKind::graph_class;
  std::vector<int> labels;
  std::vector<double> values;
  std::vector<Index> target_nodes;  // one global row per graph, or empty
  std::vector<Index> graph_id;      // per node
  Segments node_segments;
  Segments edge_segments;
  std::optional<Matrix> pos_enc;   // n x k when positional encoding is on

  Index num_graphs() const { return node_segments.count(); }
  Index num_arcs() const { return static_cast<Index>(edges.size()); }
};

Batch make_batch(std::span<const Graph> graphs);
Batch make_batch(std::span<const Graph* const> graphs);
std::vector<Graph> unbatch(const Batch& b);

/// Relabels nodes so that new node i is old node perm[i].
Graph permute_nodes(const Graph& g, std::span<const Index> perm);

}  // namespace geaet
