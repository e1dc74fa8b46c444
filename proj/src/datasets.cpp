#include "geaet/datasets.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace geaet {

namespace {

DatasetSplit split_graphs(std::vector<Graph> graphs, SplitFractions split) {
  if (split.train < 0 || split.valid < 0 || split.train + split.valid > 1.0) {
    throw std::invalid_argument("split fractions must be nonnegative and sum to at most 1");
  }
  const auto count = graphs.size();
  const auto n_train = static_cast<std::size_t>(static_cast<double>(count) * split.train);
  const auto n_valid = std::min(count - n_train, static_cast<std::size_t>(static_cast<double>(count) * split.valid));
  DatasetSplit out;
  auto it = std::make_move_iterator(graphs.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(it + static_cast<std::ptrdiff_t>(n_train), it + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_valid), std::make_move_iterator(graphs.end()));
  return out;
}

nlohmann::json split_json(SplitFractions s) { return {{"train", s.train}, {"valid", s.valid}}; }

}  // namespace

Graph make_tree_neighbour_match(int depth, std::mt19937_64& rng) {
  if (depth < 2) throw std::invalid_argument("tree depth must be at least 2");
  const Index leaves = Index{1} << depth;
  const Index n = 2 * leaves - 1;
  Graph g;
  g.num_nodes = n;
  // Heap layout: children of i are 2i+1 and 2i+2.
  for (Index child = 1; child < n; ++child) {
    const Index parent = (child - 1) / 2;
    g.edges.push_back({parent, child});
    g.edges.push_back({child, parent});
  }
  std::vector<int> classes(static_cast<std::size_t>(leaves)), keys(static_cast<std::size_t>(leaves));
  std::iota(classes.begin(), classes.end(), 1);
  std::iota(keys.begin(), keys.end(), 1);
  std::shuffle(classes.begin(), classes.end(), rng);
  std::shuffle(keys.begin(), keys.end(), rng);
  std::uniform_int_distribution<int> pick(1, static_cast<int>(leaves));
  const int query = pick(rng);

  Categorical feats;
  feats.ids.assign(static_cast<std::size_t>(n), {0, 0, 0});
  feats.ids[0][2] = query;
  int label = -1;
  const Index first_leaf = leaves - 1;
  for (Index l = 0; l < leaves; ++l) {
    const auto li = static_cast<std::size_t>(l);
    feats.ids[static_cast<std::size_t>(first_leaf + l)] = {classes[li], keys[li], 0};
    if (keys[li] == query) label = classes[li] - 1;
  }
  g.node_features = std::move(feats);
  g.target = {TargetKind::graph_class, {label}, {}};
  g.target_node = 0;
  return g;
}

DatasetSplit generate_tree_neighbour_match(int depth, int count, std::uint64_t seed, SplitFractions split) {
  if (depth < 2) throw std::invalid_argument("tree depth must be at least 2");
  if (count < 1) throw std::invalid_argument("graph count must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<Graph> graphs;
  graphs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) graphs.push_back(make_tree_neighbour_match(depth, rng));
  DatasetSplit out = split_graphs(std::move(graphs), split);
  out.seed = seed;
  out.generator = "tree";
  out.params = {{"r", depth}, {"count", count}, {"split", split_json(split)}};
  return out;
}

void validate(const SbmParams& p) {
  if (p.n_per_cluster < 1) throw std::invalid_argument("n_per_cluster must be at least 1");
  if (p.clusters < 1) throw std::invalid_argument("clusters must be at least 1");
  if (p.count < 1) throw std::invalid_argument("graph count must be at least 1");
  if (!(p.p_out >= 0.0 && p.p_out < p.p_in && p.p_in <= 1.0)) {
    throw std::invalid_argument("SBM probabilities need 0 <= p_out < p_in <= 1");
  }
}

Graph make_sbm_cluster(const SbmParams& p, std::mt19937_64& rng) {
  validate(p);
  const Index per = p.n_per_cluster;
  const Index n = per * p.clusters;
  Graph g;
  g.num_nodes = n;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double prob = (i / per == j / per) ? p.p_in : p.p_out;
      if (unit(rng) < prob) {
        g.edges.push_back({i, j});
        g.edges.push_back({j, i});
        ++degree[static_cast<std::size_t>(i)];
        ++degree[static_cast<std::size_t>(j)];
      }
    }
  }
  // Isolated nodes get one edge to a random node of their own cluster.
  for (Index i = 0; i < n; ++i) {
    if (degree[static_cast<std::size_t>(i)] > 0 || per < 2) continue;
    std::uniform_int_distribution<Index> mate(0, per - 2);
    Index j = (i / per) * per + mate(rng);
    if (j >= i) ++j;
    g.edges.push_back({i, j});
    g.edges.push_back({j, i});
    ++degree[static_cast<std::size_t>(i)];
    ++degree[static_cast<std::size_t>(j)];
  }
  Categorical feats;
  feats.ids.assign(static_cast<std::size_t>(n), {0});
  std::uniform_int_distribution<Index> seat(0, per - 1);
  for (int c = 0; c < p.clusters; ++c) {
    feats.ids[static_cast<std::size_t>(c * per + seat(rng))][0] = c + 1;
  }
  g.node_features = std::move(feats);
  g.target.kind = TargetKind::node;
  for (Index i = 0; i < n; ++i) g.target.labels.push_back(static_cast<int>(i / per));
  return g;
}

DatasetSplit generate_sbm_cluster(const SbmParams& p, std::uint64_t seed) {
  validate(p);
  std::mt19937_64 rng(seed);
  std::vector<Graph> graphs;
  graphs.reserve(static_cast<std::size_t>(p.count));
  for (int i = 0; i < p.count; ++i) graphs.push_back(make_sbm_cluster(p, rng));
  DatasetSplit out = split_graphs(std::move(graphs), p.split);
  out.seed = seed;
  out.generator = "sbm";
  out.params = {{"n_per_cluster", p.n_per_cluster}, {"clusters", p.clusters}, {"p_in", p.p_in},
                {"p_out", p.p_out},                 {"count", p.count},       {"split", split_json(p.split)}};
  return out;
}

}  // namespace geaet
