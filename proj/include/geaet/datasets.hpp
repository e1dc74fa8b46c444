#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "geaet/graph.hpp"

namespace geaet {

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;  // test takes the remainder
};

struct DatasetSplit {
  std::vector<Graph> train, valid, test;
  std::uint64_t seed = 0;
  std::string generator;
  nlohmann::json params = nlohmann::json::object();
};

/// Complete binary tree of the given depth. Node tuples are
/// [class, key, query]: leaves carry (class, key, 0), the root carries
/// (0, 0, query) and inner nodes (0, 0, 0). The root is the target node and
/// its label is class-1 of the leaf whose key equals the query.
Graph make_tree_neighbour_match(int depth, std::mt19937_64& rng);

DatasetSplit generate_tree_neighbour_match(int depth, int count, std::uint64_t seed, SplitFractions split = {});

struct SbmParams {
  int n_per_cluster = 20;
  int clusters = 6;
  double p_in = 0.55;
  double p_out = 0.25;
  int count = 1000;
  SplitFractions split;
};

void validate(const SbmParams& p);

/// Stochastic block model graph. Node i belongs to cluster i / n_per_cluster.
/// One random node per cluster carries that cluster's id (1..clusters) as its
/// single categorical feature; all others carry 0.
Graph make_sbm_cluster(const SbmParams& p, std::mt19937_64& rng);

DatasetSplit generate_sbm_cluster(const SbmParams& p, std::uint64_t seed);

}  // namespace geaet
