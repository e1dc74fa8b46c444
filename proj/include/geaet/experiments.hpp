#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "geaet/training.hpp"

namespace geaet {

/// Undirected random graph with `edges` distinct edges sampled uniformly
/// (both arcs stored), N(0,1) dense node features and optional dense edge
/// features. The target is a graph class drawn from [0, classes).
Graph random_graph(Index n, Index edges, Index node_dim, Index edge_dim, std::mt19937_64& rng, int classes = 2);

// ---------------------------------------------------------------- sweeps

struct SweepVariant {
  std::string setting;
  RunConfig config;
};

struct SweepRow {
  std::string model;
  std::string setting;
  std::vector<double> test;  // one per seed
  std::vector<double> valid;
  double mean = 0.0;  // over test
  double stddev = 0.0;
};

struct SweepTable {
  std::string sweep;
  std::string metric;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepRow> rows;

  nlohmann::json to_json() const;
  void print(std::ostream& os) const;
};

/// Trains every variant once per seed (config.seed replaced by the seed) on
/// the dataset of the first variant. At most `jobs` runs execute at once.
SweepTable run_sweep(const std::string& name, const std::vector<SweepVariant>& variants,
                     const std::vector<std::uint64_t>& seeds, int jobs);

SweepTable sweep_heads(const RunConfig& base, const std::vector<Index>& heads, const std::vector<std::uint64_t>& seeds,
                       int jobs);
SweepTable sweep_pe(const RunConfig& base, const std::vector<std::uint64_t>& seeds, int jobs);
/// full, no_node_units, no_edge_units, no_shared_unit.
SweepTable sweep_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds, int jobs);

/// Sample standard deviation (n-1); 0 for fewer than two values.
double sample_stddev(const std::vector<double>& v);

// ---------------------------------------------------------------- bench

struct BenchRow {
  Index n = 0;
  Index arcs = 0;
  std::uint64_t flops = 0;
  double ms = 0.0;
};

struct BenchSeries {
  std::string variant;
  std::vector<BenchRow> rows;
  double flop_exponent = 0.0;
  double time_exponent = 0.0;
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Forward-pass cost of a GEANet-only stack and of a stack with
/// self-attention, on random graphs of mean degree 4.
std::vector<BenchSeries> run_bench(const std::vector<Index>& sizes = {128, 256, 512, 1024, 2048},
                                   std::uint64_t seed = 0);
nlohmann::json bench_to_json(const std::vector<BenchSeries>& series);

// ---------------------------------------------------------------- attention dump

/// 1 - H(row)/ln(S) for a probability row over S units; 0 when S == 1.
double salience(const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// One record per graph from a fresh single-graph forward pass: per layer the
/// node-stream GEA matrices and self-attention matrices per head, and per-node
/// salience of the head-averaged GEA rows of the last layer that has them.
nlohmann::json attention_record(const GEAETModel& model, const Graph& g, Index index);

// ---------------------------------------------------------------- gradient suite

struct GradCheckEntry {
  std::string component;
  double max_rel_err = 0.0;
};

inline constexpr double kGradCheckTolerance = 1e-4;

/// Finite-difference checks of every op and layer, plus the full model.
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace geaet
