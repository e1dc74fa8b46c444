#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "geaet/config.hpp"
#include "geaet/model.hpp"
#include "geaet/optim.hpp"

namespace geaet {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generates the configured dataset, or loads it when dataset.path is set.
DatasetSplit load_or_generate(const DatasetConfig& config);

/// Copies `base` and fills head, outputs and input schemas from the data.
ModelConfig derive_model_config(const ModelConfig& base, const DatasetSplit& data);

/// Classification metrics are accuracies (higher is better); regression
/// metrics are MAE (lower is better).
bool higher_is_better(HeadKind kind);

struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;
};

/// Forward pass without a tape over `graphs`, in order, in chunks of
/// `batch_size`. Positional encodings come from `pos_enc` (one per graph)
/// or are computed on the fly when the model uses them.
EvalResult evaluate(const GEAETModel& model, std::span<const Graph> graphs, Index batch_size = 64,
                    std::span<const Matrix> pos_enc = {});

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_metric = 0.0;  // running metric over the epoch's batches
  double val_metric = 0.0;
};

struct RunReport {
  nlohmann::json config;
  std::vector<EpochStats> curves;
  int best_epoch = -1;
  double best_val_metric = 0.0;
  double test_metric = 0.0;
  std::uint64_t flops = 0;
  double seconds = 0.0;
  Index parameters = 0;

  /// Wall time is left out when `with_time` is false so reports can be
  /// compared byte for byte.
  nlohmann::json to_json(bool with_time = true) const;
};

/// Epoch-at-a-time training. The best validation snapshot is kept and
/// restored by finish().
class Trainer {
 public:
  Trainer(const RunConfig& config, DatasetSplit data);

  bool done() const { return epoch_ >= config_.optim.epochs; }
  int epoch() const { return epoch_; }
  EpochStats run_epoch();
  RunReport finish();

  const RunConfig& config() const { return config_; }
  const GEAETModel& model() const { return model_; }
  const DatasetSplit& data() const { return data_; }

 private:
  Batch train_batch(std::span<const std::size_t> order);

  RunConfig config_;
  DatasetSplit data_;
  GEAETModel model_;
  ParamList params_;
  AdamWState optimizer_;
  CosineSchedule schedule_;
  std::mt19937_64 rng_;
  std::vector<Matrix> train_pe_, valid_pe_, test_pe_;
  std::vector<Matrix> best_;
  RunReport report_;
  int epoch_ = 0;
  std::uint64_t flops_start_ = 0;
  double seconds_ = 0.0;
};

/// Runs every epoch and returns the report; the best-validation model is
/// written to `best` when given.
RunReport train(const RunConfig& config, const DatasetSplit& data, GEAETModel* best = nullptr);

/// Builds a batch and attaches positional encodings when the model needs them.
Batch prepare_batch(const GEAETModel& model, std::span<const Graph* const> graphs);

/// Keeps freed blocks inside the process heap. Training allocates and frees
/// many short-lived matrices, and returning them to the kernel every step
/// shows up as system time. No-op off glibc.
void tune_allocator();

/// Per-graph encodings for `config`; empty when the kind is none.
std::vector<Matrix> encode_all(std::span<const Graph> graphs, const PosEncConfig& config);

}  // namespace geaet
