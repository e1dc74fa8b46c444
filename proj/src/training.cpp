#include "geaet/training.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "geaet/jsonl.hpp"
#include "geaet/losses.hpp"

namespace geaet {

namespace {

// Distinct stream for shuffling and sign flips so that it never overlaps the
// initialization stream of the same seed.
constexpr std::uint64_t kShuffleSalt = 0x9e3779b97f4a7c15ULL;

Matrix regression_targets(const Batch& b, Index outputs) {
  Matrix t(b.num_graphs(), outputs);
  if (static_cast<Index>(b.values.size()) != t.size()) {
    throw SchemaError("regression targets: " + std::to_string(b.values.size()) + " values for " +
                      std::to_string(b.num_graphs()) + " graphs x " + std::to_string(outputs) + " outputs");
  }
  std::copy(b.values.begin(), b.values.end(), t.data());
  return t;
}

Tensor batch_loss(HeadKind head, const Tensor& out, const Batch& b) {
  if (head == HeadKind::graph_regress) return l1_loss(out, regression_targets(b, out.cols()));
  return cross_entropy(out, b.labels);
}

double batch_metric(HeadKind head, const Matrix& out, const Batch& b) {
  if (head == HeadKind::graph_regress) return mae(out, regression_targets(b, out.cols()));
  return accuracy(out, b.labels);
}

// Items a metric averages over: nodes for node tasks, graphs otherwise.
Index metric_items(HeadKind head, const Batch& b) {
  return head == HeadKind::node_classify ? b.num_nodes : b.num_graphs();
}

std::vector<Matrix> snapshot(const ParamList& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor.value());
  return out;
}

void restore(const ParamList& params, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    t.mutable_value() = values[i];
  }
}

}  // namespace

DatasetSplit load_or_generate(const DatasetConfig& c) {
  if (!c.path.empty()) return load_dataset(c.path);
  if (c.generator == "tree") return generate_tree_neighbour_match(c.depth, c.count, c.seed, c.split);
  if (c.generator == "sbm") {
    SbmParams p = c.sbm;
    p.count = c.count;
    p.split = c.split;
    return generate_sbm_cluster(p, c.seed);
  }
  throw ConfigError("dataset.generator: unknown generator '" + c.generator + "'");
}

ModelConfig derive_model_config(const ModelConfig& base, const DatasetSplit& data) {
  ModelConfig m = base;
  bool first = true;
  int max_label = -1;
  Index reg_dim = 0;
  for (const auto* part : {&data.train, &data.valid, &data.test}) {
    for (const Graph& g : *part) {
      const FeatureSchema ns = infer_schema(g.node_features);
      const FeatureSchema es = infer_schema(g.edge_features);
      if (first) {
        m.head = head_for(g.target.kind);
        m.node_input = ns;
        m.edge_input = es;
        first = false;
      } else {
        if (head_for(g.target.kind) != m.head) throw SchemaError("dataset mixes target kinds");
        m.node_input = merge_schema(m.node_input, ns);
        m.edge_input = merge_schema(m.edge_input, es);
      }
      for (int l : g.target.labels) max_label = std::max(max_label, l);
      reg_dim = std::max<Index>(reg_dim, static_cast<Index>(g.target.values.size()));
    }
  }
  if (first) throw SchemaError("dataset is empty");
  m.outputs = m.head == HeadKind::graph_regress ? reg_dim : max_label + 1;
  m.validate();
  return m;
}

bool higher_is_better(HeadKind kind) { return kind != HeadKind::graph_regress; }

Batch prepare_batch(const GEAETModel& model, std::span<const Graph* const> graphs) {
  Batch b = make_batch(graphs);
  const PosEncConfig& pe = model.config().pe;
  if (pe.kind != PosEncKind::none) {
    std::vector<Matrix> per_graph;
    per_graph.reserve(graphs.size());
    for (const Graph* g : graphs) per_graph.push_back(positional_encoding(*g, pe));
    attach_pos_enc(b, per_graph);
  }
  return b;
}

void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, -1);  // never hand the heap top back
#endif
}

std::vector<Matrix> encode_all(std::span<const Graph> graphs, const PosEncConfig& config) {
  std::vector<Matrix> out;
  if (config.kind == PosEncKind::none) return out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) out.push_back(positional_encoding(g, config));
  return out;
}

EvalResult evaluate(const GEAETModel& model, std::span<const Graph> graphs, Index batch_size,
                    std::span<const Matrix> pos_enc) {
  if (!pos_enc.empty() && pos_enc.size() != graphs.size()) {
    throw ShapeError("evaluate: " + std::to_string(pos_enc.size()) + " encodings for " +
                     std::to_string(graphs.size()) + " graphs");
  }
  NoGradGuard no_grad;
  const HeadKind head = model.config().head;
  double loss = 0.0, metric = 0.0;
  Index items = 0;
  for (std::size_t start = 0; start < graphs.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(graphs.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Graph*> ptrs;
    for (std::size_t i = start; i < stop; ++i) ptrs.push_back(&graphs[i]);
    Batch b;
    if (pos_enc.empty()) {
      b = prepare_batch(model, ptrs);
    } else {
      b = make_batch(ptrs);
      attach_pos_enc(b, pos_enc.subspan(start, stop - start));
    }
    const Tensor out = model.forward(b);
    const Index w = metric_items(head, b);
    loss += batch_loss(head, out, b).item() * static_cast<double>(w);
    metric += batch_metric(head, out.value(), b) * static_cast<double>(w);
    items += w;
  }
  if (items == 0) return {};
  return {loss / static_cast<double>(items), metric / static_cast<double>(items)};
}

nlohmann::json RunReport::to_json(bool with_time) const {
  nlohmann::json curve = nlohmann::json::array();
  for (const EpochStats& e : curves) {
    curve.push_back({{"epoch", e.epoch},
                     {"lr", e.lr},
                     {"train_loss", e.train_loss},
                     {"train_metric", e.train_metric},
                     {"val_metric", e.val_metric}});
  }
  nlohmann::json j{{"config", config},
                   {"curves", curve},
                   {"best_epoch", best_epoch},
                   {"best_val_metric", best_val_metric},
                   {"test_metric", test_metric},
                   {"parameters", parameters},
                   {"flops", flops}};
  if (with_time) j["seconds"] = seconds;
  return j;
}

Trainer::Trainer(const RunConfig& config, DatasetSplit data)
    : config_(config), data_(std::move(data)), rng_(config.seed ^ kShuffleSalt) {
  validate(config_);
  config_.model = derive_model_config(config_.model, data_);
  model_ = GEAETModel::create(config_.model, config_.seed);
  params_ = model_.parameters();
  optimizer_.weight_decay = config_.optim.weight_decay;
  schedule_ = {config_.optim.lr, config_.optim.warmup, config_.optim.epochs};
  train_pe_ = encode_all(data_.train, config_.model.pe);
  valid_pe_ = encode_all(data_.valid, config_.model.pe);
  test_pe_ = encode_all(data_.test, config_.model.pe);
  report_.config = geaet::to_json(config_);
  report_.config["model_resolved"] = geaet::to_json(config_.model);
  report_.parameters = model_.parameter_count();
  flops_start_ = FlopCounter::multiply_adds();
}

Batch Trainer::train_batch(std::span<const std::size_t> order) {
  std::vector<const Graph*> ptrs;
  ptrs.reserve(order.size());
  for (std::size_t i : order) ptrs.push_back(&data_.train[i]);
  Batch b = make_batch(ptrs);
  if (!train_pe_.empty()) {
    std::vector<Matrix> pe;
    pe.reserve(order.size());
    for (std::size_t i : order) {
      pe.push_back(train_pe_[i]);
      if (config_.model.pe.kind == PosEncKind::lappe && config_.model.pe.sign_flip) flip_signs(pe.back(), rng_);
    }
    attach_pos_enc(b, pe);
  }
  return b;
}

EpochStats Trainer::run_epoch() {
  if (done()) throw std::logic_error("Trainer::run_epoch: all epochs already ran");
  const auto t0 = std::chrono::steady_clock::now();
  const HeadKind head = config_.model.head;
  EpochStats stats;
  stats.epoch = epoch_;
  stats.lr = lr_at(epoch_, schedule_);

  std::vector<std::size_t> order(data_.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  double loss_sum = 0.0, metric_sum = 0.0;
  Index items = 0;
  const std::size_t bs = static_cast<std::size_t>(config_.optim.batch_size);
  int step = 0;
  for (std::size_t start = 0; start < order.size(); start += bs, ++step) {
    const std::size_t stop = std::min(order.size(), start + bs);
    const Batch b = train_batch(std::span(order).subspan(start, stop - start));
    zero_grad(params_);
    const Tensor out = model_.forward(b);
    const Tensor loss = batch_loss(head, out, b);
    if (!std::isfinite(loss.item())) {
      Tape::current().clear();
      throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch_) + ", step " +
                            std::to_string(step));
    }
    backward(loss);
    adamw_step(params_, optimizer_, stats.lr);
    const Index w = metric_items(head, b);
    loss_sum += loss.item() * static_cast<double>(w);
    metric_sum += batch_metric(head, out.value(), b) * static_cast<double>(w);
    items += w;
  }
  if (items > 0) {
    stats.train_loss = loss_sum / static_cast<double>(items);
    stats.train_metric = metric_sum / static_cast<double>(items);
  }

  const bool has_valid = !data_.valid.empty();
  stats.val_metric = has_valid ? evaluate(model_, data_.valid, config_.optim.batch_size, valid_pe_).metric : stats.train_metric;
  const bool better = report_.best_epoch < 0 || !has_valid ||
                      (higher_is_better(head) ? stats.val_metric > report_.best_val_metric
                                              : stats.val_metric < report_.best_val_metric);
  if (better) {
    report_.best_epoch = epoch_;
    report_.best_val_metric = stats.val_metric;
    best_ = snapshot(params_);
  }
  report_.curves.push_back(stats);
  ++epoch_;
  seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

RunReport Trainer::finish() {
  const auto t0 = std::chrono::steady_clock::now();
  if (!best_.empty()) restore(params_, best_);
  if (!data_.test.empty()) report_.test_metric = evaluate(model_, data_.test, config_.optim.batch_size, test_pe_).metric;
  report_.flops = FlopCounter::multiply_adds() - flops_start_;
  seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report_.seconds = seconds_;
  return report_;
}

RunReport train(const RunConfig& config, const DatasetSplit& data, GEAETModel* best) {
  Trainer t(config, data);
  while (!t.done()) t.run_epoch();
  RunReport r = t.finish();
  if (best) *best = t.model();
  return r;
}

}  // namespace geaet
