#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "geaet/checkpoint.hpp"
#include "geaet/experiments.hpp"
#include "geaet/grad_check.hpp"
#include "geaet/losses.hpp"
#include "geaet/optim.hpp"
#include "geaet/training.hpp"

using namespace geaet;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

RunConfig tiny_tree_config() {
  RunConfig c;
  c.seed = 3;
  c.dataset.generator = "tree";
  c.dataset.depth = 2;
  c.dataset.count = 40;
  c.model.hidden = 16;
  c.model.layers = 2;
  c.model.units = 4;
  c.model.self_heads = 2;
  c.model.ext_heads = 2;
  c.optim.epochs = 3;
  c.optim.warmup = 1;
  c.optim.batch_size = 8;
  c.optim.lr = 3e-3;
  return c;
}

RunConfig tiny_sbm_config() {
  RunConfig c = tiny_tree_config();
  c.dataset.generator = "sbm";
  c.dataset.sbm.n_per_cluster = 5;
  c.dataset.sbm.clusters = 3;
  c.dataset.sbm.count = 20;
  c.optim.epochs = 2;
  return c;
}

}  // namespace

TEST(Schedule, Examples) {
  const CosineSchedule s{0.001, 5, 100};
  EXPECT_NEAR(lr_at(2, s), 0.0006, 1e-18);
  EXPECT_DOUBLE_EQ(lr_at(5, s), 0.001);
  EXPECT_DOUBLE_EQ(lr_at(4, s), 0.001);
  const CosineSchedule big{1.0, 0, 100000};
  EXPECT_GT(lr_at(99999, big), 0.0);
  EXPECT_LT(lr_at(99999, big), 1e-8);
  EXPECT_THROW(lr_at(100, s), std::out_of_range);
  EXPECT_THROW(lr_at(-1, s), std::out_of_range);
}

TEST(Schedule, ContinuousAtWarmupEnd) {
  for (int w : {1, 3, 5, 10}) {
    const CosineSchedule s{0.01, w, 50};
    if (w > 0) EXPECT_LE(std::abs(lr_at(w - 1, s) - lr_at(w, s)), 0.01 / w + 1e-18);
    for (int e = w; e + 1 < 50; ++e) EXPECT_GE(lr_at(e, s), lr_at(e + 1, s));
  }
}

TEST(AdamW, ZeroGradientNoDecayKeepsParameters) {
  Tensor p(Matrix::Constant(2, 2, 1.5), true);
  const ParamList params{{"p", p}};
  AdamWState state;
  for (int i = 0; i < 5; ++i) adamw_step(params, state, 0.1);
  EXPECT_EQ(p.value(), Matrix::Constant(2, 2, 1.5));
  EXPECT_EQ(state.step, 5);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  Tensor p(Matrix::Constant(1, 1, 2.0), true);
  const ParamList params{{"p", p}};
  backward(sum(p));  // gradient 1
  AdamWState state;
  adamw_step(params, state, 0.1);
  // m_hat = 1 and v_hat = 1 after bias correction.
  EXPECT_NEAR(p.value()(0, 0), 2.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, DecayIsDecoupledAndGeometric) {
  Tensor p(Matrix::Constant(1, 3, 4.0), true);
  const ParamList params{{"p", p}};
  AdamWState state;
  state.weight_decay = 0.05;
  double expect = 4.0;
  for (int i = 0; i < 10; ++i) {
    adamw_step(params, state, 0.2);
    expect *= 1.0 - 0.2 * 0.05;
    EXPECT_EQ(p.value()(0, 1), expect);
  }
}

TEST(AdamW, MatchesReferenceLoop) {
  std::mt19937_64 rng(1);
  Tensor p(randn(2, 3, rng), true);
  const ParamList params{{"p", p}};
  AdamWState state;
  state.weight_decay = 0.01;
  Matrix theta = p.value(), m = Matrix::Zero(2, 3), v = Matrix::Zero(2, 3);
  const double lr = 0.05;
  for (int t = 1; t <= 6; ++t) {
    const Matrix target = randn(2, 3, rng);
    zero_grad(params);
    backward(sum(mul(p, Tensor(target))));
    adamw_step(params, state, lr);
    for (Index i = 0; i < theta.size(); ++i) {
      const double g = target.data()[i];
      m.data()[i] = 0.9 * m.data()[i] + 0.1 * g;
      v.data()[i] = 0.999 * v.data()[i] + 0.001 * g * g;
      const double mh = m.data()[i] / (1 - std::pow(0.9, t)), vh = v.data()[i] / (1 - std::pow(0.999, t));
      theta.data()[i] -= lr * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * theta.data()[i]);
    }
    EXPECT_LT((p.value() - theta).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Loss, CrossEntropyUniformIsLogC) {
  const std::vector<int> labels{0, 3, 2};
  EXPECT_NEAR(cross_entropy(Tensor(Matrix::Zero(3, 5)), labels).item(), std::log(5.0), 1e-15);
  const std::vector<int> bad{0, 5, 1};
  EXPECT_THROW(cross_entropy(Tensor(Matrix::Zero(3, 5)), bad), IndexError);
}

TEST(Loss, CrossEntropyGradientIsSoftmaxMinusOneHot) {
  std::mt19937_64 rng(2);
  const Matrix logits = randn(4, 3, rng);
  const std::vector<int> labels{2, 0, 1, 1};
  Tensor x(logits, true);
  backward(cross_entropy(x, labels));
  Matrix want = row_softmax(Tensor(logits)).value();
  for (Index i = 0; i < 4; ++i) want(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  want /= 4.0;
  EXPECT_LT((x.grad() - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(grad_check([&](const Tensor& t) { return cross_entropy(t, labels); }, Tensor(logits)), 1e-6);
  EXPECT_NEAR(cross_entropy(Tensor(logits), labels).item(),
              [&] {
                double s = 0;
                for (Index i = 0; i < 4; ++i) {
                  const double lse = std::log(logits.row(i).array().exp().sum());
                  s += lse - logits(i, labels[static_cast<std::size_t>(i)]);
                }
                return s / 4;
              }(),
              1e-14);
}

TEST(Loss, L1) {
  std::mt19937_64 rng(3);
  const Matrix t = randn(3, 2, rng);
  EXPECT_EQ(l1_loss(Tensor(t), t).item(), 0.0);
  Matrix p = t;
  p(0, 0) += 1.2;
  p(2, 1) -= 0.6;
  EXPECT_NEAR(l1_loss(Tensor(p), t).item(), 1.8 / 6.0, 1e-15);
  EXPECT_NEAR(mae(p, t), 1.8 / 6.0, 1e-15);
  const Matrix away = t.array() + 0.5;
  EXPECT_LT(grad_check([&](const Tensor& x) { return l1_loss(x, t); }, Tensor(away)), 1e-8);
}

TEST(Metric, AccuracyAndTieBreak) {
  Matrix logits(3, 3);
  logits << 1, 0, 0, 0, 2, 0, 0, 0, 3;
  const std::vector<int> right{0, 1, 2};
  EXPECT_EQ(accuracy(logits, right), 1.0);
  Matrix tie(1, 2);
  tie << 0.5, 0.5;
  EXPECT_EQ(accuracy(tie, std::vector<int>{0}), 1.0);
  EXPECT_EQ(accuracy(tie, std::vector<int>{1}), 0.0);
}

TEST(Metric, RandomLogitsAreAtChance) {
  std::mt19937_64 rng(4);
  const Matrix logits = randn(10000, 4, rng);
  std::vector<int> labels(10000);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int& l : labels) l = pick(rng);
  EXPECT_NEAR(accuracy(logits, labels), 0.25, 0.02);
}

TEST(Training, OverfitsEightTrees) {
  RunConfig c = tiny_tree_config();
  c.optim.epochs = 200;
  c.optim.warmup = 5;
  c.optim.batch_size = 8;
  DatasetSplit data = generate_tree_neighbour_match(2, 8, 11, {1.0, 0.0});
  data.valid = data.train;
  data.test = data.train;
  Trainer trainer(c, data);
  double best = 0.0;
  int reached = -1;
  while (!trainer.done()) {
    const EpochStats s = trainer.run_epoch();
    best = std::max(best, s.val_metric);
    if (s.val_metric == 1.0 && reached < 0) reached = s.epoch;
  }
  EXPECT_EQ(best, 1.0);
  EXPECT_GE(reached, 0);
  const RunReport r = trainer.finish();
  EXPECT_EQ(r.test_metric, 1.0);
}

TEST(Training, DeterministicGivenSeed) {
  const RunConfig c = tiny_tree_config();
  const DatasetSplit data = load_or_generate(c.dataset);
  GEAETModel a, b;
  const RunReport ra = train(c, data, &a);
  const RunReport rb = train(c, data, &b);
  EXPECT_EQ(ra.to_json(false).dump(), rb.to_json(false).dump());
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
  EXPECT_EQ(ra.curves.size(), 3u);
  EXPECT_GT(ra.flops, 0u);
  EXPECT_EQ(ra.parameters, a.parameter_count());
}

TEST(Training, BestModelReproducesReportedMetrics) {
  RunConfig c = tiny_sbm_config();
  c.model.pe = {PosEncKind::lappe, 3, true};
  const DatasetSplit data = load_or_generate(c.dataset);
  GEAETModel best;
  const RunReport r = train(c, data, &best);
  EXPECT_EQ(evaluate(best, data.test).metric, r.test_metric);
  EXPECT_EQ(evaluate(best, data.valid).metric, r.best_val_metric);
  const auto j = r.to_json();
  for (const char* key : {"config", "curves", "test_metric", "flops", "seconds"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j["curves"][0].contains("lr"));
  EXPECT_TRUE(j["curves"][0].contains("train_loss"));
  EXPECT_TRUE(j["curves"][0].contains("val_metric"));
}

TEST(Training, RegressionRunsWithMae) {
  std::mt19937_64 rng(5);
  DatasetSplit data;
  for (int i = 0; i < 24; ++i) {
    Graph g = random_graph(5, 6, 2, 0, rng);
    g.target = {TargetKind::graph_reg, {}, {std::get<Matrix>(g.node_features).mean()}};
    (i < 16 ? data.train : i < 20 ? data.valid : data.test).push_back(std::move(g));
  }
  RunConfig c = tiny_tree_config();
  c.optim.epochs = 4;
  const RunReport r = train(c, data);
  EXPECT_FALSE(higher_is_better(HeadKind::graph_regress));
  EXPECT_GE(r.test_metric, 0.0);
  EXPECT_TRUE(std::isfinite(r.test_metric));
}

TEST(Training, DivergenceNamesTheStep) {
  RunConfig c = tiny_tree_config();
  c.optim.lr = std::numeric_limits<double>::infinity();
  const DatasetSplit data = load_or_generate(c.dataset);
  Trainer trainer(c, data);
  try {
    trainer.run_epoch();
    trainer.run_epoch();
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Sweeps, TableShapes) {
  const std::vector<std::uint64_t> seeds{1, 2};
  const SweepTable heads = sweep_heads(tiny_sbm_config(), {1, 2, 4, 8}, seeds, 1);
  ASSERT_EQ(heads.rows.size(), 4u);
  for (const auto& row : heads.rows) {
    EXPECT_EQ(row.test.size(), 2u);
    EXPECT_NEAR(row.mean, (row.test[0] + row.test[1]) / 2, 1e-15);
    EXPECT_NEAR(row.stddev, std::abs(row.test[0] - row.test[1]) / std::sqrt(2.0), 1e-15);
  }
  const SweepTable pe = sweep_pe(tiny_sbm_config(), seeds, 1);
  ASSERT_EQ(pe.rows.size(), 3u);
  EXPECT_EQ(pe.rows[0].setting, "pe=none");
  EXPECT_EQ(pe.rows[1].setting, "pe=lappe");
  EXPECT_EQ(pe.rows[2].setting, "pe=rwpe");
  const SweepTable abl = sweep_ablation(tiny_sbm_config(), seeds, 2);
  ASSERT_EQ(abl.rows.size(), 4u);
  EXPECT_EQ(abl.rows[0].setting, "full");
  const auto j = abl.to_json();
  EXPECT_EQ(j["rows"].size(), 4u);
  EXPECT_TRUE(j["rows"][0].contains("mean"));
}

TEST(Sweeps, ParallelMatchesSerial) {
  const std::vector<std::uint64_t> seeds{4, 5};
  const SweepTable a = sweep_ablation(tiny_sbm_config(), seeds, 1);
  const SweepTable b = sweep_ablation(tiny_sbm_config(), seeds, 3);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Stats, SampleStddevAndSlope) {
  EXPECT_EQ(sample_stddev({1.0}), 0.0);
  EXPECT_NEAR(sample_stddev({1.0, 2.0, 3.0, 4.0}), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
}

TEST(Salience, Bounds) {
  Eigen::RowVectorXd uniform = Eigen::RowVectorXd::Constant(4, 0.25);
  EXPECT_NEAR(salience(uniform), 0.0, 1e-15);
  Eigen::RowVectorXd peak = Eigen::RowVectorXd::Zero(4);
  peak(2) = 1.0;
  EXPECT_NEAR(salience(peak), 1.0, 1e-15);
  EXPECT_EQ(salience(Eigen::RowVectorXd::Ones(1)), 0.0);
}
