// Command-line front end: dataset generation, training, evaluation and the
// verification / benchmarking drivers.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geaet/checkpoint.hpp"
#include "geaet/config.hpp"
#include "geaet/experiments.hpp"
#include "geaet/jsonl.hpp"
#include "geaet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace geaet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_config_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override a config value, e.g. --set model.hidden=48")->allow_extra_args(false);
  cmd->add_option("--seed", c.seed, "Run seed (replaces the config value)");
}

RunConfig resolve(const Common& c) {
  std::vector<std::string> sets = c.sets;
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  return resolve_config(c.config, sets);
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::vector<Graph>& pick_split(const DatasetSplit& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "valid") return d.valid;
  if (name == "test") return d.test;
  throw ConfigError("--split: expected train, valid or test, got '" + name + "'");
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string dataset;
  int r = 3;
  int count = 0;
  std::uint64_t seed = 0;
  SbmParams sbm;
  SplitFractions split;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  DatasetSplit data;
  if (a.dataset == "tree") {
    if (a.r < 2) throw ConfigError("--r: depth must be at least 2");
    const int count = a.count > 0 ? a.count : 2000;
    data = generate_tree_neighbour_match(a.r, count, a.seed, a.split);
  } else if (a.dataset == "sbm") {
    SbmParams p = a.sbm;
    if (a.count > 0) p.count = a.count;
    p.split = a.split;
    try {
      validate(p);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    data = generate_sbm_cluster(p, a.seed);
  } else {
    throw ConfigError("dataset must be tree or sbm, got '" + a.dataset + "'");
  }
  save_dataset(data, a.out);
  write_json(fs::path(a.out) / "config.resolved.json",
             {{"generator", data.generator}, {"seed", data.seed}, {"params", data.params}});
  std::cout << "wrote " << data.train.size() + data.valid.size() + data.test.size() << " graphs (" << data.train.size()
            << " train, " << data.valid.size() << " valid, " << data.test.size() << " test) to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train / eval

int run_train(const Common& c) {
  const RunConfig config = resolve(c);
  const fs::path out = c.out;
  fs::create_directories(out);
  write_json(out / "config.resolved.json", to_json(config));
  const DatasetSplit data = load_or_generate(config.dataset);
  Trainer trainer(config, data);
  while (!trainer.done()) {
    const EpochStats e = trainer.run_epoch();
    std::cout << "epoch " << e.epoch << " lr " << e.lr << " loss " << e.train_loss << " train " << e.train_metric
              << " val " << e.val_metric << std::endl;
  }
  const RunReport report = trainer.finish();
  save_checkpoint(trainer.model(), out / "best.ckpt");
  write_json(out / "report.json", report.to_json());
  std::cout << "best epoch " << report.best_epoch << " val " << fmt(report.best_val_metric) << " test "
            << fmt(report.test_metric) << " (" << report.seconds << " s)\n";
  return kExitOk;
}

struct EvalArgs {
  Common common;
  std::string run;
  std::string checkpoint;
  std::string split = "test";
};

// The dataset comes from the run directory's resolved config unless a
// config file or overrides are given.
RunConfig eval_config(const Common& c, const std::string& run) {
  if (!run.empty() && c.config.empty()) {
    Common copy = c;
    copy.config = (fs::path(run) / "config.resolved.json").string();
    return resolve(copy);
  }
  return resolve(c);
}

std::string checkpoint_path(const std::string& run, const std::string& checkpoint) {
  if (!checkpoint.empty()) return checkpoint;
  if (run.empty()) throw ConfigError("give --checkpoint or --run");
  return (fs::path(run) / "best.ckpt").string();
}

int run_eval(const EvalArgs& a) {
  const RunConfig config = eval_config(a.common, a.run);
  const GEAETModel model = load_checkpoint(checkpoint_path(a.run, a.checkpoint));
  const DatasetSplit data = load_or_generate(config.dataset);
  const EvalResult r = evaluate(model, pick_split(data, a.split), config.optim.batch_size);
  const char* metric = higher_is_better(model.config().head) ? "accuracy" : "mae";
  std::cout << a.split << " " << metric << " " << fmt(r.metric) << " loss " << fmt(r.loss) << "\n";
  if (!a.common.out.empty()) {
    write_json(fs::path(a.common.out) / "config.resolved.json", to_json(config));
    write_json(fs::path(a.common.out) / "eval.json", {{"split", a.split}, {metric, r.metric}, {"loss", r.loss}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck(std::uint64_t seed, const std::string& corrupt) {
  if (!corrupt.empty()) geaet::testing::set_corrupted_backward(corrupt);
  const auto entries = run_gradcheck_suite(seed);
  std::vector<std::string> failed;
  for (const auto& e : entries) {
    const bool ok = e.max_rel_err < kGradCheckTolerance;
    std::printf("%-40s %.3e %s\n", e.component.c_str(), e.max_rel_err, ok ? "ok" : "FAIL");
    if (!ok) failed.push_back(e.component);
  }
  std::printf("%zu components, %zu failed\n", entries.size(), failed.size());
  if (failed.empty()) return kExitOk;
  std::string names;
  for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "gradient check failed for: %s\n", names.c_str());
  if (!corrupt.empty()) std::fprintf(stderr, "backward of op '%s' was deliberately corrupted\n", corrupt.c_str());
  return kExitFailure;
}

// ---------------------------------------------------------------- attn-dump

struct DumpArgs {
  EvalArgs eval;
  int graphs = 4;
};

int run_attn_dump(const DumpArgs& a) {
  const RunConfig config = eval_config(a.eval.common, a.eval.run);
  const GEAETModel model = load_checkpoint(checkpoint_path(a.eval.run, a.eval.checkpoint));
  const DatasetSplit data = load_or_generate(config.dataset);
  const auto& graphs = pick_split(data, a.eval.split);
  const std::size_t count = std::min(graphs.size(), static_cast<std::size_t>(std::max(a.graphs, 0)));
  std::string text;
  for (std::size_t i = 0; i < count; ++i) {
    text += attention_record(model, graphs[i], static_cast<Index>(i)).dump() + "\n";
  }
  const fs::path out = a.eval.common.out;
  write_json(out / "config.resolved.json", to_json(config));
  write_text_atomic(out / "attn.jsonl", text);
  std::cout << "wrote attention for " << count << " graphs to " << (out / "attn.jsonl").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- bench

int run_bench_cmd(const std::string& out, std::uint64_t seed) {
  const auto series = run_bench({128, 256, 512, 1024, 2048}, seed);
  for (const auto& s : series) {
    std::printf("%s\n  %8s %10s %14s %10s\n", s.variant.c_str(), "n", "arcs", "flops", "ms");
    for (const auto& r : s.rows) {
      std::printf("  %8lld %10lld %14llu %10.3f\n", static_cast<long long>(r.n), static_cast<long long>(r.arcs),
                  static_cast<unsigned long long>(r.flops), r.ms);
    }
    std::printf("  flop exponent %.4f, time exponent %.4f\n", s.flop_exponent, s.time_exponent);
  }
  if (!out.empty()) {
    write_json(fs::path(out) / "config.resolved.json", {{"seed", seed}, {"sizes", {128, 256, 512, 1024, 2048}}});
    write_json(fs::path(out) / "bench.json", bench_to_json(series));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  Common common;
  std::string kind;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  std::vector<Index> heads{1, 2, 4, 8};
};

int run_sweep_cmd(const SweepArgs& a) {
  const RunConfig base = resolve(a.common);
  SweepTable table;
  if (a.kind == "heads") {
    table = sweep_heads(base, a.heads, a.seeds, a.common.jobs);
  } else if (a.kind == "pe") {
    table = sweep_pe(base, a.seeds, a.common.jobs);
  } else if (a.kind == "ablation") {
    table = sweep_ablation(base, a.seeds, a.common.jobs);
  } else {
    throw ConfigError("sweep kind must be heads, pe or ablation, got '" + a.kind + "'");
  }
  table.print(std::cout);
  if (!a.common.out.empty()) {
    write_json(fs::path(a.common.out) / "config.resolved.json", to_json(base));
    write_json(fs::path(a.common.out) / "sweep.json", table.to_json());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  geaet::tune_allocator();
  CLI::App app{"Graph external attention toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as JSONL splits");
  generate->add_option("dataset", gen.dataset, "tree or sbm")->required();
  generate->add_option("--r", gen.r, "Tree depth");
  generate->add_option("--count", gen.count, "Number of graphs");
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--clusters", gen.sbm.clusters, "SBM cluster count");
  generate->add_option("--per-cluster", gen.sbm.n_per_cluster, "SBM nodes per cluster");
  generate->add_option("--p-in", gen.sbm.p_in, "SBM within-cluster edge probability");
  generate->add_option("--p-out", gen.sbm.p_out, "SBM cross-cluster edge probability");
  generate->add_option("--train-fraction", gen.split.train);
  generate->add_option("--valid-fraction", gen.split.valid);
  generate->add_option("--out", gen.out, "Output directory")->required();

  Common train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write report.json and best.ckpt");
  add_config_options(train_cmd, train_args);
  train_cmd->add_option("--out", train_args.out, "Run directory")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_config_options(eval_cmd, eval_args.common);
  eval_cmd->add_option("--run", eval_args.run, "Run directory written by train");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--split", eval_args.split, "train, valid or test");
  eval_cmd->add_option("--out", eval_args.common.out, "Directory for eval.json");

  std::uint64_t gc_seed = 0;
  std::string corrupt;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every op and layer");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--corrupt", corrupt)->group("");  // test fixture

  DumpArgs dump_args;
  auto* dump = app.add_subcommand("attn-dump", "Export attention matrices and per-node salience");
  add_config_options(dump, dump_args.eval.common);
  dump->add_option("--run", dump_args.eval.run, "Run directory written by train");
  dump->add_option("--checkpoint", dump_args.eval.checkpoint, "Checkpoint file");
  dump->add_option("--split", dump_args.eval.split, "train, valid or test");
  dump->add_option("--graphs", dump_args.graphs, "Number of graphs to export");
  dump->add_option("--out", dump_args.eval.common.out, "Output directory")->required();

  std::string bench_out;
  std::uint64_t bench_seed = 0;
  auto* bench = app.add_subcommand("bench", "Forward-pass cost scaling on random sparse graphs");
  bench->add_option("--out", bench_out, "Directory for bench.json");
  bench->add_option("--seed", bench_seed);

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Multi-seed sweep over heads, positional encodings or unit ablations");
  sweep->add_option("kind", sweep_args.kind, "heads, pe or ablation")->required();
  add_config_options(sweep, sweep_args.common);
  sweep->add_option("--seeds", sweep_args.seeds, "Run seeds")->delimiter(',');
  sweep->add_option("--heads", sweep_args.heads, "External head counts")->delimiter(',');
  sweep->add_option("--jobs", sweep_args.common.jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_args.common.out, "Directory for sweep.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*generate) return run_generate(gen);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*gradcheck) return run_gradcheck(gc_seed, corrupt);
    if (*dump) return run_attn_dump(dump_args);
    if (*bench) return run_bench_cmd(bench_out, bench_seed);
    if (*sweep) return run_sweep_cmd(sweep_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
