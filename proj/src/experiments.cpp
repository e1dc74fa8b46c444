#include "geaet/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <set>
#include <thread>

#include "geaet/grad_check.hpp"
#include "geaet/losses.hpp"

namespace geaet {

using nlohmann::json;

Graph random_graph(Index n, Index edges, Index node_dim, Index edge_dim, std::mt19937_64& rng, int classes) {
  const Index max_edges = n * (n - 1) / 2;
  if (edges > max_edges) throw std::invalid_argument("random_graph: too many edges for " + std::to_string(n) + " nodes");
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::normal_distribution<double> normal;
  std::set<std::pair<Index, Index>> seen;
  Graph g;
  g.num_nodes = n;
  while (static_cast<Index>(seen.size()) < edges) {
    Index a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) continue;
    g.edges.push_back({a, b});
    g.edges.push_back({b, a});
  }
  if (node_dim > 0) {
    Matrix x(n, node_dim);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    g.node_features = std::move(x);
  }
  if (edge_dim > 0) {
    Matrix e(g.num_arcs(), edge_dim);
    for (Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
    g.edge_features = std::move(e);
  }
  g.target = {TargetKind::graph_class, {std::uniform_int_distribution<int>(0, classes - 1)(rng)}, {}};
  return g;
}

// ---------------------------------------------------------------- sweeps

namespace {

std::string model_label(const ModelConfig& m) {
  std::string name;
  switch (m.mpnn) {
    case MpnnKind::none: break;
    case MpnnKind::gcn: name = "GCN"; break;
    case MpnnKind::gatedgcn: name = "GatedGCN"; break;
    case MpnnKind::gine: name = "GINE"; break;
  }
  auto join = [&](const char* part) { name += name.empty() ? part : std::string("+") + part; };
  if (m.tlayer) join("Transformer");
  if (m.geanet) join("GEANet");
  return name.empty() ? "identity" : name;
}

}  // namespace

double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

json SweepTable::to_json() const {
  json rows_json = json::array();
  for (const SweepRow& r : rows) {
    rows_json.push_back({{"model", r.model},
                         {"setting", r.setting},
                         {"test", r.test},
                         {"valid", r.valid},
                         {"mean", r.mean},
                         {"std", r.stddev}});
  }
  return json{{"sweep", sweep}, {"metric", metric}, {"seeds", seeds}, {"rows", rows_json}};
}

void SweepTable::print(std::ostream& os) const {
  os << "sweep " << sweep << " (" << metric << ", " << seeds.size() << " seeds)\n";
  for (const SweepRow& r : rows) {
    os << "  " << std::left << std::setw(28) << r.model << std::setw(18) << r.setting << std::right << std::fixed
       << std::setprecision(4) << r.mean << " +- " << r.stddev << "\n";
  }
  os.unsetf(std::ios::floatfield);
}

SweepTable run_sweep(const std::string& name, const std::vector<SweepVariant>& variants,
                     const std::vector<std::uint64_t>& seeds, int jobs) {
  if (variants.empty()) throw std::invalid_argument("run_sweep: no variants");
  if (seeds.empty()) throw std::invalid_argument("run_sweep: no seeds");
  for (const SweepVariant& v : variants) validate(v.config);
  const DatasetSplit data = load_or_generate(variants.front().config.dataset);

  const std::size_t tasks = variants.size() * seeds.size();
  std::vector<RunReport> reports(tasks);
  std::vector<std::exception_ptr> errors(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
      try {
        RunConfig c = variants[t / seeds.size()].config;
        c.seed = seeds[t % seeds.size()];
        reports[t] = train(c, data);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks)));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SweepTable table;
  table.sweep = name;
  table.seeds = seeds;
  const HeadKind head = derive_model_config(variants.front().config.model, data).head;
  table.metric = head == HeadKind::graph_regress ? "mae" : "accuracy";
  for (std::size_t v = 0; v < variants.size(); ++v) {
    SweepRow row;
    row.model = model_label(variants[v].config.model);
    row.setting = variants[v].setting;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const RunReport& r = reports[v * seeds.size() + s];
      row.test.push_back(r.test_metric);
      row.valid.push_back(r.best_val_metric);
    }
    row.mean = std::accumulate(row.test.begin(), row.test.end(), 0.0) / static_cast<double>(row.test.size());
    row.stddev = sample_stddev(row.test);
    table.rows.push_back(std::move(row));
  }
  return table;
}

SweepTable sweep_heads(const RunConfig& base, const std::vector<Index>& heads, const std::vector<std::uint64_t>& seeds,
                       int jobs) {
  std::vector<SweepVariant> variants;
  for (Index h : heads) {
    RunConfig c = base;
    c.model.ext_heads = h;
    variants.push_back({"heads=" + std::to_string(h), c});
  }
  return run_sweep("heads", variants, seeds, jobs);
}

SweepTable sweep_pe(const RunConfig& base, const std::vector<std::uint64_t>& seeds, int jobs) {
  const int k = base.model.pe.k > 0 ? base.model.pe.k : 4;
  std::vector<SweepVariant> variants;
  for (PosEncKind kind : {PosEncKind::none, PosEncKind::lappe, PosEncKind::rwpe}) {
    RunConfig c = base;
    c.model.pe.kind = kind;
    c.model.pe.k = kind == PosEncKind::none ? 0 : k;
    variants.push_back({std::string("pe=") + to_string(kind), c});
  }
  return run_sweep("pe", variants, seeds, jobs);
}

SweepTable sweep_ablation(const RunConfig& base, const std::vector<std::uint64_t>& seeds, int jobs) {
  std::vector<SweepVariant> variants;
  auto add = [&](const char* setting, auto&& tweak) {
    RunConfig c = base;
    c.model.unit_toggles = {};
    tweak(c.model.unit_toggles);
    variants.push_back({setting, c});
  };
  add("full", [](UnitToggles&) {});
  add("no_node_units", [](UnitToggles& t) { t.node = false; });
  add("no_edge_units", [](UnitToggles& t) { t.edge = false; });
  add("no_shared_unit", [](UnitToggles& t) { t.shared = false; });
  return run_sweep("ablation", variants, seeds, jobs);
}

// ---------------------------------------------------------------- bench

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<BenchSeries> run_bench(const std::vector<Index>& sizes, std::uint64_t seed) {
  struct Variant {
    const char* name;
    MpnnKind mpnn;
    bool tlayer;
  };
  const Variant variants[] = {{"geanet", MpnnKind::none, false}, {"geaet_self_attention", MpnnKind::gcn, true}};
  constexpr Index kNodeDim = 4;
  std::vector<BenchSeries> out;
  for (const Variant& v : variants) {
    ModelConfig mc;
    mc.hidden = 8;
    mc.layers = 2;
    mc.units = 4;
    mc.self_heads = 2;
    mc.ext_heads = 2;
    mc.mpnn = v.mpnn;
    mc.tlayer = v.tlayer;
    mc.geanet = true;
    mc.head = HeadKind::graph_classify;
    mc.outputs = 2;
    mc.node_input = {FeatureSchema::Kind::dense, kNodeDim, {}};
    const GEAETModel model = GEAETModel::create(mc, seed);
    BenchSeries series;
    series.variant = v.name;
    std::mt19937_64 rng(seed);
    for (Index n : sizes) {
      const Graph g = random_graph(n, 2 * n, kNodeDim, 0, rng);  // mean degree 4
      const Batch b = make_batch(std::span<const Graph>(&g, 1));
      NoGradGuard no_grad;
      BenchRow row{n, g.num_arcs(), 0, 0.0};
      for (int rep = 0; rep < 3; ++rep) {
        const std::uint64_t before = FlopCounter::multiply_adds();
        const auto t0 = std::chrono::steady_clock::now();
        model.forward(b, nullptr, true);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        row.flops = FlopCounter::multiply_adds() - before;
        row.ms = rep == 0 ? ms : std::min(row.ms, ms);
      }
      series.rows.push_back(row);
    }
    std::vector<double> xs, fs, ts;
    for (const BenchRow& r : series.rows) {
      xs.push_back(static_cast<double>(r.n));
      fs.push_back(static_cast<double>(r.flops));
      ts.push_back(std::max(r.ms, 1e-6));
    }
    series.flop_exponent = loglog_slope(xs, fs);
    series.time_exponent = loglog_slope(xs, ts);
    out.push_back(std::move(series));
  }
  return out;
}

json bench_to_json(const std::vector<BenchSeries>& series) {
  json out = json::array();
  for (const BenchSeries& s : series) {
    json rows = json::array();
    for (const BenchRow& r : s.rows) rows.push_back({{"n", r.n}, {"arcs", r.arcs}, {"flops", r.flops}, {"ms", r.ms}});
    out.push_back({{"variant", s.variant},
                   {"rows", rows},
                   {"flop_exponent", s.flop_exponent},
                   {"time_exponent", s.time_exponent}});
  }
  return out;
}

// ---------------------------------------------------------------- attention dump

double salience(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const Index s = row.size();
  if (s <= 1) return 0.0;
  double h = 0.0;
  for (Index j = 0; j < s; ++j) {
    if (row(j) > 0) h -= row(j) * std::log(row(j));
  }
  return 1.0 - h / std::log(static_cast<double>(s));
}

namespace {

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

json attention_record(const GEAETModel& model, const Graph& g, Index index) {
  NoGradGuard no_grad;
  const Graph* ptr = &g;
  const Batch b = prepare_batch(model, std::span<const Graph* const>(&ptr, 1));
  ForwardTrace trace;
  model.forward(b, &trace);

  json layers = json::array();
  const Matrix* last = nullptr;
  Matrix mean_alpha;
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const LayerTrace& t = trace.layers[l];
    json gea = json::array(), self = json::array();
    for (const Matrix& a : t.gea) gea.push_back(matrix_rows(a));
    for (const auto& per_graph : t.self) self.push_back(matrix_rows(per_graph.at(0)));
    layers.push_back({{"layer", l}, {"gea", {{"heads", gea}}}, {"self", {{"heads", self}}}});
    if (!t.gea.empty()) {
      mean_alpha = Matrix::Zero(t.gea.front().rows(), t.gea.front().cols());
      for (const Matrix& a : t.gea) mean_alpha += a;
      mean_alpha /= static_cast<double>(t.gea.size());
      last = &mean_alpha;
    }
  }
  json sal = json::array();
  if (last) {
    for (Index i = 0; i < last->rows(); ++i) sal.push_back(salience(last->row(i)));
  }
  return json{{"graph", index}, {"layers", layers}, {"salience", sal}};
}

// ---------------------------------------------------------------- gradient suite

namespace {

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  Matrix randn(Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal_(rng_);
    return m;
  }
  // Values pushed at least 0.1 away from zero (relu kinks, divisions).
  Matrix away_from_zero(Index r, Index c) {
    Matrix m = randn(r, c);
    return m.unaryExpr([](double v) { return v >= 0 ? v + 0.1 : v - 0.1; });
  }
  Tensor param(Matrix m) { return Tensor(std::move(m), true); }
  Tensor param(Index r, Index c) { return param(randn(r, c)); }

  // Loss = sum(out .* R) with a fixed random R so no gradient is trivially
  // zero (plain sums through softmaxes would be).
  void check(const std::string& name, std::vector<Tensor> params, const std::function<Tensor()>& fn) {
    Matrix weights;
    {
      NoGradGuard no_grad;
      const Tensor probe = fn();
      weights = randn(probe.rows(), probe.cols());
    }
    const Tensor w(weights);
    const GradCheckResult r = grad_check([&] { return sum(mul(fn(), w)); }, params);
    entries.push_back({name, r.max_rel_err});
  }

  void check_loss(const std::string& name, std::vector<Tensor> params, const std::function<Tensor()>& loss) {
    entries.push_back({name, grad_check(loss, params).max_rel_err});
  }

  std::mt19937_64& rng() { return rng_; }
  std::vector<GradCheckEntry> entries;

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

ParamList::value_type* find_param(ParamList& list, const std::string& name) {
  for (auto& p : list) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::vector<Tensor> tensors_of(const ParamList& list) {
  std::vector<Tensor> out;
  for (const auto& p : list) out.push_back(p.tensor);
  return out;
}

// Two small graphs with dense node and edge features.
std::vector<Graph> suite_graphs(std::mt19937_64& rng, Index node_dim, Index edge_dim, int classes) {
  std::vector<Graph> gs;
  gs.push_back(random_graph(5, 5, node_dim, edge_dim, rng, classes));
  gs.push_back(random_graph(4, 3, node_dim, edge_dim, rng, classes));
  return gs;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed) {
  Suite s(seed);
  constexpr Index d = 8;
  const Segments seg = Segments::from_sizes(std::vector<Index>{2, 3});

  // Ops.
  {
    Tensor a = s.param(3, 4), b = s.param(4, 2), c = s.param(2, 4);
    s.check("matmul", {a, b}, [=] { return matmul(a, b); });
    s.check("matmul_nt", {a, c}, [=] { return matmul_nt(a, c); });
    s.check("transpose", {a}, [=] { return transpose(a); });
  }
  {
    Tensor a = s.param(3, 4), row = s.param(1, 4), sc = s.param(1, 1), same = s.param(3, 4);
    Tensor den = s.param(s.away_from_zero(3, 4));
    s.check("add", {a, row}, [=] { return add(a, row); });
    s.check("sub", {a, sc}, [=] { return sub(a, sc); });
    s.check("mul", {a, same}, [=] { return mul(a, same); });
    s.check("div", {a, den}, [=] { return div(a, den); });
    s.check("scale", {a}, [=] { return add_scalar(scale(a, -1.7), 0.3); });
  }
  {
    Tensor a = s.param(s.away_from_zero(3, 4)), b = s.param(3, 4);
    s.check("relu", {a}, [=] { return relu(a); });
    s.check("sigmoid", {b}, [=] { return sigmoid(b); });
  }
  {
    Tensor a = s.param(5, 3), g = s.param(1, 3), bt = s.param(1, 3);
    Tensor pos = s.param(s.randn(5, 3).array().exp().matrix());
    s.check("row_softmax", {a}, [=] { return row_softmax(a); });
    s.check("col_softmax", {a}, [=] { return col_softmax(a); });
    s.check("segment_col_softmax", {a}, [=] { return segment_col_softmax(a, seg); });
    s.check("row_l1_normalize", {pos}, [=] { return row_l1_normalize(pos, 1e-12); });
    s.check("layer_norm", {a, g, bt}, [=] { return layer_norm(a, g, bt); });
    s.check("double_normalize", {a}, [=] { return double_normalize(a, seg); });
  }
  {
    Tensor a = s.param(4, 3), src = s.param(5, 3);
    const std::vector<Index> idx{2, 0, 3, 2, 1};
    const std::vector<double> coeff{0.5, -1.0, 2.0, 0.25};
    s.check("gather_rows", {a}, [=] { return gather_rows(a, idx); });
    s.check("scatter_add_rows", {src}, [=] { return scatter_add_rows(src, idx, 4); });
    s.check("mul_rows", {a}, [=] { return mul_rows(a, coeff); });
    const std::vector<Index> to{1, 1, 0, 3};
    s.check("propagate", {a}, [=] { return propagate(a, std::span(idx).first(4), to, coeff, 4); });
  }
  {
    Tensor a = s.param(3, 2), b = s.param(3, 1), c = s.param(3, 3);
    s.check("concat_cols", {a, b, c}, [=] { return concat_cols(std::vector<Tensor>{a, b, c}); });
    s.check("slice_cols", {c}, [=] { return slice_cols(c, 1, 3); });
    Tensor x = s.param(5, 3);
    s.check("sum", {x}, [=] { return sum(x); });
    s.check("mean", {x}, [=] { return mean(x); });
    s.check("segment_mean", {x}, [=] { return segment_mean(x, seg); });
  }
  {
    Tensor q = s.param(5, 4), k = s.param(5, 4), v = s.param(5, 3);
    s.check("segment_attention", {q, k, v}, [=] { return segment_attention(q, k, v, seg, 0.5); });
  }
  {
    Tensor logits = s.param(4, 3);
    const std::vector<int> labels{0, 2, 1, 2};
    s.check_loss("cross_entropy", {logits}, [=] { return cross_entropy(logits, labels); });
    const Matrix target = s.randn(4, 2);
    Tensor pred = s.param(Matrix(target + s.away_from_zero(4, 2)));
    s.check_loss("l1_loss", {pred}, [=] { return l1_loss(pred, target); });
  }

  // Attention layers.
  {
    const SelfAttentionLayer layer = SelfAttentionLayer::create(d, 2, s.rng());
    Tensor x = s.param(5, d);
    ParamList p;
    layer.collect(p, "self");
    std::vector<Tensor> ts = tensors_of(p);
    ts.push_back(x);
    s.check("self_attention", ts, [=] { return self_attention(x, layer, seg); });
  }
  for (Index heads : {Index{1}, Index{2}}) {
    for (int mask = 0; mask < 8; ++mask) {
      const UnitToggles toggles{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
      const GEANetBlock block = GEANetBlock::create(d, 4, heads, s.rng(), toggles);
      Tensor x = s.param(5, d), e = s.param(6, d);
      const Segments eseg = Segments::from_sizes(std::vector<Index>{2, 4});
      ParamList p;
      block.collect(p, "geanet");
      std::vector<Tensor> ts = tensors_of(p);
      ts.push_back(x);
      ts.push_back(e);
      std::string name = "geanet[H=" + std::to_string(heads) + std::string(",node=") + (toggles.node ? "1" : "0") +
                         ",edge=" + (toggles.edge ? "1" : "0") + ",shared=" + (toggles.shared ? "1" : "0") + "]";
      s.check(name, ts, [=] {
        const StreamPair out = geanet(x, e, block, seg, eseg);
        return concat_cols(std::vector<Tensor>{transpose(out.x), transpose(out.e)});
      });
    }
  }
  {
    const ExternalUnits units = ExternalUnits::create(d, 3, s.rng());
    Tensor x = s.param(5, d);
    ParamList p;
    units.collect(p, "units");
    std::vector<Tensor> ts = tensors_of(p);
    ts.push_back(x);
    s.check("gea_forward", ts, [=] { return gea_forward(x, units, Stream::node, seg); });
  }

  // Message passing.
  std::vector<Graph> graphs = suite_graphs(s.rng(), d, d, 3);
  const Batch batch = make_batch(graphs);
  const ArcIndex arcs = ArcIndex::of(batch);
  const Tensor xin = s.param(std::get<Matrix>(batch.node_features));
  const Tensor ein = s.param(std::get<Matrix>(batch.edge_features));
  {
    const GCNLayer gcn = GCNLayer::create(d, s.rng());
    ParamList p;
    gcn.collect(p, "gcn");
    std::vector<Tensor> ts = tensors_of(p);
    ts.push_back(xin);
    s.check("gcn", ts, [=] { return gcn(xin, ein, arcs).x; });
  }
  {
    const GatedGCNLayer layer = GatedGCNLayer::create(d, s.rng());
    ParamList p;
    layer.collect(p, "gatedgcn");
    std::vector<Tensor> ts = tensors_of(p);
    ts.push_back(xin);
    ts.push_back(ein);
    s.check("gatedgcn", ts, [=] {
      const NodeEdge out = layer(xin, ein, arcs);
      return concat_cols(std::vector<Tensor>{transpose(out.x), transpose(out.e)});
    });
  }
  {
    GINELayer layer = GINELayer::create(d, s.rng());
    layer.epsilon.mutable_value()(0, 0) = 0.3;
    ParamList p;
    layer.collect(p, "gine");
    std::vector<Tensor> ts = tensors_of(p);
    ts.push_back(xin);
    ts.push_back(ein);
    s.check("gine", ts, [=] { return layer(xin, ein, arcs).x; });
  }
  {
    const FeedForward ffn = FeedForward::create(d, s.rng());
    ParamList p;
    ffn.collect(p, "ffn");
    std::vector<Tensor> ts = tensors_of(p);
    ts.push_back(xin);
    s.check("ffn", ts, [=] { return ffn(xin); });
  }

  // Embedding with categorical node ids, dense edge features and RWPE.
  {
    ModelConfig mc;
    mc.hidden = d;
    mc.layers = 0;
    mc.units = 4;
    mc.self_heads = mc.ext_heads = 2;
    mc.pe = {PosEncKind::rwpe, 3, false};
    mc.node_input = {FeatureSchema::Kind::categorical, 2, {3, 4}};
    mc.edge_input = {FeatureSchema::Kind::dense, d, {}};
    const EmbeddingLayer emb = EmbeddingLayer::create(mc, s.rng());
    Batch b = batch;
    Categorical cat;
    std::uniform_int_distribution<int> id3(0, 2), id4(0, 3);
    for (Index i = 0; i < b.num_nodes; ++i) cat.ids.push_back({id3(s.rng()), id4(s.rng())});
    b.node_features = cat;
    std::vector<Matrix> pe;
    for (const Graph& g : graphs) pe.push_back(rwpe(g, 3));
    attach_pos_enc(b, pe);
    ParamList p;
    emb.collect(p, "embedding");
    s.check("embedding", tensors_of(p), [=] {
      const NodeEdge out = emb(b);
      return concat_cols(std::vector<Tensor>{transpose(out.x), transpose(out.e)});
    });
  }

  // Full GEAET layer and end-to-end models.
  ModelConfig mc;
  mc.hidden = d;
  mc.layers = 2;
  mc.units = 4;
  mc.self_heads = 2;
  mc.ext_heads = 2;
  mc.pe = {PosEncKind::rwpe, 3, false};
  mc.head = HeadKind::graph_classify;
  mc.outputs = 3;
  mc.node_input = {FeatureSchema::Kind::dense, d, {}};
  mc.edge_input = {FeatureSchema::Kind::dense, d, {}};
  {
    ModelConfig lc = mc;
    lc.mpnn = MpnnKind::gatedgcn;
    const GEAETLayer layer = GEAETLayer::create(lc, s.rng());
    ParamList p;
    layer.collect(p, "layer");
    std::vector<Tensor> ts = tensors_of(p);
    ts.push_back(xin);
    ts.push_back(ein);
    s.check("geaet_layer", ts, [=] {
      const NodeEdge out = layer(xin, ein, arcs, batch.node_segments, batch.edge_segments);
      return concat_cols(std::vector<Tensor>{transpose(out.x), transpose(out.e)});
    });
  }
  for (MpnnKind kind : {MpnnKind::gcn, MpnnKind::gatedgcn, MpnnKind::gine}) {
    ModelConfig m = mc;
    m.mpnn = kind;
    const GEAETModel model = GEAETModel::create(m, s.rng()());
    ParamList p = model.parameters();
    if (auto* eps = find_param(p, "layers.0.gine.eps")) eps->tensor.mutable_value()(0, 0) = 0.2;
    std::vector<const Graph*> ptrs{&graphs[0], &graphs[1]};
    const Batch b = prepare_batch(model, ptrs);
    s.check_loss(std::string("model[") + to_string(kind) + "]", tensors_of(p),
                 [&model, b] { return cross_entropy(model.forward(b), b.labels); });
  }
  return std::move(s.entries);
}

}  // namespace geaet
