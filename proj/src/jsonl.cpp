#include "geaet/jsonl.hpp"

#include <fstream>
#include <sstream>

namespace geaet {

using nlohmann::json;

namespace {

void features_to_json(json& j, const Features& f, const char* prefix) {
  const std::string p(prefix);
  if (const auto* m = std::get_if<Matrix>(&f)) {
    json rows = json::array();
    for (Index r = 0; r < m->rows(); ++r) {
      json row = json::array();
      for (Index c = 0; c < m->cols(); ++c) row.push_back((*m)(r, c));
      rows.push_back(std::move(row));
    }
    j[p + "_feat"] = std::move(rows);
  } else if (const auto* c = std::get_if<Categorical>(&f)) {
    j[p + "_cat"] = c->ids;
  }
}

Features features_from_json(const json& j, const char* prefix) {
  const std::string p(prefix);
  const bool has_feat = j.contains(p + "_feat"), has_cat = j.contains(p + "_cat");
  if (has_feat && has_cat) throw SchemaError("both " + p + "_feat and " + p + "_cat given");
  if (has_cat) return Categorical{j.at(p + "_cat").get<std::vector<std::vector<int>>>()};
  if (has_feat) {
    const auto& rows = j.at(p + "_feat");
    const Index r = static_cast<Index>(rows.size());
    const Index c = r > 0 ? static_cast<Index>(rows[0].size()) : 0;
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i) {
      if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != c) throw SchemaError(p + "_feat rows differ in width");
      for (Index k = 0; k < c; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
    return m;
  }
  return std::monostate{};
}

}  // namespace

json graph_to_json(const Graph& g) {
  json j;
  j["n"] = g.num_nodes;
  json edges = json::array();
  for (const Arc& a : g.edges) edges.push_back({a.src, a.dst});
  j["edges"] = std::move(edges);
  features_to_json(j, g.node_features, "node");
  features_to_json(j, g.edge_features, "edge");
  json target;
  target["kind"] = g.target.kind == TargetKind::node          ? "node"
                   : g.target.kind == TargetKind::graph_class ? "graph_class"
                                                              : "graph_reg";
  if (g.target.kind == TargetKind::graph_reg) {
    target["values"] = g.target.values;
  } else {
    target["values"] = g.target.labels;
  }
  j["target"] = std::move(target);
  j["target_node"] = g.target_node ? json(*g.target_node) : json(nullptr);
  return j;
}

Graph graph_from_json(const json& j) {
  Graph g;
  g.num_nodes = j.at("n").get<Index>();
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw SchemaError("edge entries must be [src, dst] pairs");
    g.edges.push_back({e[0].get<Index>(), e[1].get<Index>()});
  }
  g.node_features = features_from_json(j, "node");
  g.edge_features = features_from_json(j, "edge");
  const auto& t = j.at("target");
  g.target.kind = target_kind_from_string(t.at("kind").get<std::string>());
  if (g.target.kind == TargetKind::graph_reg) {
    g.target.values = t.at("values").get<std::vector<double>>();
  } else {
    g.target.labels = t.at("values").get<std::vector<int>>();
  }
  if (j.contains("target_node") && !j.at("target_node").is_null()) g.target_node = j.at("target_node").get<Index>();
  symmetrize(g);
  validate(g);
  return g;
}

std::string to_jsonl(std::span<const Graph> graphs) {
  std::string out;
  for (const Graph& g : graphs) {
    out += graph_to_json(g).dump();
    out += '\n';
  }
  return out;
}

std::vector<Graph> parse_jsonl(const std::string& text) {
  std::vector<Graph> graphs;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      graphs.push_back(graph_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(number, e.what());
    }
  }
  return graphs;
}

void save_jsonl(std::span<const Graph> graphs, const std::filesystem::path& path) {
  write_text_atomic(path, to_jsonl(graphs));
}

std::vector<Graph> load_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_text(path)); }

void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_jsonl(split.train, dir / "train.jsonl");
  save_jsonl(split.valid, dir / "valid.jsonl");
  save_jsonl(split.test, dir / "test.jsonl");
  json meta = {{"seed", split.seed}, {"generator", split.generator}, {"params", split.params}};
  write_text_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

DatasetSplit load_dataset(const std::filesystem::path& dir) {
  DatasetSplit split;
  split.train = load_jsonl(dir / "train.jsonl");
  split.valid = load_jsonl(dir / "valid.jsonl");
  split.test = load_jsonl(dir / "test.jsonl");
  const json meta = json::parse(read_text(dir / "meta.json"));
  split.seed = meta.at("seed").get<std::uint64_t>();
  split.generator = meta.at("generator").get<std::string>();
  split.params = meta.at("params");
  return split;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace geaet
