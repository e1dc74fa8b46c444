#include "geaet/config.hpp"

#include "geaet/jsonl.hpp"

namespace geaet {

using nlohmann::json;

namespace {

json schema_to_json(const FeatureSchema& s) {
  return json{{"kind", to_string(s.kind)}, {"width", s.width}, {"vocab", s.vocab}};
}

FeatureSchema schema_from_json(const json& j) {
  FeatureSchema s;
  s.kind = feature_kind_from_string(j.at("kind").get<std::string>());
  s.width = j.at("width").get<Index>();
  s.vocab = j.at("vocab").get<std::vector<Index>>();
  return s;
}

json model_core_to_json(const ModelConfig& m) {
  return json{{"hidden", m.hidden},
              {"layers", m.layers},
              {"units", m.units},
              {"self_heads", m.self_heads},
              {"ext_heads", m.ext_heads},
              {"mpnn", to_string(m.mpnn)},
              {"tlayer", m.tlayer},
              {"geanet", m.geanet},
              {"use_node_units", m.unit_toggles.node},
              {"use_edge_units", m.unit_toggles.edge},
              {"use_shared_unit", m.unit_toggles.shared},
              {"geanet_reads_mpnn", m.geanet_reads_mpnn},
              {"pe", {{"kind", to_string(m.pe.kind)}, {"k", m.pe.k}, {"sign_flip", m.pe.sign_flip}}}};
}

void model_core_from_json(const json& j, ModelConfig& m) {
  m.hidden = j.at("hidden").get<Index>();
  m.layers = j.at("layers").get<Index>();
  m.units = j.at("units").get<Index>();
  m.self_heads = j.at("self_heads").get<Index>();
  m.ext_heads = j.at("ext_heads").get<Index>();
  m.mpnn = mpnn_kind_from_string(j.at("mpnn").get<std::string>());
  m.tlayer = j.at("tlayer").get<bool>();
  m.geanet = j.at("geanet").get<bool>();
  m.unit_toggles.node = j.at("use_node_units").get<bool>();
  m.unit_toggles.edge = j.at("use_edge_units").get<bool>();
  m.unit_toggles.shared = j.at("use_shared_unit").get<bool>();
  m.geanet_reads_mpnn = j.at("geanet_reads_mpnn").get<bool>();
  const json& pe = j.at("pe");
  m.pe.kind = pos_enc_kind_from_string(pe.at("kind").get<std::string>());
  m.pe.k = pe.at("k").get<int>();
  m.pe.sign_flip = pe.at("sign_flip").get<bool>();
}

bool same_type(const json& want, const json& got) {
  if (want.is_number_float()) return got.is_number();
  if (want.is_number_unsigned()) return got.is_number_unsigned() || (got.is_number_integer() && got.get<long long>() >= 0);
  if (want.is_number_integer()) return got.is_number_integer();
  return want.type() == got.type();
}

void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(key + ": unknown key");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else {
      if (!same_type(slot, it.value())) {
        throw ConfigError(key + ": expected " + std::string(slot.type_name()) + ", got " + it.value().type_name());
      }
      slot = slot.is_number_float() ? json(it.value().get<double>()) : it.value();
    }
  }
}

template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

json to_json(const RunConfig& c) {
  const DatasetConfig& d = c.dataset;
  return json{
      {"seed", c.seed},
      {"dataset",
       {{"generator", d.generator},
        {"path", d.path},
        {"seed", d.seed},
        {"depth", d.depth},
        {"count", d.count},
        {"train_fraction", d.split.train},
        {"valid_fraction", d.split.valid},
        {"sbm",
         {{"n_per_cluster", d.sbm.n_per_cluster},
          {"clusters", d.sbm.clusters},
          {"p_in", d.sbm.p_in},
          {"p_out", d.sbm.p_out}}}}},
      {"model", model_core_to_json(c.model)},
      {"optim",
       {{"lr", c.optim.lr},
        {"weight_decay", c.optim.weight_decay},
        {"epochs", c.optim.epochs},
        {"warmup", c.optim.warmup},
        {"batch_size", c.optim.batch_size}}}};
}

RunConfig run_config_from_json(const json& j) {
  json doc = to_json(RunConfig{});
  merge_checked(doc, j, "");
  RunConfig c;
  c.seed = doc.at("seed").get<std::uint64_t>();
  const json& d = doc.at("dataset");
  c.dataset.generator = d.at("generator").get<std::string>();
  c.dataset.path = d.at("path").get<std::string>();
  c.dataset.seed = d.at("seed").get<std::uint64_t>();
  c.dataset.depth = d.at("depth").get<int>();
  c.dataset.count = d.at("count").get<int>();
  c.dataset.split.train = d.at("train_fraction").get<double>();
  c.dataset.split.valid = d.at("valid_fraction").get<double>();
  const json& s = d.at("sbm");
  c.dataset.sbm.n_per_cluster = s.at("n_per_cluster").get<int>();
  c.dataset.sbm.clusters = s.at("clusters").get<int>();
  c.dataset.sbm.p_in = s.at("p_in").get<double>();
  c.dataset.sbm.p_out = s.at("p_out").get<double>();
  c.dataset.sbm.count = c.dataset.count;
  c.dataset.sbm.split = c.dataset.split;
  with_path("model", [&] { model_core_from_json(doc.at("model"), c.model); });
  const json& o = doc.at("optim");
  c.optim.lr = o.at("lr").get<double>();
  c.optim.weight_decay = o.at("weight_decay").get<double>();
  c.optim.epochs = o.at("epochs").get<int>();
  c.optim.warmup = o.at("warmup").get<int>();
  c.optim.batch_size = o.at("batch_size").get<Index>();
  return c;
}

json to_json(const ModelConfig& c) {
  json j = model_core_to_json(c);
  j["head"] = to_string(c.head);
  j["outputs"] = c.outputs;
  j["node_input"] = schema_to_json(c.node_input);
  j["edge_input"] = schema_to_json(c.edge_input);
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  return with_path("model", [&] {
    ModelConfig c;
    model_core_from_json(j, c);
    c.head = head_kind_from_string(j.at("head").get<std::string>());
    c.outputs = j.at("outputs").get<Index>();
    c.node_input = schema_from_json(j.at("node_input"));
    c.edge_input = schema_from_json(j.at("edge_input"));
    return c;
  });
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  // Build a nested patch so the usual key and type checks apply.
  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(start, end - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
    patch = json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_checked(doc, patch, "");
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  const DatasetConfig& d = c.dataset;
  if (d.path.empty()) {
    if (d.generator == "tree") {
      if (d.depth < 2) fail("dataset.depth: must be at least 2");
    } else if (d.generator == "sbm") {
      with_path("dataset.sbm", [&] { validate(d.sbm); });
    } else {
      fail("dataset.generator: expected tree or sbm, got '" + d.generator + "'");
    }
    if (d.count < 1) fail("dataset.count: must be positive");
  }
  if (d.split.train <= 0 || d.split.valid < 0 || d.split.train + d.split.valid > 1) {
    fail("dataset.train_fraction/valid_fraction: must be positive and sum to at most 1");
  }
  with_path("model", [&] {
    ModelConfig probe = c.model;
    probe.outputs = std::max<Index>(probe.outputs, 1);
    probe.validate();
  });
  if (!(c.optim.lr > 0)) fail("optim.lr: must be positive");
  if (c.optim.weight_decay < 0) fail("optim.weight_decay: must be non-negative");
  if (c.optim.epochs < 1) fail("optim.epochs: must be positive");
  if (c.optim.warmup < 0 || c.optim.warmup >= c.optim.epochs) fail("optim.warmup: must lie in [0, epochs)");
  if (c.optim.batch_size < 1) fail("optim.batch_size: must be positive");
}

RunConfig resolve_config(const std::filesystem::path& file, std::span<const std::string> overrides) {
  json doc = to_json(RunConfig{});
  if (!file.empty()) {
    json patch;
    try {
      patch = json::parse(read_text(file));
    } catch (const json::parse_error& e) {
      throw ConfigError(file.string() + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    merge_checked(doc, patch, "");
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  RunConfig c = with_path("config", [&] { return run_config_from_json(doc); });
  validate(c);
  return c;
}

}  // namespace geaet
