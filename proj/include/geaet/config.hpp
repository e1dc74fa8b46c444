#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "geaet/datasets.hpp"
#include "geaet/model.hpp"

namespace geaet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  std::string generator = "tree";  // tree | sbm
  std::string path;                // load from this directory instead of generating
  std::uint64_t seed = 0;
  int depth = 3;
  int count = 2000;
  SbmParams sbm;
  SplitFractions split;
};

struct OptimConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  int epochs = 100;
  int warmup = 5;
  Index batch_size = 32;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;  // head, outputs and input schemas are filled in from the data
  OptimConfig optim;
};

nlohmann::json to_json(const RunConfig& c);
/// Every key of `j` must exist in the defaults; missing keys keep their
/// default. Errors name the dotted path.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Full model description, including the data-derived fields.
nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Applies `key=value` assignments to a config document. The value is read as
/// JSON when it parses, otherwise as a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Defaults, then the file (if non-empty), then overrides, then validation.
RunConfig resolve_config(const std::filesystem::path& file, std::span<const std::string> overrides);

void validate(const RunConfig& c);

}  // namespace geaet
