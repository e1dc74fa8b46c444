#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "geaet/datasets.hpp"

namespace geaet {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

nlohmann::json graph_to_json(const Graph& g);
/// Missing reverse arcs are added (see symmetrize) before validation.
Graph graph_from_json(const nlohmann::json& j);

std::string to_jsonl(std::span<const Graph> graphs);
std::vector<Graph> parse_jsonl(const std::string& text);

void save_jsonl(std::span<const Graph> graphs, const std::filesystem::path& path);
std::vector<Graph> load_jsonl(const std::filesystem::path& path);

/// Writes train.jsonl, valid.jsonl, test.jsonl and meta.json into `dir`.
void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit load_dataset(const std::filesystem::path& dir);

/// Writes through a temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace geaet
