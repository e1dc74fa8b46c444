#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "geaet/model.hpp"

namespace geaet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'G', 'E', 'A', 'E', 'T', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little-endian): magic, u32 version, u64 length + model config
/// JSON, u64 tensor count, then per tensor u32 name length, name, i64 rows,
/// i64 cols and rows*cols row-major float64 values.
std::string serialize_checkpoint(const GEAETModel& model);
GEAETModel deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const GEAETModel& model, const std::filesystem::path& path);
GEAETModel load_checkpoint(const std::filesystem::path& path);

}  // namespace geaet
