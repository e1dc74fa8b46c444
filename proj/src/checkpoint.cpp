#include "geaet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "geaet/config.hpp"
#include "geaet/jsonl.hpp"

namespace geaet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const GEAETModel& model) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg = to_json(model.config()).dump();
  put<std::uint64_t>(out, cfg.size());
  out += cfg;
  const ParamList params = model.parameters();
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    const Matrix& v = p.tensor.value();
    put<std::int64_t>(out, v.rows());
    put<std::int64_t>(out, v.cols());
    out.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  return out;
}

GEAETModel deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kCheckpointMagic)), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = r.get<std::uint64_t>();
  const std::string cfg(r.take(cfg_len), cfg_len);
  ModelConfig config;
  try {
    config = model_config_from_json(nlohmann::json::parse(cfg));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  GEAETModel model = GEAETModel::create(config, 0);

  std::map<std::string, Tensor> by_name;
  for (const auto& p : model.parameters()) by_name.emplace(p.name, p.tensor);
  const auto count = r.get<std::uint64_t>();
  if (count != by_name.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(by_name.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    const std::string name(r.take(name_len), name_len);
    const auto rows = r.get<std::int64_t>();
    const auto cols = r.get<std::int64_t>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("unexpected tensor '" + name + "'");
    Tensor& t = it->second;
    if (rows != t.rows() || cols != t.cols()) {
      throw CheckpointError("tensor '" + name + "' is " + shape_str(rows, cols) + ", model expects " + t.shape());
    }
    const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
    std::memcpy(t.mutable_value().data(), r.take(n), n);
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return model;
}

void save_checkpoint(const GEAETModel& model, const std::filesystem::path& path) {
  write_text_atomic(path, serialize_checkpoint(model));
}

GEAETModel load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_text(path)); }

}  // namespace geaet
