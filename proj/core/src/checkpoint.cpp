#include "reid/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace reid {

static const char kMagic[4] = {'R', 'A', 'T', '1'};

template <typename T>
static void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
static T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint file");
  return v;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  put<uint32_t>(out, 1);
  put<uint64_t>(out, ck.fingerprint);
  put<uint64_t>(out, ck.seed);
  put<int32_t>(out, ck.epoch);
  put<int32_t>(out, ck.num_classes);
  std::string cfg = serialize_config(ck.config);
  put<uint32_t>(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), cfg.size());
  put<uint32_t>(out, static_cast<uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), name.size());
    put<uint32_t>(out, static_cast<uint32_t>(t.ndim()));
    for (int d : t.shape()) put<int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()), sizeof(Scalar) * t.numel());
  }
  if (!out) throw IoError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint32_t version = get<uint32_t>(in);
  if (version != 1) throw IoError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.fingerprint = get<uint64_t>(in);
  ck.seed = get<uint64_t>(in);
  ck.epoch = get<int32_t>(in);
  ck.num_classes = get<int32_t>(in);
  uint32_t cfg_len = get<uint32_t>(in);
  std::string cfg(cfg_len, '\0');
  in.read(cfg.data(), cfg_len);
  if (!in) throw IoError("truncated checkpoint file");
  ck.config = parse_config(cfg);
  uint32_t n = get<uint32_t>(in);
  for (uint32_t i = 0; i < n; ++i) {
    uint32_t name_len = get<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t ndim = get<uint32_t>(in);
    Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = get<int32_t>(in);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), sizeof(Scalar) * t.numel());
    if (!in) throw IoError("truncated checkpoint file");
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

Checkpoint make_checkpoint(Model& model, const RunConfig& cfg, int epoch,
                           const std::map<std::string, Tensor>& optim_state) {
  Checkpoint ck;
  ck.config = cfg;
  ck.fingerprint = config_fingerprint(cfg);
  ck.seed = cfg.seed;
  ck.epoch = epoch;
  ck.num_classes = model.num_classes();
  for (auto& [name, var] : model.named_params()) ck.tensors["model/" + name] = var.value().clone();
  for (const auto& [name, t] : optim_state) ck.tensors["optim/" + name] = t.clone();
  return ck;
}

void load_model_params(Model& model, const Checkpoint& ck) {
  for (auto& [name, var] : model.named_params()) {
    auto it = ck.tensors.find("model/" + name);
    if (it == ck.tensors.end())
      throw IoError("checkpoint is missing parameter '" + name + "'");
    if (it->second.shape() != var.value().shape())
      throw IoError("checkpoint/model mismatch for '" + name + "': checkpoint " +
                    shape_str(it->second.shape()) + " vs model " + shape_str(var.value().shape()));
    var.set_value(it->second.clone());
  }
}

}  // namespace reid
