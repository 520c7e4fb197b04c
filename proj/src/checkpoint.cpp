#include "checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace denssiam {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'S', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t payload_crc(const std::vector<float>& payload) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size() * sizeof(float))));
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStoreF& store,
                     const TrainState& state, const Config& cfg) {
  std::vector<std::pair<std::string, const TensorF*>> entries;
  for (std::size_t i = 0; i < store.count(); ++i) {
    const auto& p = store.item(i);
    entries.emplace_back(p.name, &p.value);
  }
  for (std::size_t i = 0; i < store.count(); ++i) {
    const auto& p = store.item(i);
    if (p.trainable) {
      entries.emplace_back("optimizer.velocity." + p.name, &p.velocity);
    }
  }

  std::vector<float> payload;
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : entries) {
    const std::uint64_t bytes = tensor->size() * sizeof(float);
    tensors.push_back({{"name", name},
                       {"shape", tensor->shape()},
                       {"dtype", "f32"},
                       {"byte_offset", offset},
                       {"byte_len", bytes}});
    payload.insert(payload.end(), tensor->data(), tensor->data() + tensor->size());
    offset += bytes;
  }

  json manifest;
  manifest["tensors"] = std::move(tensors);
  manifest["config"] = json::parse(config_to_json(cfg));
  manifest["optimizer"] = {{"step", state.step}, {"epoch", state.epoch}};
  manifest["payload_crc32"] = payload_crc(payload);
  const std::string manifest_text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t mlen = manifest_text.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(manifest_text.data(), static_cast<std::streamsize>(mlen));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw IoError("short write to checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint magic mismatch in " + path);
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  if (!in) throw FormatError("truncated checkpoint header in " + path);
  std::string manifest_text(mlen, '\0');
  in.read(manifest_text.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw FormatError("truncated checkpoint manifest in " + path);

  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
  }

  std::vector<float> payload;
  {
    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    if (raw.size() % sizeof(float) != 0) {
      throw FormatError("payload size is not a multiple of 4 in " + path);
    }
    payload.resize(raw.size() / sizeof(float));
    std::memcpy(payload.data(), raw.data(), raw.size());
  }

  if (!manifest.contains("payload_crc32") || !manifest.contains("tensors")) {
    throw FormatError("checkpoint manifest is missing required fields");
  }
  if (payload_crc(payload) != manifest["payload_crc32"].get<std::uint32_t>()) {
    throw FormatError("payload checksum mismatch in " + path);
  }

  LoadedCheckpoint out;
  out.config = config_from_json(manifest["config"].dump());
  if (manifest.contains("optimizer")) {
    out.state.step = manifest["optimizer"].value<std::uint64_t>("step", 0);
    out.state.epoch = manifest["optimizer"].value<int>("epoch", 0);
  }
  const std::uint64_t payload_bytes = payload.size() * sizeof(float);
  for (const auto& t : manifest["tensors"]) {
    const std::string name = t.at("name").get<std::string>();
    const std::vector<int> shape = t.at("shape").get<std::vector<int>>();
    if (t.at("dtype").get<std::string>() != "f32") {
      throw FormatError("tensor '" + name + "': unsupported dtype");
    }
    const std::uint64_t off = t.at("byte_offset").get<std::uint64_t>();
    const std::uint64_t len = t.at("byte_len").get<std::uint64_t>();
    const std::uint64_t want = shape_numel(shape) * sizeof(float);
    if (len != want) {
      throw FormatError("tensor '" + name + "': manifest byte_len " +
                        std::to_string(len) + " does not match shape " +
                        shape_str(shape));
    }
    if (off % sizeof(float) != 0 || off + len > payload_bytes) {
      throw FormatError("tensor '" + name + "': payload range out of bounds");
    }
    TensorF tensor(shape);
    std::memcpy(tensor.data(), payload.data() + off / sizeof(float),
                static_cast<std::size_t>(len));
    out.tensors.emplace_back(name, std::move(tensor));
  }
  return out;
}

void restore_store(ParamStoreF& store, const LoadedCheckpoint& ckpt) {
  std::size_t used = 0;
  auto find = [&](const std::string& name) -> const TensorF* {
    for (const auto& [n, t] : ckpt.tensors) {
      if (n == name) return &t;
    }
    return nullptr;
  };
  for (std::size_t i = 0; i < store.count(); ++i) {
    auto& p = store.item(i);
    const TensorF* v = find(p.name);
    if (!v) throw FormatError("checkpoint is missing tensor '" + p.name + "'");
    if (v->shape() != p.value.shape()) {
      throw FormatError("tensor '" + p.name + "': checkpoint shape " +
                        shape_str(v->shape()) + " does not match model " +
                        shape_str(p.value.shape()));
    }
    std::memcpy(p.value.data(), v->data(), v->size() * sizeof(float));
    ++used;
    if (p.trainable) {
      const std::string vel_name = "optimizer.velocity." + p.name;
      const TensorF* vel = find(vel_name);
      if (!vel) throw FormatError("checkpoint is missing tensor '" + vel_name + "'");
      if (vel->shape() != p.velocity.shape()) {
        throw FormatError("tensor '" + vel_name + "': shape mismatch");
      }
      std::memcpy(p.velocity.data(), vel->data(), vel->size() * sizeof(float));
      ++used;
    }
  }
  if (used != ckpt.tensors.size()) {
    throw FormatError("checkpoint carries " +
                      std::to_string(ckpt.tensors.size() - used) +
                      " tensors unknown to this model");
  }
}

}  // namespace denssiam
