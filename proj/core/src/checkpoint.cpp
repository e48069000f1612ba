#include "evotf/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "evotf/errors.hpp"
#include "json.hpp"

namespace evotf {

namespace {

using nlohmann::ordered_json;

ordered_json config_to_json(const ModelConfig& c) {
  ordered_json j;
  j["num_blocks"] = c.num_blocks;
  j["num_heads"] = c.num_heads;
  j["num_latents"] = c.num_latents;
  j["latent_dim"] = c.latent_dim;
  j["embed_dim"] = c.embed_dim;
  j["d_x"] = c.d_x;
  j["d_f"] = c.d_f;
  j["d_d"] = c.d_d;
  j["max_context"] = c.max_context;
  j["use_fitness"] = c.use_fitness;
  j["use_distribution"] = c.use_distribution;
  j["use_cross_dim"] = c.use_cross_dim;
  return j;
}

ModelConfig config_from_json(const ordered_json& j) {
  ModelConfig c;
  for (const auto& [key, val] : j.items()) {
    if (key == "num_blocks") c.num_blocks = val.get<int>();
    else if (key == "num_heads") c.num_heads = val.get<int>();
    else if (key == "num_latents") c.num_latents = val.get<int>();
    else if (key == "latent_dim") c.latent_dim = val.get<int>();
    else if (key == "embed_dim") c.embed_dim = val.get<int>();
    else if (key == "d_x") c.d_x = val.get<int>();
    else if (key == "d_f") c.d_f = val.get<int>();
    else if (key == "d_d") c.d_d = val.get<int>();
    else if (key == "max_context") c.max_context = val.get<int>();
    else if (key == "use_fitness") c.use_fitness = val.get<bool>();
    else if (key == "use_distribution") c.use_distribution = val.get<bool>();
    else if (key == "use_cross_dim") c.use_cross_dim = val.get<bool>();
    else throw ConfigError("model config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

}  // namespace

std::string config_json(const ModelConfig& cfg) {
  return config_to_json(cfg).dump();
}

ModelConfig parse_config_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config: expected an object");
  return config_from_json(j);
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
  ordered_json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = config_to_json(params.cfg);
  ordered_json tensors = ordered_json::array();
  std::uint64_t offset = 0;
  auto named = named_params(params);
  for (const auto& [name, t] : named) {
    ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    tensors.push_back(entry);
    offset += static_cast<std::uint64_t>(t.numel()) * sizeof(float);
  }
  manifest["tensors"] = tensors;
  const std::string mtext = manifest.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  const std::uint64_t mlen = mtext.size();
  f.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  f.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& [name, t] : named) {
    f.write(reinterpret_cast<const char*>(t.values().data()),
            static_cast<std::streamsize>(t.values().size() * sizeof(float)));
  }
  if (!f) throw IoError("checkpoint: write failed for '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
  std::uint64_t mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  if (!f) throw IoError("checkpoint: truncated header in '" + path + "'");
  std::string mtext(mlen, '\0');
  f.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!f) throw IoError("checkpoint: truncated manifest in '" + path + "'");

  ordered_json manifest;
  try {
    manifest = ordered_json::parse(mtext);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad manifest: ") + e.what());
  }
  if (!manifest.contains("format_version") ||
      manifest["format_version"].get<int>() != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version in '" + path + "'");

  ModelConfig cfg = config_from_json(manifest.at("config"));
  ModelParams params = make_params(cfg, 0);
  auto named = named_params(params);

  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != named.size())
    throw IoError("checkpoint: tensor list does not match the model layout");
  std::vector<char> blob((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& entry = tensors[i];
    if (entry.at("name").get<std::string>() != named[i].first)
      throw IoError("checkpoint: unexpected tensor name '" +
                    entry.at("name").get<std::string>() + "'");
    const ad::Shape shape = entry.at("shape").get<ad::Shape>();
    if (shape != named[i].second.shape())
      throw IoError("checkpoint: shape mismatch for tensor '" +
                    named[i].first + "'");
    const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
    const std::uint64_t bytes =
        static_cast<std::uint64_t>(named[i].second.numel()) * sizeof(float);
    if (off + bytes > blob.size())
      throw IoError("checkpoint: truncated blob for tensor '" +
                    named[i].first + "'");
    std::memcpy(named[i].second.values().data(), blob.data() + off, bytes);
  }
  return params;
}

}  // namespace evotf
