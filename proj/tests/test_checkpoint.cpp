#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "evotf/checkpoint.hpp"
#include "evotf/errors.hpp"
#include "json.hpp"

using namespace evotf;

TEST_SUITE_BEGIN("checkpoint");

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

ModelConfig micro() {
  ModelConfig c;
  c.embed_dim = 8;
  c.num_latents = 2;
  c.latent_dim = 4;
  c.max_context = 8;
  return c;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Re-writes the manifest of a serialized model after applying `edit` to it.
std::string with_edited_manifest(
    const std::string& bytes,
    const std::function<void(nlohmann::ordered_json&)>& edit) {
  std::uint64_t mlen = 0;
  std::memcpy(&mlen, bytes.data(), sizeof(mlen));
  auto manifest = nlohmann::ordered_json::parse(
      bytes.substr(sizeof(mlen), mlen));
  edit(manifest);
  const std::string mtext = manifest.dump();
  const std::uint64_t nlen = mtext.size();
  std::string out(reinterpret_cast<const char*>(&nlen), sizeof(nlen));
  out += mtext;
  out += bytes.substr(sizeof(mlen) + mlen);
  return out;
}

}  // namespace

TEST_CASE("save then load restores every tensor bitwise") {
  ModelParams p = make_params(micro(), 123u);
  const auto path = temp_file("ckpt_roundtrip.evotf");
  save_checkpoint(path.string(), p);
  ModelParams q = load_checkpoint(path.string());

  CHECK(q.cfg.embed_dim == 8);
  CHECK(q.cfg.max_context == 8);
  auto np = named_params(p), nq = named_params(q);
  REQUIRE(np.size() == nq.size());
  for (std::size_t i = 0; i < np.size(); ++i) {
    CHECK(np[i].first == nq[i].first);
    REQUIRE(np[i].second.shape() == nq[i].second.shape());
    CHECK(std::memcmp(np[i].second.values().data(),
                      nq[i].second.values().data(),
                      np[i].second.values().size() * sizeof(float)) == 0);
  }
}

TEST_CASE("save, load, save produces identical bytes") {
  ModelParams p = make_params(micro(), 9u);
  const auto a = temp_file("ckpt_a.evotf"), b = temp_file("ckpt_b.evotf");
  save_checkpoint(a.string(), p);
  ModelParams q = load_checkpoint(a.string());
  save_checkpoint(b.string(), q);
  CHECK(read_bytes(a) == read_bytes(b));
}

TEST_CASE("version, shape, and truncation failures are distinct") {
  ModelParams p = make_params(micro(), 1u);
  const auto path = temp_file("ckpt_tamper.evotf");
  save_checkpoint(path.string(), p);
  const std::string good = read_bytes(path);

  SUBCASE("bumped format version") {
    write_bytes(path, with_edited_manifest(good, [](nlohmann::ordered_json& m) {
                  m["format_version"] = 999;
                }));
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                         doctest::Contains("version"), IoError);
  }
  SUBCASE("edited tensor shape") {
    write_bytes(path, with_edited_manifest(good, [](nlohmann::ordered_json& m) {
                  m["tensors"][0]["shape"][0] =
                      m["tensors"][0]["shape"][0].get<int>() + 1;
                }));
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                         doctest::Contains("shape"), IoError);
  }
  SUBCASE("blob cut short") {
    write_bytes(path, good.substr(0, good.size() - 10));
    CHECK_THROWS_WITH_AS(load_checkpoint(path.string()),
                         doctest::Contains("truncated"), IoError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/nowhere.evotf"), IoError);
  }
}

TEST_CASE("config json round trip") {
  ModelConfig c = micro();
  c.use_cross_dim = false;
  c.num_blocks = 2;
  ModelConfig d = parse_config_json(config_json(c));
  CHECK(d.embed_dim == c.embed_dim);
  CHECK(d.num_blocks == 2);
  CHECK(d.use_cross_dim == false);
  CHECK(d.use_fitness == true);

  CHECK_THROWS_AS(parse_config_json("{\"no_such_key\": 1}"), ConfigError);
  CHECK_THROWS_AS(parse_config_json("not json"), ConfigError);
  CHECK_THROWS_AS(parse_config_json("[1,2]"), ConfigError);
  // partial objects keep defaults
  ModelConfig e = parse_config_json("{\"embed_dim\": 16}");
  CHECK(e.embed_dim == 16);
  CHECK(e.num_heads == 2);
}

TEST_SUITE_END();
