// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

namespace atlab::model {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "atlab-checkpoint-1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("cannot write " + path.string());
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ModelConfig& config,
                     const num::ParamSet<float>& params, const CheckpointInfo& info) {
  Model<float> check(config, params.clone_as<float>());  // validates names and shapes
  fs::create_directories(dir);
  std::string blob;
  json index = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.at(i);
    index.push_back({{"name", params.name(i)}, {"shape", t.shape()}, {"offset", blob.size()}});
    for (float v : t.values()) put_u32(blob, std::bit_cast<std::uint32_t>(v));
  }
  json manifest = {
      {"format", kFormat},
      {"tool_version", info.tool_version},
      {"grammar_version", info.grammar_version},
      {"vocab_version", info.vocab_version},
      {"vocab_size", info.vocab_size},
      {"config", to_json(config)},
      {"params", index},
      {"params_bytes", blob.size()},
      {"extra", info.extra},
  };
  write_file(dir / "params.bin", blob);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Model<float> LoadedCheckpoint::model() const {
  return Model<float>(config, params.clone_as<float>());
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw DataError("checkpoint: cannot open " + (dir / "manifest.json").string());
  LoadedCheckpoint out;
  json m;
  try {
    m = json::parse(ms);
    if (m.at("format").get<std::string>() != kFormat) {
      throw DataError("checkpoint: unsupported format " + m.at("format").dump());
    }
    out.info.tool_version = m.at("tool_version").get<std::string>();
    out.info.grammar_version = m.at("grammar_version").get<std::string>();
    out.info.vocab_version = m.at("vocab_version").get<std::string>();
    out.info.vocab_size = m.at("vocab_size").get<std::size_t>();
    out.info.extra = m.value("extra", json::object());
  } catch (const json::exception& e) {
    throw DataError("checkpoint: malformed manifest: " + std::string(e.what()));
  }
  out.config = model_config_from_json(m.at("config"));

  std::ifstream bs(dir / "params.bin", std::ios::binary);
  if (!bs) throw DataError("checkpoint: cannot open " + (dir / "params.bin").string());
  const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bs)),
                                        std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  try {
    for (const json& p : m.at("params")) {
      const auto name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<num::Shape>();
      const auto offset = p.at("offset").get<std::size_t>();
      const std::size_t n = num::shape_size(shape);
      if (offset != expected || offset + 4 * n > blob.size()) {
        throw DataError("checkpoint: parameter " + name + " lies outside params.bin");
      }
      std::vector<float> values(n);
      for (std::size_t i = 0; i < n; ++i) {
        values[i] = std::bit_cast<float>(get_u32(blob.data() + offset + 4 * i));
      }
      out.params.add(name, num::Tensor<float>(shape, std::move(values)));
      expected = offset + 4 * n;
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint: malformed parameter index: " + std::string(e.what()));
  }
  if (expected != blob.size()) {
    throw DataError("checkpoint: params.bin has " + std::to_string(blob.size()) +
                    " bytes, index covers " + std::to_string(expected));
  }
  try {
    Model<float> check(out.config, out.params.clone_as<float>());
  } catch (const ContractError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return out;
}

}  // namespace atlab::model
