// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/model/config.hpp"

#include <algorithm>
#include <cmath>

#include "atlab/errors.hpp"

namespace atlab::model {

using nlohmann::json;

std::string_view head_type_name(HeadType h) {
  return h == HeadType::kTransformer ? "transformer" : "meanpool_mlp";
}

HeadType parse_head_type(std::string_view name) {
  if (name == "meanpool_mlp" || name == "meanpool") return HeadType::kMeanpoolMlp;
  if (name == "transformer") return HeadType::kTransformer;
  throw ConfigError("unknown head type '" + std::string(name) +
                    "' (expected meanpool_mlp or transformer)");
}

std::string_view init_scheme_name(InitScheme s) {
  return s == InitScheme::kXavier ? "xavier" : "normal";
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "normal") return InitScheme::kNormal;
  if (name == "xavier") return InitScheme::kXavier;
  throw ConfigError("unknown init scheme '" + std::string(name) + "' (expected normal or xavier)");
}

std::size_t AudioEncoderConfig::chunk_frames() const {
  return static_cast<std::size_t>(std::llround(chunk_s * frame_rate));
}

double ModelConfig::token_scale() const {
  return text.token_scale > 0 ? text.token_scale : std::sqrt(static_cast<double>(text.dim));
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("model config: " + what);
}

}  // namespace

void validate_config(const ModelConfig& c) {
  require(c.embed_dim > 0, "embed_dim must be positive");
  require(c.text.vocab_size > 0, "text.vocab_size must be positive");
  require(c.text.dim > 0 && c.text.heads > 0 && c.text.dim % c.text.heads == 0,
          "text.dim must be divisible by text.heads");
  require(c.text.ffn_dim > 0, "text.ffn_dim must be positive");
  require(c.text.max_len > 1, "text.max_len must exceed 1");
  require(c.text.token_scale >= 0, "text.token_scale must be non-negative");
  require(c.audio.chunk_s > 0 && c.audio.frame_rate > 0, "audio chunk and frame rate must be positive");
  const double frames = c.audio.chunk_s * c.audio.frame_rate;
  require(std::abs(frames - std::round(frames)) < 1e-9 && frames >= 1,
          "audio.chunk_s × audio.frame_rate must be a positive integer");
  require(c.audio.feat_dim > 0 && c.audio.dim > 0, "audio dims must be positive");
  for (std::size_t h : c.audio.hidden) require(h > 0, "audio.hidden entries must be positive");
  require(c.head.heads > 0, "head.heads must be positive");
  require(c.embed_dim % c.head.heads == 0, "embed_dim must be divisible by head.heads");
  if (c.head_type == HeadType::kTransformer && c.head.layers > 0) {
    require(c.text.dim % c.head.heads == 0 && c.audio.dim % c.head.heads == 0,
            "branch widths must be divisible by head.heads");
  }
  require(c.head.ffn_dim > 0, "head.ffn_dim must be positive");
  require(c.head.max_positions > 1, "head.max_positions must exceed 1");
  require(c.temperature > 0 && std::isfinite(c.temperature), "temperature must be positive");
  require(c.init_std > 0, "init_std must be positive");
  require(c.train.lr > 0, "train.lr must be positive");
  require(c.train.batch_size >= 2, "train.batch_size must be at least 2");
  require(c.train.lr_step > 0, "train.lr_step must be positive");
  require(c.train.lr_gamma > 0, "train.lr_gamma must be positive");
  require(c.train.max_epochs > 0, "train.max_epochs must be positive");
  require(c.train.recall_k > 0, "train.recall_k must be positive");
  require(c.train.threads >= 1, "train.threads must be at least 1");
}

json to_json(const ModelConfig& c) {
  return json{
      {"embed_dim", c.embed_dim},
      {"text",
       {{"vocab_size", c.text.vocab_size},
        {"dim", c.text.dim},
        {"layers", c.text.layers},
        {"heads", c.text.heads},
        {"ffn_dim", c.text.ffn_dim},
        {"max_len", c.text.max_len},
        {"token_scale", c.text.token_scale}}},
      {"audio",
       {{"chunk_s", c.audio.chunk_s},
        {"frame_rate", c.audio.frame_rate},
        {"feat_dim", c.audio.feat_dim},
        {"hidden", c.audio.hidden},
        {"dim", c.audio.dim}}},
      {"head_type", head_type_name(c.head_type)},
      {"head",
       {{"layers", c.head.layers},
        {"heads", c.head.heads},
        {"ffn_dim", c.head.ffn_dim},
        {"max_positions", c.head.max_positions},
        {"positional", c.head.positional}}},
      {"temperature", c.temperature},
      {"init_std", c.init_std},
      {"init_scheme", init_scheme_name(c.init_scheme)},
      {"train",
       {{"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"lr_step", c.train.lr_step},
        {"lr_gamma", c.train.lr_gamma},
        {"patience", c.train.patience},
        {"max_epochs", c.train.max_epochs},
        {"recall_k", c.train.recall_k},
        {"threads", c.train.threads}}},
  };
}

namespace {

// Reads j[key] into out when present, rejecting keys the reader does not know.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("model config: " + path_ + " must be a table");
  }

  template <class V>
  Reader& get(const char* key, V& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception& e) {
      throw ConfigError("model config: bad value for " + path_ + key + ": " + e.what());
    }
    return *this;
  }

  const json* sub(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
        throw ConfigError("model config: unknown key " + path_ + k);
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

}  // namespace

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  Reader top(j, "");
  std::string head_type = std::string(head_type_name(c.head_type));
  std::string init_scheme = std::string(init_scheme_name(c.init_scheme));
  top.get("embed_dim", c.embed_dim)
      .get("head_type", head_type)
      .get("temperature", c.temperature)
      .get("init_std", c.init_std)
      .get("init_scheme", init_scheme);
  c.head_type = parse_head_type(head_type);
  c.init_scheme = parse_init_scheme(init_scheme);
  if (const json* t = top.sub("text")) {
    Reader r(*t, "text.");
    r.get("vocab_size", c.text.vocab_size)
        .get("dim", c.text.dim)
        .get("layers", c.text.layers)
        .get("heads", c.text.heads)
        .get("ffn_dim", c.text.ffn_dim)
        .get("max_len", c.text.max_len)
        .get("token_scale", c.text.token_scale)
        .finish();
  }
  if (const json* a = top.sub("audio")) {
    Reader r(*a, "audio.");
    r.get("chunk_s", c.audio.chunk_s)
        .get("frame_rate", c.audio.frame_rate)
        .get("feat_dim", c.audio.feat_dim)
        .get("hidden", c.audio.hidden)
        .get("dim", c.audio.dim)
        .finish();
  }
  if (const json* h = top.sub("head")) {
    Reader r(*h, "head.");
    r.get("layers", c.head.layers)
        .get("heads", c.head.heads)
        .get("ffn_dim", c.head.ffn_dim)
        .get("max_positions", c.head.max_positions)
        .get("positional", c.head.positional)
        .finish();
  }
  if (const json* t = top.sub("train")) {
    Reader r(*t, "train.");
    r.get("lr", c.train.lr)
        .get("batch_size", c.train.batch_size)
        .get("lr_step", c.train.lr_step)
        .get("lr_gamma", c.train.lr_gamma)
        .get("patience", c.train.patience)
        .get("max_epochs", c.train.max_epochs)
        .get("recall_k", c.train.recall_k)
        .get("threads", c.train.threads)
        .finish();
  }
  top.finish();
  validate_config(c);
  return c;
}

}  // namespace atlab::model
