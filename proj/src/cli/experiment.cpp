// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/cli/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "atlab/cli/toml.hpp"
#include "atlab/errors.hpp"

namespace atlab::cli {
namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: [" + path_ + "] must be a table");
  }

  template <class V>
  Reader& get(const char* key, V& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for " + name(key) + ": " + e.what());
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
        throw ConfigError("config: unknown key " + name(k));
      }
    }
  }

 private:
  std::string name(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

json scene_json(const scene::SceneConfig& s) {
  return {{"frame_rate", s.frame_rate},
          {"min_duration_s", s.min_duration_s},
          {"max_duration_s", s.max_duration_s},
          {"min_event_s", s.min_event_s},
          {"max_event_s", s.max_event_s},
          {"min_intensity", s.min_intensity},
          {"zipf_exponent", s.zipf_exponent},
          {"num_labels", s.num_labels},
          {"mix",
           {{"single", s.mix.single},
            {"sequential", s.mix.sequential},
            {"concurrent", s.mix.concurrent}}}};
}

json caption_json(const text::CaptionConfig& c) {
  return {{"p_before", c.p_before}, {"p_after", c.p_after},
          {"p_then", c.p_then},     {"p_followed_by", c.p_followed_by},
          {"p_as", c.p_as},         {"p_adverb", c.p_adverb}};
}

json render_json(const scene::RenderConfig& r) {
  return {{"frame_rate", r.frame_rate},
          {"feat_dim", r.feat_dim},
          {"noise_sigma", r.noise_sigma},
          {"ramp_fraction", r.ramp_fraction},
          {"vocab_seed", r.vocab_seed}};
}

}  // namespace

const std::vector<std::string>& known_protocols() {
  static const std::vector<std::string> p = {"retrieval", "then_as",   "pte_swap",
                                             "bat",       "zero_shot", "sed"};
  return p;
}

void validate_config(const ExperimentConfig& c) {
  scene::validate_config(c.generation.scene);
  text::validate_config(c.generation.caption);
  model::validate_config(c.model);
  const auto& g = c.generation;
  if (g.train_size < 2 || g.val_size == 0 || g.test_size == 0) {
    throw ConfigError("config: generation needs train_size >= 2 and non-empty val and test");
  }
  if (g.render.feat_dim != c.model.audio.feat_dim) {
    throw ConfigError("config: generation.render.feat_dim must equal model.audio.feat_dim");
  }
  if (g.render.frame_rate != g.scene.frame_rate || g.render.frame_rate != c.model.audio.frame_rate) {
    throw ConfigError("config: scene, render and model audio frame rates must agree");
  }
  if (!(c.acba.fade_s >= 0)) throw ConfigError("config: acba.fade_s must be non-negative");
  for (const auto& p : c.eval.protocols) {
    const auto& known = known_protocols();
    if (std::find(known.begin(), known.end(), p) == known.end()) {
      throw ConfigError("config: unknown protocol '" + p + "'");
    }
  }
  if (c.eval.ks.empty() || std::count(c.eval.ks.begin(), c.eval.ks.end(), 0u) > 0) {
    throw ConfigError("config: eval.ks must be non-empty and positive");
  }
  if (c.eval.bat_size == 0 || c.eval.bat_size % 2 != 0) {
    throw ConfigError("config: eval.bat_size must be positive and even");
  }
  if (!(c.eval.sed_hop_s > 0) || !(c.eval.sed_window_s > 0)) {
    throw ConfigError("config: eval.sed_hop_s and eval.sed_window_s must be positive");
  }
}

json to_json(const ExperimentConfig& c) {
  const auto& g = c.generation;
  return {{"train_seed", c.train_seed},
          {"generation",
           {{"seed", g.seed},
            {"train_size", g.train_size},
            {"val_size", g.val_size},
            {"test_size", g.test_size},
            {"probe_size", g.probe_size},
            {"scene", scene_json(g.scene)},
            {"caption", caption_json(g.caption)},
            {"render", render_json(g.render)}}},
          {"model", model::to_json(c.model)},
          {"acba", {{"count", c.acba.count}, {"seed", c.acba.seed}, {"fade_s", c.acba.fade_s}}},
          {"eval",
           {{"protocols", c.eval.protocols},
            {"ks", c.eval.ks},
            {"bat_size", c.eval.bat_size},
            {"seed", c.eval.seed},
            {"sed_hop_s", c.eval.sed_hop_s},
            {"sed_window_s", c.eval.sed_window_s}}}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  Reader top(j, "");
  top.get("train_seed", c.train_seed);
  if (const json* gj = top.sub("generation")) {
    auto& g = c.generation;
    Reader r(*gj, "generation");
    r.get("seed", g.seed)
        .get("train_size", g.train_size)
        .get("val_size", g.val_size)
        .get("test_size", g.test_size)
        .get("probe_size", g.probe_size);
    if (const json* sj = r.sub("scene")) {
      Reader s(*sj, "generation.scene");
      s.get("frame_rate", g.scene.frame_rate)
          .get("min_duration_s", g.scene.min_duration_s)
          .get("max_duration_s", g.scene.max_duration_s)
          .get("min_event_s", g.scene.min_event_s)
          .get("max_event_s", g.scene.max_event_s)
          .get("min_intensity", g.scene.min_intensity)
          .get("zipf_exponent", g.scene.zipf_exponent)
          .get("num_labels", g.scene.num_labels);
      if (const json* mj = s.sub("mix")) {
        Reader m(*mj, "generation.scene.mix");
        m.get("single", g.scene.mix.single)
            .get("sequential", g.scene.mix.sequential)
            .get("concurrent", g.scene.mix.concurrent)
            .finish();
      }
      s.finish();
    }
    if (const json* cj = r.sub("caption")) {
      Reader s(*cj, "generation.caption");
      s.get("p_before", g.caption.p_before)
          .get("p_after", g.caption.p_after)
          .get("p_then", g.caption.p_then)
          .get("p_followed_by", g.caption.p_followed_by)
          .get("p_as", g.caption.p_as)
          .get("p_adverb", g.caption.p_adverb)
          .finish();
    }
    if (const json* rj = r.sub("render")) {
      Reader s(*rj, "generation.render");
      s.get("frame_rate", g.render.frame_rate)
          .get("feat_dim", g.render.feat_dim)
          .get("noise_sigma", g.render.noise_sigma)
          .get("ramp_fraction", g.render.ramp_fraction)
          .get("vocab_seed", g.render.vocab_seed)
          .finish();
    }
    r.finish();
  }
  if (const json* mj = top.sub("model")) c.model = model::model_config_from_json(*mj);
  if (const json* aj = top.sub("acba")) {
    Reader r(*aj, "acba");
    r.get("count", c.acba.count).get("seed", c.acba.seed).get("fade_s", c.acba.fade_s).finish();
  }
  if (const json* ej = top.sub("eval")) {
    Reader r(*ej, "eval");
    r.get("protocols", c.eval.protocols)
        .get("ks", c.eval.ks)
        .get("bat_size", c.eval.bat_size)
        .get("seed", c.eval.seed)
        .get("sed_hop_s", c.eval.sed_hop_s)
        .get("sed_window_s", c.eval.sed_window_s)
        .finish();
  }
  top.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& toml_path) {
  std::ifstream f(toml_path);
  if (!f) throw ConfigError("cannot read config " + toml_path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return experiment_config_from_json(parse_toml(ss.str()));
}

std::string experiment_config_toml(const ExperimentConfig& c) {
  return "# " + std::string(kToolVersion) + " resolved experiment config\n" + to_toml(to_json(c));
}

}  // namespace atlab::cli
