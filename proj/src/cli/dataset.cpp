// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/cli/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "atlab/errors.hpp"
#include "atlab/scenegen/acba.hpp"

namespace atlab::cli {
namespace {

using nlohmann::json;

constexpr std::uint64_t kCaptionStream = 0x6a09e667f3bcc909ULL;

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

json row_json(const Sample& s, const std::string& audio_path) {
  json pos = json::array(), clauses = json::array(), events = json::array();
  for (auto p : s.caption.pos) pos.push_back(text::pos_name(p));
  for (const auto& c : s.caption.clauses) clauses.push_back({c.begin, c.end, c.event});
  for (const auto& e : s.scene.events) {
    events.push_back(
        {{"label", e.label}, {"onset_s", e.onset_s}, {"dur_s", e.dur_s}, {"intensity", e.intensity}});
  }
  json row = {{"id", s.id},
          {"split", s.split},
          {"text", s.caption.text},
          {"tokens", s.caption.tokens},
          {"pos", pos},
          {"clauses", clauses},
          {"preposition", text::preposition_name(s.caption.preposition)},
          {"relation", scene::relation_name(s.scene.relation)},
          {"duration_s", s.scene.duration_s},
          {"scene_seed", s.scene.seed},
          {"events", events},
          {"audio_path", audio_path},
          {"frame_rate", s.clip.frame_rate},
          {"provenance", provenance_name(s.provenance)}};
  if (!s.sources.empty()) row["sources"] = s.sources;
  return row;
}

Sample row_sample(const json& r, const std::filesystem::path& dir) {
  Sample s;
  s.id = r.at("id").get<std::string>();
  s.split = r.at("split").get<std::string>();
  s.caption.text = r.at("text").get<std::string>();
  s.caption.tokens = r.at("tokens").get<std::vector<std::uint32_t>>();
  for (const auto& p : r.at("pos")) s.caption.pos.push_back(text::parse_pos(p.get<std::string>()));
  for (const auto& c : r.at("clauses")) {
    s.caption.clauses.push_back(
        {c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), c.at(2).get<std::size_t>()});
  }
  s.caption.preposition = text::parse_preposition(r.at("preposition").get<std::string>());
  s.scene.relation = scene::parse_relation(r.at("relation").get<std::string>());
  s.scene.duration_s = r.at("duration_s").get<double>();
  s.scene.seed = r.at("scene_seed").get<std::uint64_t>();
  for (const auto& e : r.at("events")) {
    s.scene.events.push_back({e.at("label").get<std::size_t>(), e.at("onset_s").get<double>(),
                              e.at("dur_s").get<double>(), e.at("intensity").get<double>()});
  }
  s.provenance = parse_provenance(r.at("provenance").get<std::string>());
  if (r.contains("sources")) s.sources = r.at("sources").get<std::vector<std::string>>();
  const std::filesystem::path audio = dir / r.at("audio_path").get<std::string>();
  const double rate = r.at("frame_rate").get<double>();
  if (!(rate > 0)) throw DataError("row '" + s.id + "': frame_rate must be positive");
  s.clip = scene::make_clip(scene::read_atf1(audio), rate);
  if (std::abs(s.clip.duration_s - s.scene.duration_s) > 0.5 / rate) {
    throw DataError("row '" + s.id + "': frames last " + std::to_string(s.clip.duration_s) +
                    " s but the scene lasts " + std::to_string(s.scene.duration_s) + " s");
  }
  scene::check_scene(s.scene);
  return s;
}

}  // namespace

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kGenerated: return "generated";
    case Provenance::kAcba: return "acba";
    case Provenance::kNvFiltered: return "nv_filtered";
    case Provenance::kManipulated: return "manipulated";
  }
  return "generated";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "generated") return Provenance::kGenerated;
  if (name == "acba") return Provenance::kAcba;
  if (name == "nv_filtered") return Provenance::kNvFiltered;
  if (name == "manipulated") return Provenance::kManipulated;
  throw DataError("unknown provenance '" + std::string(name) + "'");
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kProbe: return "probe";
  }
  return "train";
}

scene::PrototypeTable prototypes_for(const GenerationConfig& c) {
  return scene::PrototypeTable(c.scene.num_labels, c.render.feat_dim, c.render.vocab_seed);
}

std::vector<Sample> generate_split(const GenerationConfig& c, Split split,
                                   const scene::PrototypeTable& prototypes) {
  std::size_t n = 0;
  scene::SceneConfig sc = c.scene;
  text::CaptionConfig cc = c.caption;
  switch (split) {
    case Split::kTrain: n = c.train_size; break;
    case Split::kVal: n = c.val_size; break;
    case Split::kTest: n = c.test_size; break;
    case Split::kProbe:
      n = c.probe_size;
      sc.mix = {0.0, 1.0, 0.0};
      cc = text::CaptionConfig::uniform_temporal();
      cc.p_adverb = c.caption.p_adverb;
      break;
  }
  const std::uint64_t master = scene::derive_seed(c.seed, static_cast<std::uint64_t>(split) + 1);
  const std::string name(split_name(split));
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = name + "-" + padded(i);
    s.split = name;
    s.scene = scene::sample_scene(scene::derive_seed(master, i), sc);
    s.caption = text::realize_caption(s.scene, scene::derive_seed(master ^ kCaptionStream, i), cc);
    s.clip = scene::render_scene(s.scene, prototypes, c.render);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> synthesize_acba_samples(const std::vector<Sample>& train, std::size_t count,
                                            std::uint64_t seed, double fade_s) {
  std::vector<scene::AcbaSource> pool;
  std::vector<const Sample*> pool_rows;
  for (const auto& s : train) {
    if (s.provenance == Provenance::kGenerated && scene::acba_eligible(s.caption)) {
      pool.push_back({s.caption, s.clip, s.scene});
      pool_rows.push_back(&s);
    }
  }
  std::vector<Sample> out;
  if (count == 0) return out;
  auto pairs = scene::synthesize_acba(pool, count, seed, fade_s);
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Sample s;
    s.id = "acba-" + padded(i);
    s.split = "train";
    s.caption = std::move(pairs[i].caption);
    s.scene = std::move(pairs[i].scene);
    s.clip = std::move(pairs[i].clip);
    s.provenance = Provenance::kAcba;
    s.sources = {pool_rows[pairs[i].first]->id, pool_rows[pairs[i].second]->id};
    out.push_back(std::move(s));
  }
  return out;
}

ManifestHeader make_header(std::string dataset_id, std::string split) {
  ManifestHeader h;
  h.tool_version = std::string(kToolVersion);
  h.grammar_version = std::string(text::kGrammarVersion);
  h.vocab_version = text::vocabulary().version();
  h.dataset_id = std::move(dataset_id);
  h.split = std::move(split);
  return h;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  const std::filesystem::path dir = path.parent_path().empty() ? "." : path.parent_path();
  std::filesystem::create_directories(dir / "audio");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  const json header = {{"format", m.header.format},
                       {"tool_version", m.header.tool_version},
                       {"grammar_version", m.header.grammar_version},
                       {"vocab_version", m.header.vocab_version},
                       {"dataset_id", m.header.dataset_id},
                       {"split", m.header.split},
                       {"rows", m.samples.size()},
                       {"extra", m.header.extra}};
  f << json{{"header", header}}.dump() << '\n';
  std::set<std::string> ids;
  for (const auto& s : m.samples) {
    if (!ids.insert(s.id).second) throw DataError("duplicate id '" + s.id + "' in manifest");
    const std::string rel = "audio/" + s.id + ".atf";
    scene::write_atf1(dir / rel, s.clip.frames);
    f << row_json(s, rel).dump() << '\n';
  }
  if (!f) throw DataError("short write to " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest " + path.string());
  const std::filesystem::path dir = path.parent_path().empty() ? "." : path.parent_path();
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  try {
    if (!std::getline(f, line)) throw DataError(path.string() + ": empty manifest");
    ++line_no;
    const json h = json::parse(line).at("header");
    m.header.format = h.at("format").get<std::string>();
    if (m.header.format != "atlab-manifest-1") {
      throw DataError(path.string() + ": unsupported manifest format '" + m.header.format + "'");
    }
    m.header.tool_version = h.at("tool_version").get<std::string>();
    m.header.grammar_version = h.at("grammar_version").get<std::string>();
    m.header.vocab_version = h.at("vocab_version").get<std::string>();
    m.header.dataset_id = h.at("dataset_id").get<std::string>();
    m.header.split = h.at("split").get<std::string>();
    m.header.extra = h.at("extra");
    const auto rows = h.at("rows").get<std::size_t>();
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      Sample s = row_sample(json::parse(line), dir);
      if (!ids.insert(s.id).second) throw DataError("duplicate id '" + s.id + "'");
      m.samples.push_back(std::move(s));
    }
    if (m.samples.size() != rows) {
      throw DataError(path.string() + ": header promises " + std::to_string(rows) + " rows, found " +
                      std::to_string(m.samples.size()));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  } catch (const Error& e) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  return m;
}

model::PairSet to_pairs(const std::vector<Sample>& samples) {
  model::PairSet p;
  for (const auto& s : samples) {
    p.ids.push_back(s.id);
    p.tokens.push_back(s.caption.tokens);
    p.clips.push_back(s.clip);
  }
  return p;
}

std::vector<eval::EvalItem> to_items(const std::vector<Sample>& samples) {
  std::vector<eval::EvalItem> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.id, s.caption, s.scene, s.clip});
  return out;
}

json preposition_histogram(const std::vector<Sample>& samples) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples) counts[std::string(text::preposition_name(s.caption.preposition))]++;
  std::vector<text::Caption> caps;
  for (const auto& s : samples) caps.push_back(s.caption);
  const auto pte = text::build_pte(caps);
  json out = {{"captions", samples.size()}, {"pte", pte.indices.size()}};
  json shares = json::object();
  for (const char* p : {"before", "after", "then", "followed_by", "as", "with", "none"}) {
    const std::size_t n = counts.contains(p) ? counts[p] : 0;
    shares[p] = {{"count", n},
                 {"share", samples.empty() ? 0.0 : static_cast<double>(n) / samples.size()}};
  }
  out["prepositions"] = shares;
  return out;
}

std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace atlab::cli
