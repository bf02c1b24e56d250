// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/evalsuite/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "atlab/errors.hpp"

namespace atlab::eval {
namespace {

using nlohmann::json;
using text::Caption;
using text::Preposition;

std::vector<std::size_t> own_index(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<std::size_t> ranks_of(const num::Tensor<float>& queries,
                                  const num::Tensor<float>& corpus) {
  const auto sims = similarity_matrix(queries, corpus);
  const auto truth = own_index(queries.rows());
  return true_item_ranks(sims, queries.rows(), corpus.rows(), truth);
}

double dot(const num::Tensor<float>& a, std::size_t i, const num::Tensor<float>& b,
           std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    s += static_cast<double>(a.at(i, c)) * static_cast<double>(b.at(j, c));
  }
  return s;
}

std::vector<Caption> captions_of(std::span<const EvalItem> items) {
  std::vector<Caption> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.caption);
  return out;
}

std::size_t segment_count(double duration_s, double segment_s) {
  return static_cast<std::size_t>(std::ceil(duration_s / segment_s - 1e-9));
}

constexpr std::size_t kGrid = 101;

double grid_point(std::size_t i) { return static_cast<double>(i) / 100.0; }

}  // namespace

std::vector<AudioRef> audio_refs(std::span<const EvalItem> items) {
  std::vector<AudioRef> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back({&it.clip, &it.scene});
  return out;
}

EvalReport retrieval_protocol(const Embedder& embedder, std::span<const EvalItem> items,
                              const std::vector<std::size_t>& ks) {
  if (items.empty()) throw DataError("retrieval: no items");
  if (ks.empty()) throw ArgumentError("retrieval: no k values");
  const auto texts = embedder.embed_texts(captions_of(items));
  const auto audio = embedder.embed_audio(audio_refs(items));
  const auto ranks = ranks_of(texts, audio);
  EvalReport r;
  r.protocol = "retrieval";
  r.params = {{"ks", ks}, {"corpus", items.size()}};
  for (std::size_t k : ks) r.metrics["R@" + std::to_string(k)] = recall_at_k(ranks, k);
  for (std::size_t i = 0; i < items.size(); ++i) {
    r.records.push_back({{"query", items[i].id}, {"rank", ranks[i]}});
  }
  return r;
}

EvalReport then_as_protocol(const Embedder& embedder, std::span<const EvalItem> items,
                            std::size_t k) {
  EvalReport r;
  r.protocol = "then_as";
  r.params = {{"k", k}};
  struct Direction {
    const char* name;
    Preposition from, to;
  };
  for (const Direction d : {Direction{"as", Preposition::kAs, Preposition::kThen},
                            Direction{"then", Preposition::kThen, Preposition::kAs}}) {
    std::vector<EvalItem> subset;
    for (const auto& it : items) {
      if (it.caption.preposition == d.from) subset.push_back(it);
    }
    if (subset.empty()) {
      throw DataError(std::string("then_as: no captions with '") + d.name + "'");
    }
    std::vector<Caption> original = captions_of(subset), substituted;
    for (const auto& c : original) substituted.push_back(text::swap_preposition(c, {{d.from, d.to}}));
    const auto audio = embedder.embed_audio(audio_refs(subset));
    const auto orig_ranks = ranks_of(embedder.embed_texts(original), audio);
    const auto sub_ranks = ranks_of(embedder.embed_texts(substituted), audio);
    const std::string suffix = "_R@" + std::to_string(k);
    r.metrics[std::string(d.name) + "/original" + suffix] = recall_at_k(orig_ranks, k);
    r.metrics[std::string(d.name) + "/substituted" + suffix] = recall_at_k(sub_ranks, k);
    r.params[std::string(d.name) + "_queries"] = subset.size();
    for (const auto& [variant, ranks] :
         {std::pair{"original", &orig_ranks}, std::pair{"substituted", &sub_ranks}}) {
      for (std::size_t i = 0; i < subset.size(); ++i) {
        r.records.push_back({{"direction", d.name},
                             {"variant", variant},
                             {"query", subset[i].id},
                             {"rank", (*ranks)[i]}});
      }
    }
  }
  return r;
}

EvalReport pte_swap_protocol(const Embedder& embedder, std::span<const EvalItem> items) {
  EvalReport r;
  r.protocol = "pte_swap";
  std::vector<std::size_t> kept;
  std::vector<Caption> original, swapped;
  for (std::size_t i = 0; i < items.size(); ++i) {
    try {
      swapped.push_back(text::swap_clauses(items[i].caption));
      original.push_back(items[i].caption);
      kept.push_back(i);
    } catch (const ArgumentError& e) {
      r.warnings.push_back(items[i].id + ": skipped, " + e.what());
    }
  }
  if (kept.empty()) throw DataError("pte_swap: no caption with two swappable clauses");
  // Every item's audio stays in the corpus, skipped or not.
  const auto audio = embedder.embed_audio(audio_refs(items));
  const auto o = embedder.embed_texts(original), s = embedder.embed_texts(swapped);
  const auto so = similarity_matrix(o, audio), ss = similarity_matrix(s, audio);
  const auto orig_ranks = true_item_ranks(so, kept.size(), items.size(), kept);
  const auto swap_ranks = true_item_ranks(ss, kept.size(), items.size(), kept);
  r.params = {{"skipped", items.size() - kept.size()}, {"corpus", items.size()}};
  r.metrics["original_R@1"] = recall_at_k(orig_ranks, 1);
  r.metrics["swapped_R@1"] = recall_at_k(swap_ranks, 1);
  r.metrics["drop"] = r.metrics["original_R@1"] - r.metrics["swapped_R@1"];
  for (const auto& [variant, ranks] :
       {std::pair{"original", &orig_ranks}, std::pair{"swapped", &swap_ranks}}) {
    for (std::size_t q = 0; q < kept.size(); ++q) {
      r.records.push_back(
          {{"variant", variant}, {"query", items[kept[q]].id}, {"rank", (*ranks)[q]}});
    }
  }
  return r;
}

EvalReport bat_protocol(const Embedder& embedder, std::span<const EvalItem> items) {
  if (items.empty()) throw DataError("bat: no items");
  std::vector<Caption> original = captions_of(items), swapped;
  for (const auto& c : original) {
    if (c.preposition != Preposition::kBefore && c.preposition != Preposition::kAfter) {
      throw DataError("bat: caption without 'before' or 'after': '" + c.text + "'");
    }
    swapped.push_back(text::swap_preposition(
        c, {{Preposition::kBefore, Preposition::kAfter}, {Preposition::kAfter, Preposition::kBefore}}));
  }
  const auto audio = embedder.embed_audio(audio_refs(items));
  const auto o = embedder.embed_texts(original), s = embedder.embed_texts(swapped);
  EvalReport r;
  r.protocol = "bat";
  double sum = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double so = dot(audio, i, o, i), ss = dot(audio, i, s, i);
    const double score = so > ss ? 1.0 : (so == ss ? 0.5 : 0.0);
    sum += score;
    r.records.push_back({{"query", items[i].id},
                         {"preposition", text::preposition_name(items[i].caption.preposition)},
                         {"sim_original", so},
                         {"sim_swapped", ss},
                         {"score", score}});
  }
  r.metrics["bat_percent"] = 100.0 * sum / static_cast<double>(items.size());
  return r;
}

std::string label_prompt(std::size_t label) {
  const auto& t = scene::kEventTypes.at(label);
  return std::string(t.mass ? "the " : "a ") + std::string(t.noun) + " " + std::string(t.verb);
}

std::vector<std::string> label_prompts(std::size_t num_labels) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < num_labels; ++l) out.push_back(label_prompt(l));
  return out;
}

std::vector<Caption> label_captions(std::span<const std::string> labels) {
  if (labels.empty()) throw ArgumentError("no label strings");
  std::vector<Caption> out;
  for (const auto& l : labels) out.push_back(text::caption_from_text(l));
  return out;
}

EvalReport zero_shot_protocol(const Embedder& embedder, std::span<const EvalItem> clips,
                              std::span<const std::size_t> truth,
                              std::span<const std::string> labels) {
  if (clips.empty()) throw DataError("zero_shot: no clips");
  if (truth.size() != clips.size()) throw DimensionError("zero_shot: one label per clip");
  const auto label_emb = embedder.embed_texts(label_captions(labels));
  const auto audio = embedder.embed_audio(audio_refs(clips));
  const auto sims = similarity_matrix(audio, label_emb);
  std::vector<std::size_t> pred(clips.size());
  EvalReport r;
  r.protocol = "zero_shot";
  r.params = {{"num_labels", labels.size()}, {"labels", labels}, {"f1", "macro"}};
  for (std::size_t i = 0; i < clips.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < labels.size(); ++l) {
      if (sims[i * labels.size() + l] > sims[i * labels.size() + best]) best = l;
    }
    pred[i] = best;
    r.records.push_back({{"clip", clips[i].id}, {"truth", truth[i]}, {"predicted", best}});
  }
  r.metrics["macro_f1"] = macro_f1(pred, truth, labels.size()).macro_f1;
  return r;
}

SedScores sed_scores(const Embedder& embedder, const scene::AudioClip& clip,
                     const num::Tensor<float>& label_embeddings, const SedOptions& o) {
  if (!(o.hop_s > 0.0) || !(o.window_s > 0.0)) throw ArgumentError("sed: hop and window must be positive");
  if (o.hop_s > clip.duration_s) throw ArgumentError("sed: hop larger than the clip");
  if (clip.duration_s + 1e-9 < o.window_s) throw ArgumentError("sed: clip shorter than one window");
  SedScores s;
  s.frame_rate = clip.frame_rate;
  s.duration_s = clip.duration_s;
  s.num_labels = label_embeddings.rows();
  s.window_frames = static_cast<std::size_t>(std::llround(o.window_s * clip.frame_rate));
  for (std::size_t k = 0;; ++k) {
    const double start = static_cast<double>(k) * o.hop_s;
    if (start + o.window_s > clip.duration_s + 1e-9) break;
    const auto f = static_cast<std::size_t>(std::floor(start * clip.frame_rate + 1e-9));
    s.start_frames.push_back(std::min(f, clip.num_frames() - s.window_frames));
  }
  // Windows that land on the same frames are encoded once.
  std::vector<std::size_t> unique = s.start_frames;
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::vector<scene::AudioClip> windows;
  const std::size_t d = clip.feat_dim();
  for (std::size_t f : unique) {
    std::vector<float> v(clip.frames.values().begin() + static_cast<std::ptrdiff_t>(f * d),
                         clip.frames.values().begin() +
                             static_cast<std::ptrdiff_t>((f + s.window_frames) * d));
    windows.push_back(
        scene::make_clip(num::Tensor<float>({s.window_frames, d}, std::move(v)), clip.frame_rate));
  }
  std::vector<AudioRef> refs;
  for (const auto& w : windows) refs.push_back({&w, nullptr});
  const auto emb = embedder.embed_audio(refs);
  const auto sims = similarity_matrix(emb, label_embeddings);
  s.scores.reserve(s.start_frames.size() * s.num_labels);
  std::size_t u = 0;
  for (std::size_t w = 0; w < s.start_frames.size(); ++w) {
    while (unique[u] != s.start_frames[w]) ++u;
    for (std::size_t l = 0; l < s.num_labels; ++l) {
      s.scores.push_back((sims[u * s.num_labels + l] + 1.0) / 2.0);
    }
  }
  return s;
}

std::vector<std::uint8_t> segment_activity(const SedScores& s, double threshold,
                                           double segment_s) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ArgumentError("sed: threshold outside [0, 1]");
  const std::size_t segs = segment_count(s.duration_s, segment_s);
  std::vector<std::uint8_t> out(segs * s.num_labels, 0);
  for (std::size_t w = 0; w < s.start_frames.size(); ++w) {
    const double a = static_cast<double>(s.start_frames[w]) / s.frame_rate;
    const double b = static_cast<double>(s.start_frames[w] + s.window_frames) / s.frame_rate;
    for (std::size_t g = 0; g < segs; ++g) {
      const double lo = static_cast<double>(g) * segment_s, hi = lo + segment_s;
      if (!(a < hi && b > lo)) continue;
      for (std::size_t l = 0; l < s.num_labels; ++l) {
        if (s.score(w, l) >= threshold) out[g * s.num_labels + l] = 1;
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> truth_activity(const scene::Scene& scene, double duration_s,
                                         std::size_t num_labels, double segment_s) {
  const std::size_t segs = segment_count(duration_s, segment_s);
  std::vector<std::uint8_t> out(segs * num_labels, 0);
  for (const auto& e : scene.events) {
    if (e.label >= num_labels) continue;
    for (std::size_t g = 0; g < segs; ++g) {
      const double lo = static_cast<double>(g) * segment_s, hi = lo + segment_s;
      if (e.onset_s < hi && e.onset_s + e.dur_s > lo) out[g * num_labels + e.label] = 1;
    }
  }
  return out;
}

SegmentCounts count_segments(std::span<const std::uint8_t> predicted,
                             std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw DimensionError("sed: activity shapes differ");
  SegmentCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    c.tp += truth[i] && predicted[i];
    c.fp += !truth[i] && predicted[i];
    c.fn += truth[i] && !predicted[i];
  }
  return c;
}

std::size_t best_grid_index(std::span<const double> f1) {
  if (f1.size() != kGrid) throw DimensionError("threshold_search: expected 101 grid values");
  std::size_t best = 0;
  for (std::size_t i = 1; i < f1.size(); ++i) {
    if (f1[i] > f1[best]) best = i;
  }
  return best;
}

double threshold_search(const std::function<double(double)>& f1_at) {
  std::vector<double> f1(kGrid);
  for (std::size_t i = 0; i < kGrid; ++i) f1[i] = f1_at(grid_point(i));
  return grid_point(best_grid_index(f1));
}

ThresholdSearch threshold_search(const Embedder& embedder, std::span<const EvalItem> validation,
                                 std::span<const std::string> labels, const SedOptions& o) {
  if (validation.empty()) throw ArgumentError("threshold_search: empty validation set");
  const auto label_emb = embedder.embed_texts(label_captions(labels));
  std::vector<SedScores> scores;
  std::vector<std::vector<std::uint8_t>> truth;
  for (const auto& it : validation) {
    scores.push_back(sed_scores(embedder, it.clip, label_emb, o));
    truth.push_back(truth_activity(it.scene, it.clip.duration_s, labels.size(), o.segment_s));
  }
  ThresholdSearch out;
  out.f1.resize(kGrid);
  for (std::size_t i = 0; i < kGrid; ++i) {
    SegmentCounts c;
    for (std::size_t v = 0; v < scores.size(); ++v) {
      c += count_segments(segment_activity(scores[v], grid_point(i), o.segment_s), truth[v]);
    }
    out.f1[i] = c.f1();
  }
  out.threshold = grid_point(best_grid_index(out.f1));
  return out;
}

EvalReport sed_protocol(const Embedder& embedder, std::span<const EvalItem> clips,
                        std::span<const std::string> labels, double threshold,
                        const SedOptions& o) {
  if (clips.empty()) throw DataError("sed: no clips");
  const auto label_emb = embedder.embed_texts(label_captions(labels));
  EvalReport r;
  r.protocol = "sed";
  r.params = {{"threshold", threshold}, {"hop_s", o.hop_s},         {"window_s", o.window_s},
              {"segment_s", o.segment_s}, {"labels", labels},       {"f1", "micro"}};
  SegmentCounts total;
  for (const auto& it : clips) {
    const auto scores = sed_scores(embedder, it.clip, label_emb, o);
    const auto pred = segment_activity(scores, threshold, o.segment_s);
    const auto truth = truth_activity(it.scene, it.clip.duration_s, labels.size(), o.segment_s);
    total += count_segments(pred, truth);
    // Cells that are inactive in both carry no information for F1.
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!pred[i] && !truth[i]) continue;
      r.records.push_back({{"clip", it.id},
                           {"segment", i / labels.size()},
                           {"label", i % labels.size()},
                           {"truth", truth[i] != 0},
                           {"predicted", pred[i] != 0}});
    }
  }
  r.metrics = {{"f1", total.f1()},
               {"precision", total.precision()},
               {"recall", total.recall()},
               {"threshold", threshold}};
  return r;
}

EvalReport sed_split_protocol(const Embedder& embedder, std::span<const EvalItem> clips,
                              std::span<const std::string> labels, std::uint64_t seed,
                              const SedOptions& o) {
  if (clips.size() < 2) throw ArgumentError("sed: need at least two clips to split");
  std::vector<std::size_t> order = own_index(clips.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
  const std::size_t n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(clips.size()))), 1,
      clips.size() - 1);
  std::vector<EvalItem> val, test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : test).push_back(clips[order[i]]);
  }
  const ThresholdSearch search = threshold_search(embedder, val, labels, o);
  EvalReport r = sed_protocol(embedder, test, labels, search.threshold, o);
  r.seed = seed;
  r.params["validation_clips"] = val.size();
  r.params["validation_f1"] = search.f1;
  return r;
}

}  // namespace atlab::eval
