// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "atlab/captiongen/caption.hpp"
#include "atlab/evalsuite/embedder.hpp"
#include "atlab/evalsuite/metrics.hpp"
#include "atlab/evalsuite/report.hpp"
#include "atlab/scenegen/render.hpp"
#include "atlab/scenegen/scene.hpp"

namespace atlab::eval {

/// One evaluation pair. Each caption is its own query and each item
/// contributes its clip to the corpus.
struct EvalItem {
  std::string id;
  text::Caption caption;
  scene::Scene scene;
  scene::AudioClip clip;
};

std::vector<AudioRef> audio_refs(std::span<const EvalItem> items);

/// Text-to-audio R@k for every k in ks.
EvalReport retrieval_protocol(const Embedder& embedder, std::span<const EvalItem> items,
                              const std::vector<std::size_t>& ks = {1, 5, 10});

/// For "as" and for "then" captions separately: R@k of the original and of
/// the preposition-substituted queries against the audio of the captions
/// that share the original preposition (the query's own clip included).
/// DataError when either preposition has no captions.
EvalReport then_as_protocol(const Embedder& embedder, std::span<const EvalItem> items,
                            std::size_t k = 10);

/// R@1 of original and clause-swapped queries over the items' audio; "drop"
/// is original minus swapped. Items whose caption cannot be swapped are
/// skipped with a warning and counted in params.skipped. DataError when no
/// item is left.
EvalReport pte_swap_protocol(const Embedder& embedder, std::span<const EvalItem> items);

/// Percentage of items whose audio is closer to the original caption than to
/// its before/after swap; exact ties score one half.
EvalReport bat_protocol(const Embedder& embedder, std::span<const EvalItem> items);

/// "a dog barks", "the rain falls", ...
std::string label_prompt(std::size_t label);
std::vector<std::string> label_prompts(std::size_t num_labels = scene::kNumEventTypes);

/// Label strings as captions; DataError for out-of-vocabulary words.
std::vector<text::Caption> label_captions(std::span<const std::string> labels);

/// Assigns each clip its most similar label (ties to the lowest index) and
/// reports macro-F1 against truth[i] ∈ [0, labels.size()).
EvalReport zero_shot_protocol(const Embedder& embedder, std::span<const EvalItem> clips,
                              std::span<const std::size_t> truth,
                              std::span<const std::string> labels);

struct SedOptions {
  double hop_s = 0.05;
  double window_s = 1.0;
  double segment_s = 1.0;
};

/// Window scores of one clip. Window starts are floored onto the frame grid,
/// so at 10 frames/s two consecutive 50 ms hops can share a window.
struct SedScores {
  std::vector<std::size_t> start_frames;
  std::size_t window_frames = 0;
  double frame_rate = 0.0;
  double duration_s = 0.0;
  std::size_t num_labels = 0;
  std::vector<double> scores;  // [windows × labels], (cos + 1) / 2

  double score(std::size_t w, std::size_t l) const { return scores[w * num_labels + l]; }
};

/// Encodes every window of the clip with the audio branch and scores it
/// against the label embeddings. ArgumentError when the hop exceeds the clip
/// or the clip is shorter than one window.
SedScores sed_scores(const Embedder& embedder, const scene::AudioClip& clip,
                     const num::Tensor<float>& label_embeddings, const SedOptions& options = {});

/// [segments × labels] activity: a label is active in a segment when any
/// window overlapping the segment scores at or above the threshold.
std::vector<std::uint8_t> segment_activity(const SedScores& scores, double threshold,
                                           double segment_s = 1.0);

/// Ground-truth [segments × labels] activity from the event intervals.
std::vector<std::uint8_t> truth_activity(const scene::Scene& scene, double duration_s,
                                         std::size_t num_labels, double segment_s = 1.0);

SegmentCounts count_segments(std::span<const std::uint8_t> predicted,
                             std::span<const std::uint8_t> truth);

/// Index of the best value in f1[0..100] over the grid t_i = i / 100; ties go
/// to the smallest threshold.
std::size_t best_grid_index(std::span<const double> f1);
double threshold_search(const std::function<double(double)>& f1_at);

struct ThresholdSearch {
  double threshold = 0.0;
  std::vector<double> f1;  // pooled segment F1 at each of the 101 grid points
};

/// Grid search of the pooled segment F1 over the validation clips.
ThresholdSearch threshold_search(const Embedder& embedder, std::span<const EvalItem> validation,
                                 std::span<const std::string> labels,
                                 const SedOptions& options = {});

/// Segment-based SED at a fixed threshold, pooled over clips (micro F1).
EvalReport sed_protocol(const Embedder& embedder, std::span<const EvalItem> clips,
                        std::span<const std::string> labels, double threshold,
                        const SedOptions& options = {});

/// Seeded 20/80 split: threshold search on the first part, sed_protocol on
/// the rest. ArgumentError for fewer than two clips.
EvalReport sed_split_protocol(const Embedder& embedder, std::span<const EvalItem> clips,
                              std::span<const std::string> labels, std::uint64_t seed,
                              const SedOptions& options = {});

}  // namespace atlab::eval
