// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "atlab/scenegen/scene.hpp"

namespace atlab::text {

enum class Pos { kNoun, kVerb, kDet, kAdp, kAdv, kAdj, kConj, kOther };

std::string_view pos_name(Pos p);
Pos parse_pos(std::string_view name);

enum class Preposition { kNone, kBefore, kAfter, kThen, kFollowedBy, kAs, kWith };

std::string_view preposition_name(Preposition p);  // "followed_by" for kFollowedBy
Preposition parse_preposition(std::string_view name);
// Surface words, e.g. {"followed", "by"}; empty for kNone.
std::vector<std::string_view> preposition_words(Preposition p);
// True for before/after/then/followed by.
bool is_temporal(Preposition p);

inline constexpr std::uint32_t kClsId = 0;
inline constexpr std::uint32_t kPadId = 1;
inline constexpr std::string_view kGrammarVersion = "atlab-grammar-1";

struct VocabEntry {
  std::string token;
  std::uint32_t id;
  Pos pos;
};

/// Closed token set. Ids are assigned in a fixed order, so the mapping is
/// stable for a given grammar version.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const { return entries_.size(); }
  const VocabEntry& entry(std::uint32_t id) const { return entries_.at(id); }
  std::optional<std::uint32_t> find(std::string_view token) const;
  // Hash over tokens and tags; changes whenever the vocabulary changes.
  const std::string& version() const { return version_; }
  std::string to_json() const;

 private:
  void add(std::string token, Pos pos);

  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::string version_;
};

const Vocabulary& vocabulary();

struct ClauseSpan {
  std::size_t begin = 0;  // token index, [begin, end)
  std::size_t end = 0;
  std::size_t event = 0;  // index into the source scene's events

  bool operator==(const ClauseSpan&) const = default;
};

/// A caption with the structure needed by every text manipulation.
/// tokens[0] is always [CLS].
struct Caption {
  std::string text;
  std::vector<std::uint32_t> tokens;
  std::vector<Pos> pos;
  std::vector<ClauseSpan> clauses;
  Preposition preposition = Preposition::kNone;

  bool operator==(const Caption&) const = default;
};

struct TokenizedText {
  std::vector<std::uint32_t> tokens;
  std::vector<Pos> pos;
};

/// Lowercases, strips punctuation and splits on whitespace.
std::vector<std::string> normalize_words(std::string_view text);
std::string normalize(std::string_view text);

/// [CLS] followed by one id per word. DataError naming the first unknown word.
TokenizedText tokenize(std::string_view text);
/// Space-joined lowercase words, skipping [CLS] and [PAD].
std::string detokenize(const std::vector<std::uint32_t>& tokens);

/// Parses in-vocabulary text into a Caption: clauses split at the first
/// connective (before, after, then, followed by, as, with, and). Clause event
/// links follow the order the text asserts ("X after Y" links X to event 1).
Caption caption_from_text(std::string_view text);

/// Re-renders caption.text from its tokens, capitalizing the first word.
void render_text(Caption& caption, bool capitalize = true);

/// Per-relation realization choices.
struct CaptionConfig {
  // Conditional probabilities of joining a sequential scene with each
  // temporal preposition; the remainder joins with the order-neutral "and".
  double p_before = 0.008 / 0.4;
  double p_after = 0.009 / 0.4;
  double p_then = 0.066 / 0.4;
  double p_followed_by = 0.068 / 0.4;
  // Probability that a concurrent scene uses "as" (otherwise "with").
  double p_as = 0.5;
  // Probability of attaching an adverb when the event qualifies for one.
  double p_adverb = 0.5;

  /// Shares of all captions (e.g. 0.008 for "before") converted to
  /// conditionals given the fraction of scenes that are sequential.
  static CaptionConfig from_corpus_shares(double before, double after, double then,
                                          double followed_by, double sequential_fraction);
  /// Every sequential scene uses one of the four prepositions uniformly.
  static CaptionConfig uniform_temporal();
};

void validate_config(const CaptionConfig& config);

/// Realizes a lowercase caption for the scene. Each event becomes
/// "det noun verb [adverb]"; sequential scenes join two clauses with a
/// temporal preposition (clause order inverted for "after") or "and",
/// concurrent scenes with "as" or "with".
Caption realize_caption(const scene::Scene& scene, std::uint64_t seed,
                        const CaptionConfig& config = {});

/// Keeps [CLS] plus NOUN and VERB tokens. The preposition is dropped, clause
/// spans are recomputed over the surviving tokens. ArgumentError if no word
/// survives.
Caption nv_filter(const Caption& caption);

/// Replaces only the preposition tokens. ArgumentError when the caption has
/// no preposition or its preposition is not in the mapping.
Caption swap_preposition(const Caption& caption, const std::map<Preposition, Preposition>& mapping);

/// Exchanges the two clauses around the unchanged preposition.
/// ArgumentError unless there are exactly two clauses and a preposition.
Caption swap_clauses(const Caption& caption);

struct PteSubset {
  std::vector<std::size_t> indices;  // into the input, ascending
  std::map<Preposition, std::size_t> counts;
};

/// Captions whose preposition is before, after, then or followed by.
PteSubset build_pte(const std::vector<Caption>& captions);

struct BatSubset {
  std::vector<std::size_t> indices;  // n/2 "before" then n/2 "after"
  std::size_t requested = 0;
  std::string warning;  // non-empty when fewer than requested were available
};

/// Balanced before/after selection from the PTe indices, deterministic in seed.
BatSubset build_bat(const std::vector<Caption>& captions, const std::vector<std::size_t>& pte,
                    std::size_t n, std::uint64_t seed);

}  // namespace atlab::text
