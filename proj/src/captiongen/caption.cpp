// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/captiongen/caption.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "json.hpp"

#include "atlab/errors.hpp"

namespace atlab::text {

namespace {

constexpr std::string_view kPosNames[] = {"NOUN", "VERB", "DET",  "ADP",
                                          "ADV",  "ADJ",  "CONJ", "OTHER"};

struct Lexeme {
  std::string_view word;
  Pos pos;
};

// Words outside the event grammar, present so that hand-written captions in
// the same register can be tokenized and manipulated.
constexpr Lexeme kExtraLexicon[] = {
    {"vehicle", Pos::kNoun}, {"is", Pos::kOther},     {"passing", Pos::kVerb},
    {"through", Pos::kAdp},  {"forest", Pos::kNoun},  {"road", Pos::kNoun},
    {"birds", Pos::kNoun},   {"chirp", Pos::kVerb},   {"in", Pos::kAdp},
    {"background", Pos::kNoun}, {"two", Pos::kOther}, {"cars", Pos::kNoun},
    {"drive", Pos::kVerb},   {"past", Pos::kAdv},     {"distant", Pos::kAdj},
    {"semi", Pos::kNoun},
};

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// A caption as plain word lists, the form every manipulation edits.
struct Parts {
  std::vector<std::vector<std::string>> clauses;
  std::vector<std::size_t> events;
  std::vector<std::string> joiner;  // words between clause 0 and clause 1
  Preposition preposition = Preposition::kNone;
};

std::vector<std::string> words_of(const Caption& c, std::size_t begin, std::size_t end) {
  std::vector<std::string> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(vocabulary().entry(c.tokens[i]).token);
  return out;
}

Parts split(const Caption& c) {
  Parts p;
  p.preposition = c.preposition;
  for (const ClauseSpan& span : c.clauses) {
    p.clauses.push_back(words_of(c, span.begin, span.end));
    p.events.push_back(span.event);
  }
  if (c.clauses.size() >= 2) p.joiner = words_of(c, c.clauses[0].end, c.clauses[1].begin);
  return p;
}

std::uint32_t id_of(std::string_view word) {
  auto id = vocabulary().find(word);
  if (!id) throw DataError("out-of-vocabulary word '" + std::string(word) + "'");
  return *id;
}

Caption assemble(const Parts& p, bool capitalize) {
  Caption c;
  c.tokens.push_back(kClsId);
  c.preposition = p.preposition;
  auto push = [&](const std::string& w) { c.tokens.push_back(id_of(w)); };
  for (std::size_t i = 0; i < p.clauses.size(); ++i) {
    if (i == 1) {
      for (const auto& w : p.joiner) push(w);
    }
    ClauseSpan span;
    span.begin = c.tokens.size();
    for (const auto& w : p.clauses[i]) push(w);
    span.end = c.tokens.size();
    span.event = p.events[i];
    c.clauses.push_back(span);
  }
  for (auto id : c.tokens) c.pos.push_back(vocabulary().entry(id).pos);
  render_text(c, capitalize);
  return c;
}

std::vector<std::string> to_strings(const std::vector<std::string_view>& v) {
  return {v.begin(), v.end()};
}

}  // namespace

std::string_view pos_name(Pos p) { return kPosNames[static_cast<int>(p)]; }

Pos parse_pos(std::string_view name) {
  for (int i = 0; i < 8; ++i) {
    if (kPosNames[i] == name) return static_cast<Pos>(i);
  }
  throw DataError("unknown POS tag '" + std::string(name) + "'");
}

std::string_view preposition_name(Preposition p) {
  switch (p) {
    case Preposition::kNone:
      return "none";
    case Preposition::kBefore:
      return "before";
    case Preposition::kAfter:
      return "after";
    case Preposition::kThen:
      return "then";
    case Preposition::kFollowedBy:
      return "followed_by";
    case Preposition::kAs:
      return "as";
    case Preposition::kWith:
      return "with";
  }
  return "none";
}

Preposition parse_preposition(std::string_view name) {
  for (auto p : {Preposition::kNone, Preposition::kBefore, Preposition::kAfter,
                 Preposition::kThen, Preposition::kFollowedBy, Preposition::kAs,
                 Preposition::kWith}) {
    if (preposition_name(p) == name) return p;
  }
  if (name == "followed by") return Preposition::kFollowedBy;
  throw DataError("unknown preposition '" + std::string(name) + "'");
}

std::vector<std::string_view> preposition_words(Preposition p) {
  switch (p) {
    case Preposition::kNone:
      return {};
    case Preposition::kFollowedBy:
      return {"followed", "by"};
    default:
      return {preposition_name(p)};
  }
}

bool is_temporal(Preposition p) {
  return p == Preposition::kBefore || p == Preposition::kAfter || p == Preposition::kThen ||
         p == Preposition::kFollowedBy;
}

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() {
  add("[CLS]", Pos::kOther);
  add("[PAD]", Pos::kOther);
  add("a", Pos::kDet);
  add("the", Pos::kDet);
  for (const auto& e : scene::kEventTypes) add(std::string(e.noun), Pos::kNoun);
  for (const auto& e : scene::kEventTypes) add(std::string(e.verb), Pos::kVerb);
  for (std::string_view adv : {"loudly", "softly", "briefly"}) add(std::string(adv), Pos::kAdv);
  for (std::string_view adp : {"before", "after", "then", "followed", "by", "as", "with"}) {
    add(std::string(adp), Pos::kAdp);
  }
  add("and", Pos::kConj);
  for (const auto& lex : kExtraLexicon) add(std::string(lex.word), lex.pos);

  std::string digest;
  for (const auto& e : entries_) digest += e.token + "/" + std::string(pos_name(e.pos)) + ";";
  version_ = std::string(kGrammarVersion) + "+" + fnv1a_hex(digest).substr(0, 8);
}

void Vocabulary::add(std::string token, Pos pos) {
  if (index_.count(token)) return;  // shared verbs such as "rings"
  const auto id = static_cast<std::uint32_t>(entries_.size());
  index_.emplace(token, id);
  entries_.push_back({std::move(token), id, pos});
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries_) {
    j.push_back({{"token", e.token}, {"id", e.id}, {"pos", pos_name(e.pos)}});
  }
  return j.dump(1);
}

const Vocabulary& vocabulary() {
  static const Vocabulary vocab;
  return vocab;
}

// ------------------------------------------------------------- tokenization

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string normalize(std::string_view text) {
  std::string out;
  for (const auto& w : normalize_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

TokenizedText tokenize(std::string_view text) {
  TokenizedText t;
  t.tokens.push_back(kClsId);
  t.pos.push_back(Pos::kOther);
  for (const auto& w : normalize_words(text)) {
    const std::uint32_t id = id_of(w);
    t.tokens.push_back(id);
    t.pos.push_back(vocabulary().entry(id).pos);
  }
  return t;
}

std::string detokenize(const std::vector<std::uint32_t>& tokens) {
  std::string out;
  for (auto id : tokens) {
    if (id == kClsId || id == kPadId) continue;
    if (!out.empty()) out += ' ';
    out += vocabulary().entry(id).token;
  }
  return out;
}

void render_text(Caption& caption, bool capitalize) {
  caption.text = detokenize(caption.tokens);
  if (capitalize && !caption.text.empty()) {
    caption.text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(caption.text[0])));
  }
}

Caption caption_from_text(std::string_view text) {
  const std::vector<std::string> words = normalize_words(text);
  Parts p;
  std::size_t cut = words.size(), width = 0;
  for (std::size_t i = 0; i < words.size() && cut == words.size(); ++i) {
    const std::string& w = words[i];
    if (w == "followed" && i + 1 < words.size() && words[i + 1] == "by") {
      cut = i;
      width = 2;
      p.preposition = Preposition::kFollowedBy;
    } else if (w == "before" || w == "after" || w == "then" || w == "as" || w == "with") {
      cut = i;
      width = 1;
      p.preposition = parse_preposition(w);
    } else if (w == "and") {
      cut = i;
      width = 1;
    }
  }
  if (cut == words.size()) {
    if (!words.empty()) {
      p.clauses.emplace_back(words.begin(), words.end());
      p.events.push_back(0);
    }
  } else {
    p.clauses.emplace_back(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(cut));
    p.joiner.assign(words.begin() + static_cast<std::ptrdiff_t>(cut),
                    words.begin() + static_cast<std::ptrdiff_t>(cut + width));
    p.clauses.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(cut + width), words.end());
    if (p.preposition == Preposition::kAfter) {
      p.events = {1, 0};
    } else {
      p.events = {0, 1};
    }
  }
  Caption c = assemble(p, true);
  c.text = std::string(text);
  return c;
}

// -------------------------------------------------------------- realization

CaptionConfig CaptionConfig::from_corpus_shares(double before, double after, double then,
                                                double followed_by, double sequential_fraction) {
  if (!(sequential_fraction > 0)) {
    throw ConfigError("sequential fraction must be positive to host temporal prepositions");
  }
  CaptionConfig c;
  c.p_before = before / sequential_fraction;
  c.p_after = after / sequential_fraction;
  c.p_then = then / sequential_fraction;
  c.p_followed_by = followed_by / sequential_fraction;
  validate_config(c);
  return c;
}

CaptionConfig CaptionConfig::uniform_temporal() {
  CaptionConfig c;
  c.p_before = c.p_after = c.p_then = c.p_followed_by = 0.25;
  return c;
}

void validate_config(const CaptionConfig& c) {
  for (double p : {c.p_before, c.p_after, c.p_then, c.p_followed_by, c.p_as, c.p_adverb}) {
    if (!(p >= 0 && p <= 1)) throw ConfigError("caption probabilities must lie in [0, 1]");
  }
  if (c.p_before + c.p_after + c.p_then + c.p_followed_by > 1.0 + 1e-9) {
    throw ConfigError("temporal preposition probabilities sum to more than 1");
  }
}

Caption realize_caption(const scene::Scene& scene, std::uint64_t seed,
                        const CaptionConfig& config) {
  validate_config(config);
  scene::check_scene(scene);
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); };

  auto clause = [&](const scene::SoundEvent& e) {
    const scene::EventType& type = scene::kEventTypes[e.label];
    std::vector<std::string> w;
    w.emplace_back(type.mass || uniform() < 0.5 ? "the" : "a");
    w.emplace_back(type.noun);
    w.emplace_back(type.verb);
    const char* adverb = e.intensity >= 0.85 ? "loudly"
                         : e.intensity <= 0.6 ? "softly"
                         : e.dur_s <= 1.3     ? "briefly"
                                              : nullptr;
    if (adverb != nullptr && uniform() < config.p_adverb) w.emplace_back(adverb);
    return w;
  };

  Parts p;
  for (std::size_t i = 0; i < scene.events.size() && i < 2; ++i) {
    p.clauses.push_back(clause(scene.events[i]));
    p.events.push_back(i);
  }
  switch (scene.relation) {
    case scene::Relation::kSingle:
      break;
    case scene::Relation::kSequential: {
      const double u = uniform();
      double acc = 0.0;
      for (auto [prep, prob] : {std::pair{Preposition::kBefore, config.p_before},
                                {Preposition::kAfter, config.p_after},
                                {Preposition::kThen, config.p_then},
                                {Preposition::kFollowedBy, config.p_followed_by}}) {
        acc += prob;
        if (u < acc) {
          p.preposition = prep;
          break;
        }
      }
      if (p.preposition == Preposition::kNone) {
        p.joiner = {"and"};
      } else {
        p.joiner = to_strings(preposition_words(p.preposition));
      }
      if (p.preposition == Preposition::kAfter) {
        std::swap(p.clauses[0], p.clauses[1]);
        std::swap(p.events[0], p.events[1]);
      }
      break;
    }
    case scene::Relation::kConcurrent:
      p.preposition = uniform() < config.p_as ? Preposition::kAs : Preposition::kWith;
      p.joiner = to_strings(preposition_words(p.preposition));
      break;
  }
  return assemble(p, false);
}

// ------------------------------------------------------------ manipulations

Caption nv_filter(const Caption& caption) {
  Parts in = split(caption);
  Parts out;
  for (std::size_t i = 0; i < in.clauses.size(); ++i) {
    const ClauseSpan& span = caption.clauses[i];
    std::vector<std::string> kept;
    for (std::size_t t = span.begin; t < span.end; ++t) {
      if (caption.pos[t] == Pos::kNoun || caption.pos[t] == Pos::kVerb) {
        kept.push_back(vocabulary().entry(caption.tokens[t]).token);
      }
    }
    if (!kept.empty()) {
      out.clauses.push_back(std::move(kept));
      out.events.push_back(in.events[i]);
    }
  }
  if (out.clauses.empty()) {
    throw ArgumentError("nv_filter: no noun or verb in '" + caption.text + "'");
  }
  return assemble(out, true);
}

Caption swap_preposition(const Caption& caption,
                         const std::map<Preposition, Preposition>& mapping) {
  if (caption.preposition == Preposition::kNone) {
    throw ArgumentError("swap_preposition: caption has no preposition: '" + caption.text + "'");
  }
  auto it = mapping.find(caption.preposition);
  if (it == mapping.end()) {
    throw ArgumentError("swap_preposition: '" + std::string(preposition_name(caption.preposition)) +
                        "' is not in the mapping");
  }
  Parts p = split(caption);
  p.preposition = it->second;
  p.joiner = to_strings(preposition_words(it->second));
  return assemble(p, true);
}

Caption swap_clauses(const Caption& caption) {
  if (caption.clauses.size() != 2 || caption.preposition == Preposition::kNone) {
    throw ArgumentError("swap_clauses: need two clauses around a preposition: '" +
                        caption.text + "'");
  }
  Parts p = split(caption);
  std::swap(p.clauses[0], p.clauses[1]);
  std::swap(p.events[0], p.events[1]);
  return assemble(p, true);
}

PteSubset build_pte(const std::vector<Caption>& captions) {
  PteSubset out;
  for (auto p : {Preposition::kBefore, Preposition::kAfter, Preposition::kThen,
                 Preposition::kFollowedBy}) {
    out.counts[p] = 0;
  }
  for (std::size_t i = 0; i < captions.size(); ++i) {
    if (is_temporal(captions[i].preposition)) {
      out.indices.push_back(i);
      ++out.counts[captions[i].preposition];
    }
  }
  return out;
}

BatSubset build_bat(const std::vector<Caption>& captions, const std::vector<std::size_t>& pte,
                    std::size_t n, std::uint64_t seed) {
  if (n % 2 != 0) throw ArgumentError("build_bat: n must be even");
  std::vector<std::size_t> before, after;
  for (std::size_t i : pte) {
    if (captions.at(i).preposition == Preposition::kBefore) before.push_back(i);
    if (captions.at(i).preposition == Preposition::kAfter) after.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(before.begin(), before.end(), rng);
  std::shuffle(after.begin(), after.end(), rng);
  const std::size_t half = std::min({n / 2, before.size(), after.size()});
  BatSubset out;
  out.requested = n;
  if (half < n / 2) {
    out.warning = "build_bat: only " + std::to_string(before.size()) + " before / " +
                  std::to_string(after.size()) + " after captions available; using a balanced set of " +
                  std::to_string(2 * half) + " instead of " + std::to_string(n);
  }
  std::sort(before.begin(), before.begin() + static_cast<std::ptrdiff_t>(half));
  std::sort(after.begin(), after.begin() + static_cast<std::ptrdiff_t>(half));
  out.indices.assign(before.begin(), before.begin() + static_cast<std::ptrdiff_t>(half));
  out.indices.insert(out.indices.end(), after.begin(), after.begin() + static_cast<std::ptrdiff_t>(half));
  return out;
}

}  // namespace atlab::text
