// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

// Independent reading of caption text, used to check that generated and
// manipulated captions tell the truth about event order. Deliberately shares
// no code with the caption library beyond the event table.

#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atlab/scenegen/scene.hpp"

namespace atlab::testing {

struct AssertedOrder {
  // Labels in the order the text says they happened; empty when the text
  // makes no ordering claim.
  std::vector<std::size_t> order;
  bool concurrent = false;
  std::vector<std::size_t> mentioned;  // labels in text order
};

inline std::optional<std::size_t> label_of_clause(const std::vector<std::string>& words) {
  for (std::size_t l = 0; l < scene::kNumEventTypes; ++l) {
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
      if (words[i] == scene::kEventTypes[l].noun && words[i + 1] == scene::kEventTypes[l].verb) {
        return l;
      }
    }
  }
  return std::nullopt;
}

inline AssertedOrder read_caption(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  for (std::string w; in >> w;) {
    std::string clean;
    for (char c : w) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        clean += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
    }
    if (!clean.empty()) words.push_back(clean);
  }
  std::size_t cut = words.size(), width = 0;
  std::string connective;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string& w = words[i];
    if (w == "followed" && i + 1 < words.size() && words[i + 1] == "by") {
      cut = i, width = 2, connective = "followed by";
      break;
    }
    if (w == "before" || w == "after" || w == "then" || w == "as" || w == "with" || w == "and") {
      cut = i, width = 1, connective = w;
      break;
    }
  }
  AssertedOrder out;
  std::vector<std::string> left(words.begin(), words.begin() + static_cast<long>(cut));
  if (auto l = label_of_clause(left)) out.mentioned.push_back(*l);
  if (cut == words.size()) {
    out.order = out.mentioned;
    return out;
  }
  std::vector<std::string> right(words.begin() + static_cast<long>(cut + width), words.end());
  if (auto l = label_of_clause(right)) out.mentioned.push_back(*l);
  if (out.mentioned.size() != 2) return out;
  const std::size_t a = out.mentioned[0], b = out.mentioned[1];
  if (connective == "before" || connective == "then" || connective == "followed by") {
    out.order = {a, b};
  } else if (connective == "after") {
    out.order = {b, a};
  } else if (connective == "as" || connective == "with") {
    out.concurrent = true;
  }
  return out;
}

}  // namespace atlab::testing
