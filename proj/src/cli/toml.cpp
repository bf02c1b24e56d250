// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/cli/toml.hpp"

#include <cctype>
#include <charconv>
#include <sstream>
#include <vector>

#include "atlab/errors.hpp"

namespace atlab::cli {
namespace {

using nlohmann::json;

class LineParser {
 public:
  LineParser(std::string_view s, std::size_t line) : s_(s), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_space() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  bool at_end_or_comment() {
    skip_space();
    return i_ >= s_.size() || s_[i_] == '#';
  }
  bool eat(char c) {
    skip_space();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  std::string key() {
    skip_space();
    const std::size_t b = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_' ||
                              s_[i_] == '-')) {
      ++i_;
    }
    if (b == i_) fail("expected a key");
    return std::string(s_.substr(b, i_ - b));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts = {key()};
    while (eat('.')) parts.push_back(key());
    return parts;
  }

  json value() {
    skip_space();
    if (i_ >= s_.size()) fail("missing value");
    const char c = s_[i_];
    if (c == '"') return string();
    if (c == '[') return array();
    if (s_.substr(i_, 4) == "true") {
      i_ += 4;
      return true;
    }
    if (s_.substr(i_, 5) == "false") {
      i_ += 5;
      return false;
    }
    return number();
  }

 private:
  json string() {
    ++i_;
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      char c = s_[i_++];
      if (c == '\\') {
        if (i_ >= s_.size()) fail("unterminated escape");
        const char e = s_[i_++];
        switch (e) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (i_ >= s_.size()) fail("unterminated string");
    ++i_;
    return out;
  }

  json array() {
    ++i_;
    json out = json::array();
    while (true) {
      if (eat(']')) return out;
      out.push_back(value());
      if (eat(']')) return out;
      expect(',');
    }
  }

  json number() {
    const std::size_t b = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '+' ||
                              s_[i_] == '-' || s_[i_] == '.' || s_[i_] == '_')) {
      ++i_;
    }
    std::string tok;
    for (char c : s_.substr(b, i_ - b)) {
      if (c != '_') tok += c;
    }
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
    const char* last = tok.data() + tok.size();
    if (is_float) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || p != last) fail("bad number '" + tok + "'");
      return v;
    }
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last) fail("bad value '" + tok + "'");
    return v;
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t i_ = 0;
};

json* descend(json& root, const std::vector<std::string>& path, const LineParser& lp) {
  json* node = &root;
  for (const auto& p : path) {
    if (!node->contains(p)) (*node)[p] = json::object();
    node = &(*node)[p];
    if (!node->is_object()) lp.fail("'" + p + "' is both a value and a table");
  }
  return node;
}

void write_scalar(std::ostringstream& out, const json& v) {
  if (v.is_string()) {
    out << '"';
    for (char c : v.get<std::string>()) {
      switch (c) {
        case '"': out << "\\\""; break;
        case '\\': out << "\\\\"; break;
        case '\n': out << "\\n"; break;
        case '\t': out << "\\t"; break;
        default: out << c;
      }
    }
    out << '"';
  } else if (v.is_array()) {
    out << '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ", ";
      write_scalar(out, v[i]);
    }
    out << ']';
  } else if (v.is_number_float()) {
    std::string s = v.dump();
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    out << s;
  } else if (v.is_boolean() || v.is_number()) {
    out << v.dump();
  } else {
    throw ConfigError("to_toml: unsupported value " + v.dump());
  }
}

void write_table(std::ostringstream& out, const json& t, const std::string& name) {
  for (const auto& [k, v] : t.items()) {
    if (v.is_object()) continue;
    out << k << " = ";
    write_scalar(out, v);
    out << '\n';
  }
  for (const auto& [k, v] : t.items()) {
    if (!v.is_object()) continue;
    const std::string sub = name.empty() ? k : name + "." + k;
    out << "\n[" << sub << "]\n";
    write_table(out, v, sub);
  }
}

}  // namespace

json parse_toml(std::string_view text) {
  json root = json::object();
  json* table = &root;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    LineParser lp(line, line_no);
    if (lp.at_end_or_comment()) continue;
    if (lp.eat('[')) {
      const auto path = lp.dotted_key();
      lp.expect(']');
      if (!lp.at_end_or_comment()) lp.fail("trailing characters after table header");
      table = descend(root, path, lp);
      continue;
    }
    const std::string k = lp.key();
    lp.expect('=');
    json v = lp.value();
    if (!lp.at_end_or_comment()) lp.fail("trailing characters after value");
    if (table->contains(k)) lp.fail("duplicate key '" + k + "'");
    (*table)[k] = std::move(v);
  }
  return root;
}

std::string to_toml(const json& doc) {
  if (!doc.is_object()) throw ConfigError("to_toml: document must be a table");
  std::ostringstream out;
  write_table(out, doc, "");
  return out.str();
}

}  // namespace atlab::cli
