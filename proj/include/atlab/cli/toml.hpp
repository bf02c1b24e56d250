// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace atlab::cli {

/// Reads the TOML subset used by experiment configs: comments, [table] and
/// [dotted.table] headers, bare keys, basic strings, integers, floats,
/// booleans and single-line arrays of those. Throws ConfigError with the
/// line number on anything else.
nlohmann::json parse_toml(std::string_view text);

/// Writes a JSON object of scalars, scalar arrays and nested objects in the
/// same subset. Floats keep their shortest round-trip form.
std::string to_toml(const nlohmann::json& doc);

}  // namespace atlab::cli
