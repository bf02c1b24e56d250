// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace atlab::eval {

/// Outcome of one protocol run. Every metric can be rebuilt from the
/// per-item records plus the parameters kept in `params`.
struct EvalReport {
  std::string protocol;
  std::map<std::string, double> metrics;
  std::vector<nlohmann::json> records;
  // Protocol parameters the recomputation needs (k values, threshold, ...).
  nlohmann::json params = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::string dataset_id;
  std::string checkpoint_id;
  std::uint64_t seed = 0;
};

/// Everything except the records.
nlohmann::json summary_json(const EvalReport& report);

/// Writes <dir>/<protocol>.json and <dir>/<protocol>.jsonl.
void write_report(const std::filesystem::path& dir, const EvalReport& report);
/// Reads a report written by write_report; DataError when malformed.
EvalReport read_report(const std::filesystem::path& summary_path);

/// Rebuilds the metrics from records and params alone. DataError for an
/// unknown protocol or malformed records.
std::map<std::string, double> recompute_metrics(const EvalReport& report);

/// Names of metrics whose stored value differs from the recomputed one
/// (bitwise, NaN equal to NaN); empty when the report is consistent.
std::vector<std::string> inconsistent_metrics(const EvalReport& report);

}  // namespace atlab::eval
