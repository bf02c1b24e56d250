// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/evalsuite/report.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "atlab/errors.hpp"
#include "atlab/evalsuite/metrics.hpp"

namespace atlab::eval {
namespace {

using nlohmann::json;

std::string recall_name(const std::string& prefix, std::size_t k) {
  return prefix + "R@" + std::to_string(k);
}

double hit_rate(std::size_t hits, std::size_t n) {
  return static_cast<double>(hits) / static_cast<double>(n);
}

// Recall at k over the records selected by keep; the same arithmetic as
// recall_at_k.
template <class Keep>
double records_recall(const std::vector<json>& records, std::size_t k, Keep keep) {
  std::size_t hits = 0, n = 0;
  for (const auto& r : records) {
    if (!keep(r)) continue;
    ++n;
    hits += r.at("rank").get<std::size_t>() < k ? 1 : 0;
  }
  if (n == 0) throw DataError("recompute: no records for a recall metric");
  return hit_rate(hits, n);
}

std::map<std::string, double> recompute_retrieval(const EvalReport& r) {
  std::map<std::string, double> m;
  for (std::size_t k : r.params.at("ks").get<std::vector<std::size_t>>()) {
    m[recall_name("", k)] = records_recall(r.records, k, [](const json&) { return true; });
  }
  return m;
}

std::map<std::string, double> recompute_then_as(const EvalReport& r) {
  std::map<std::string, double> m;
  const auto k = r.params.at("k").get<std::size_t>();
  for (const std::string dir : {"as", "then"}) {
    for (const std::string variant : {"original", "substituted"}) {
      m[recall_name(dir + "/" + variant + "_", k)] =
          records_recall(r.records, k, [&](const json& x) {
            return x.at("direction") == dir && x.at("variant") == variant;
          });
    }
  }
  return m;
}

std::map<std::string, double> recompute_pte(const EvalReport& r) {
  std::map<std::string, double> m;
  for (const std::string variant : {"original", "swapped"}) {
    m[variant + "_R@1"] =
        records_recall(r.records, 1, [&](const json& x) { return x.at("variant") == variant; });
  }
  m["drop"] = m["original_R@1"] - m["swapped_R@1"];
  return m;
}

std::map<std::string, double> recompute_bat(const EvalReport& r) {
  if (r.records.empty()) throw DataError("recompute: bat report without records");
  double sum = 0.0;
  for (const auto& x : r.records) sum += x.at("score").get<double>();
  return {{"bat_percent", 100.0 * sum / static_cast<double>(r.records.size())}};
}

std::map<std::string, double> recompute_zero_shot(const EvalReport& r) {
  std::vector<std::size_t> pred, truth;
  for (const auto& x : r.records) {
    pred.push_back(x.at("predicted").get<std::size_t>());
    truth.push_back(x.at("truth").get<std::size_t>());
  }
  const auto n = r.params.at("num_labels").get<std::size_t>();
  return {{"macro_f1", macro_f1(pred, truth, n).macro_f1}};
}

std::map<std::string, double> recompute_sed(const EvalReport& r) {
  SegmentCounts c;
  for (const auto& x : r.records) {
    const bool t = x.at("truth").get<bool>(), p = x.at("predicted").get<bool>();
    c.tp += t && p;
    c.fp += !t && p;
    c.fn += t && !p;
  }
  return {{"f1", c.f1()},
          {"precision", c.precision()},
          {"recall", c.recall()},
          {"threshold", r.params.at("threshold").get<double>()}};
}

}  // namespace

json summary_json(const EvalReport& r) {
  return {{"protocol", r.protocol},     {"metrics", r.metrics},
          {"params", r.params},         {"warnings", r.warnings},
          {"dataset_id", r.dataset_id}, {"checkpoint_id", r.checkpoint_id},
          {"seed", r.seed},             {"records", r.records.size()}};
}

void write_report(const std::filesystem::path& dir, const EvalReport& r) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / (r.protocol + ".json"));
    f << summary_json(r).dump(2) << '\n';
    if (!f) throw DataError("cannot write report to " + dir.string());
  }
  std::ofstream f(dir / (r.protocol + ".jsonl"));
  for (const auto& rec : r.records) f << rec.dump() << '\n';
  if (!f) throw DataError("cannot write records to " + dir.string());
}

EvalReport read_report(const std::filesystem::path& summary_path) {
  try {
    std::ifstream f(summary_path);
    if (!f) throw DataError("cannot open " + summary_path.string());
    const json j = json::parse(f);
    EvalReport r;
    r.protocol = j.at("protocol").get<std::string>();
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.params = j.at("params");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    std::filesystem::path records = summary_path;
    records.replace_extension(".jsonl");
    std::ifstream rf(records);
    if (!rf) throw DataError("cannot open " + records.string());
    std::string line;
    while (std::getline(rf, line)) {
      if (!line.empty()) r.records.push_back(json::parse(line));
    }
    if (r.records.size() != j.at("records").get<std::size_t>()) {
      throw DataError(records.string() + ": record count does not match the summary");
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(summary_path.string() + ": " + e.what());
  }
}

std::map<std::string, double> recompute_metrics(const EvalReport& r) {
  try {
    if (r.protocol == "retrieval") return recompute_retrieval(r);
    if (r.protocol == "then_as") return recompute_then_as(r);
    if (r.protocol == "pte_swap") return recompute_pte(r);
    if (r.protocol == "bat") return recompute_bat(r);
    if (r.protocol == "zero_shot") return recompute_zero_shot(r);
    if (r.protocol == "sed") return recompute_sed(r);
  } catch (const json::exception& e) {
    throw DataError("recompute " + r.protocol + ": " + e.what());
  }
  throw DataError("recompute: unknown protocol '" + r.protocol + "'");
}

std::vector<std::string> inconsistent_metrics(const EvalReport& r) {
  const auto again = recompute_metrics(r);
  std::vector<std::string> bad;
  for (const auto& [name, v] : r.metrics) {
    auto it = again.find(name);
    const bool same = it != again.end() &&
                      (std::bit_cast<std::uint64_t>(v) == std::bit_cast<std::uint64_t>(it->second) ||
                       (std::isnan(v) && std::isnan(it->second)));
    if (!same) bad.push_back(name);
  }
  for (const auto& [name, v] : again) {
    if (!r.metrics.contains(name)) bad.push_back(name);
  }
  return bad;
}

}  // namespace atlab::eval
