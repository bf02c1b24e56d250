// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/cli/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "atlab/errors.hpp"
#include "atlab/evalsuite/protocols.hpp"
#include "atlab/model/gradcheck.hpp"
#include "atlab/numcore/op_suite.hpp"

namespace atlab::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kLockName = ".atlab.lock";

const std::vector<std::string>& artifact_names() {
  static const std::vector<std::string> names = {
      "train.jsonl", "val.jsonl",   "test.jsonl", "probe.jsonl", "audio",   "config.toml",
      "dataset.json", "log.jsonl",  "checkpoint", "run.json",    "eval",    "runs",
      "data",         "data_acba",  "summary.json"};
  return names;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

json epoch_json(const model::EpochRecord& e) {
  return {{"epoch", e.epoch},
          {"lr", e.lr},
          {"train_loss", e.train_loss},
          {"val_loss", e.val_loss},
          {"val_recall", e.val_recall},
          {"improved", e.improved},
          {"duplicate_batches", e.duplicate_batches}};
}

std::vector<Sample> nv_filtered(const std::vector<Sample>& samples, std::size_t& changed) {
  std::vector<Sample> out = samples;
  changed = 0;
  for (auto& s : out) {
    text::Caption c = text::nv_filter(s.caption);
    if (c.tokens != s.caption.tokens) ++changed;
    s.caption = std::move(c);
    s.provenance = Provenance::kNvFiltered;
  }
  return out;
}

}  // namespace

RunLock::RunLock(const fs::path& dir) : path_(dir / kLockName) {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw DataError("run directory " + dir.string() + " is locked by another process (" +
                    path_.string() + ": " + std::strerror(errno) + ")");
  }
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (!fs::exists(dir)) {
    fs::create_directories(dir);
    return;
  }
  if (!fs::is_directory(dir)) throw ArgumentError(dir.string() + " exists and is not a directory");
  bool empty = true;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() != kLockName) empty = false;
  }
  if (empty) return;
  if (!force) {
    throw ArgumentError("refusing to write into non-empty " + dir.string() + " (use --force)");
  }
  for (const auto& name : artifact_names()) fs::remove_all(dir / name);
}

json cmd_gen(const ExperimentConfig& config, const fs::path& out_dir, bool force,
             std::ostream& log) {
  validate_config(config);
  prepare_output_dir(out_dir, force);
  RunLock lock(out_dir);
  const std::string config_toml = experiment_config_toml(config);
  const std::string dataset_id = digest(to_json(config).at("generation").dump());
  const scene::PrototypeTable prototypes = prototypes_for(config.generation);
  json summary = {{"tool_version", kToolVersion}, {"dataset_id", dataset_id}};
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest, Split::kProbe}) {
    const std::string name(split_name(s));
    Manifest m;
    m.header = make_header(dataset_id, name);
    m.header.extra = {{"generation_seed", config.generation.seed}};
    m.samples = generate_split(config.generation, s, prototypes);
    write_manifest(out_dir / (name + ".jsonl"), m);
    const json hist = preposition_histogram(m.samples);
    summary["splits"][name] = hist;
    log << name << ": " << m.samples.size() << " pairs, " << hist.at("pte").get<std::size_t>()
        << " with a temporal preposition\n";
    if (s == Split::kProbe) continue;
    log << "  preposition   count   share\n";
    for (const auto& [p, v] : hist.at("prepositions").items()) {
      log << "  " << std::left << std::setw(12) << p << std::right << std::setw(7)
          << v.at("count").get<std::size_t>() << "   " << fixed(100 * v.at("share").get<double>(), 1)
          << "%\n";
    }
  }
  write_text(out_dir / "config.toml", config_toml);
  write_text(out_dir / "dataset.json", summary.dump(2) + "\n");
  return summary;
}

void cmd_augment_acba(const fs::path& train_manifest, std::size_t count, std::uint64_t seed,
                      double fade_s, const fs::path& out_dir, bool force, std::ostream& log) {
  Manifest m = read_manifest(train_manifest);
  if (fs::exists(out_dir) && fs::exists(train_manifest) &&
      fs::equivalent(out_dir, train_manifest.parent_path().empty() ? "." : train_manifest.parent_path())) {
    throw ArgumentError("augment-acba: write the augmented manifest to a different directory");
  }
  prepare_output_dir(out_dir, force);
  RunLock lock(out_dir);
  std::vector<Sample> acba = synthesize_acba_samples(m.samples, count, seed, fade_s);
  const std::size_t original = m.samples.size();
  for (auto& s : acba) m.samples.push_back(std::move(s));
  const std::string base = m.header.dataset_id;
  m.header.dataset_id =
      digest(base + "/acba/" + std::to_string(count) + "/" + std::to_string(seed) + "/" +
             json(fade_s).dump());
  m.header.extra["acba"] = {
      {"count", count}, {"seed", seed}, {"fade_s", fade_s}, {"base_dataset_id", base}};
  write_manifest(out_dir / "train.jsonl", m);
  log << "augment-acba: " << original << " original rows + " << count << " acba rows\n";
}

model::TrainResult cmd_train(const ExperimentConfig& config, const fs::path& train_manifest,
                             const fs::path& val_manifest, const fs::path& out_dir,
                             const TrainOptions& options, std::ostream& log) {
  validate_config(config);
  const Manifest train_m = read_manifest(train_manifest);
  const Manifest val_m = read_manifest(val_manifest);
  for (const auto* h : {&train_m.header, &val_m.header}) {
    if (h->vocab_version != text::vocabulary().version() ||
        h->grammar_version != text::kGrammarVersion) {
      throw DataError("manifest was written with vocabulary " + h->vocab_version + " / " +
                      h->grammar_version + "; this build uses " + text::vocabulary().version() +
                      " / " + std::string(text::kGrammarVersion));
    }
  }
  prepare_output_dir(out_dir, options.force);
  RunLock lock(out_dir);
  std::size_t filtered = 0;
  const std::vector<Sample> train_samples =
      options.nv_filter ? nv_filtered(train_m.samples, filtered) : train_m.samples;
  const model::PairSet train_set = to_pairs(train_samples);
  const model::PairSet val_set = to_pairs(val_m.samples);
  write_text(out_dir / "config.toml", experiment_config_toml(config));

  std::ofstream epochs(out_dir / "log.jsonl", std::ios::binary);
  const model::TrainResult r =
      model::train(config.model, train_set, val_set, config.train_seed,
                   [&](const model::EpochRecord& e) {
                     epochs << epoch_json(e).dump() << '\n';
                     epochs.flush();
                     log << "epoch " << e.epoch << "  lr " << e.lr << "  loss "
                         << fixed(e.train_loss) << "  val " << fixed(e.val_loss) << "  R@"
                         << config.model.train.recall_k << " " << fixed(e.val_recall)
                         << (e.improved ? "  *" : "") << '\n';
                   });
  epochs.close();

  model::CheckpointInfo info;
  info.tool_version = std::string(kToolVersion);
  info.grammar_version = std::string(text::kGrammarVersion);
  info.vocab_version = text::vocabulary().version();
  info.vocab_size = text::vocabulary().size();
  info.extra = {{"train_seed", config.train_seed},
                {"best_epoch", r.best_epoch},
                {"train_dataset_id", train_m.header.dataset_id}};
  model::save_checkpoint(out_dir / "checkpoint", config.model, r.best_params, info);

  const json run = {{"tool_version", kToolVersion},
                    {"head", model::head_type_name(config.model.head_type)},
                    {"train_seed", config.train_seed},
                    {"train_manifest", train_manifest.filename().string()},
                    {"train_dataset_id", train_m.header.dataset_id},
                    {"train_rows", train_samples.size()},
                    {"val_manifest", val_manifest.filename().string()},
                    {"val_dataset_id", val_m.header.dataset_id},
                    {"val_rows", val_set.size()},
                    {"nv_filter", options.nv_filter},
                    {"train_captions_filtered", filtered},
                    {"val_captions_filtered", 0},
                    {"epochs", r.log.size()},
                    {"best_epoch", r.best_epoch},
                    {"best_val_recall", r.best_recall},
                    {"early_stopped", r.early_stopped},
                    {"aborted", r.aborted},
                    {"abort_reason", r.abort_reason},
                    {"warnings", r.warnings}};
  write_text(out_dir / "run.json", run.dump(2) + "\n");
  for (const auto& w : r.warnings) log << "warning: " << w << '\n';
  if (r.aborted) throw NumericError("training aborted: " + r.abort_reason);
  log << "best epoch " << r.best_epoch << "  R@" << config.model.train.recall_k << " "
      << fixed(r.best_recall) << (r.early_stopped ? "  (early stop)" : "") << '\n';
  return r;
}

void check_compatible(const model::CheckpointInfo& ck, const ManifestHeader& m) {
  if (ck.vocab_version != m.vocab_version || ck.grammar_version != m.grammar_version) {
    throw DataError("checkpoint vocabulary " + ck.vocab_version + " / " + ck.grammar_version +
                    " does not match manifest vocabulary " + m.vocab_version + " / " +
                    m.grammar_version);
  }
}

std::vector<eval::EvalReport> cmd_eval(const fs::path& checkpoint_dir, const fs::path& manifest,
                                       const std::optional<fs::path>& bat_manifest,
                                       const EvalConfig& config, const fs::path& out_dir,
                                       std::ostream& log) {
  const model::LoadedCheckpoint ck = model::load_checkpoint(checkpoint_dir);
  const Manifest m = read_manifest(manifest);
  check_compatible(ck.info, m.header);
  std::optional<Manifest> bat_m;
  if (bat_manifest) {
    bat_m = read_manifest(*bat_manifest);
    check_compatible(ck.info, bat_m->header);
  }
  const model::Model<float> net = ck.model();
  const eval::ModelEmbedder embedder(net);
  const std::string checkpoint_id = digest(read_text(checkpoint_dir / "manifest.json"));
  const std::vector<eval::EvalItem> items = to_items(m.samples);
  const auto labels = eval::label_prompts();

  fs::create_directories(out_dir);
  std::vector<eval::EvalReport> reports;
  for (const std::string& p : config.protocols) {
    eval::EvalReport r;
    std::string dataset_id = m.header.dataset_id;
    if (p == "retrieval") {
      r = eval::retrieval_protocol(embedder, items, config.ks);
    } else if (p == "then_as") {
      r = eval::then_as_protocol(embedder, items);
    } else if (p == "pte_swap") {
      std::vector<text::Caption> caps;
      for (const auto& it : items) caps.push_back(it.caption);
      std::vector<eval::EvalItem> pte;
      for (std::size_t i : text::build_pte(caps).indices) pte.push_back(items[i]);
      if (pte.empty()) throw DataError("pte_swap: the manifest has no two-clause temporal captions");
      r = eval::pte_swap_protocol(embedder, pte);
    } else if (p == "bat") {
      const std::vector<eval::EvalItem> source = bat_m ? to_items(bat_m->samples) : items;
      if (bat_m) dataset_id = bat_m->header.dataset_id;
      std::vector<text::Caption> caps;
      for (const auto& it : source) caps.push_back(it.caption);
      const auto bat = text::build_bat(caps, text::build_pte(caps).indices, config.bat_size,
                                       config.seed);
      std::vector<eval::EvalItem> chosen;
      for (std::size_t i : bat.indices) chosen.push_back(source[i]);
      if (chosen.empty()) throw DataError("bat: no before/after captions available");
      r = eval::bat_protocol(embedder, chosen);
      if (!bat.warning.empty()) r.warnings.push_back(bat.warning);
      r.params["requested"] = bat.requested;
    } else if (p == "zero_shot") {
      std::vector<eval::EvalItem> singles;
      std::vector<std::size_t> truth;
      for (const auto& it : items) {
        if (it.scene.relation == scene::Relation::kSingle) {
          singles.push_back(it);
          truth.push_back(it.scene.events[0].label);
        }
      }
      r = eval::zero_shot_protocol(embedder, singles, truth, labels);
    } else if (p == "sed") {
      eval::SedOptions o;
      o.hop_s = config.sed_hop_s;
      o.window_s = config.sed_window_s;
      r = eval::sed_split_protocol(embedder, items, labels, config.seed, o);
    } else {
      throw ConfigError("unknown protocol '" + p + "'");
    }
    r.dataset_id = dataset_id;
    r.checkpoint_id = checkpoint_id;
    r.seed = config.seed;
    eval::write_report(out_dir, r);
    log << p << ":";
    for (const auto& [k, v] : r.metrics) log << "  " << k << " " << fixed(v);
    log << '\n';
    for (const auto& w : r.warnings) log << "  warning: " << w << '\n';
    reports.push_back(std::move(r));
  }
  return reports;
}

bool cmd_gradcheck(const model::ModelConfig& config, int points, std::uint64_t seed,
                   std::ostream& log) {
  constexpr double kTol = 1e-3;
  bool ok = true;
  const auto cases = num::op_gradient_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto r = num::check_op_gradient(cases[i].inputs, cases[i].op, points, seed + i);
    const bool pass = r.accepted == points && r.max_rel_error < kTol;
    ok = ok && pass;
    log << std::left << std::setw(28) << cases[i].name << std::right << " max rel err "
        << std::scientific << std::setprecision(2) << r.max_rel_error << std::defaultfloat
        << "  points " << r.accepted << (pass ? "  ok" : "  FAIL") << '\n';
  }
  for (model::HeadType h : {model::HeadType::kMeanpoolMlp, model::HeadType::kTransformer}) {
    model::ModelConfig c = config;
    c.head_type = h;
    const auto r = model::full_model_gradcheck(c, points, seed);
    const bool pass = r.accepted == points && r.max_rel_error < kTol;
    ok = ok && pass;
    log << "model/" << std::left << std::setw(22) << model::head_type_name(h) << std::right
        << " max rel err " << std::scientific << std::setprecision(2) << r.max_rel_error
        << std::defaultfloat << "  points " << r.accepted << "  worst " << r.worst_param
        << (pass ? "  ok" : "  FAIL") << '\n';
  }
  return ok;
}

json cmd_repro(const ExperimentConfig& config, const fs::path& out_dir, bool force,
               std::ostream& log) {
  validate_config(config);
  prepare_output_dir(out_dir, force);
  json summary = {{"tool_version", kToolVersion}, {"runs", json::object()}};
  {
    RunLock lock(out_dir);
    write_text(out_dir / "config.toml", experiment_config_toml(config));
  }
  log << "== gen\n";
  cmd_gen(config, out_dir / "data", force, log);
  log << "== augment-acba\n";
  cmd_augment_acba(out_dir / "data" / "train.jsonl", config.acba.count, config.acba.seed,
                   config.acba.fade_s, out_dir / "data_acba", force, log);
  for (model::HeadType h : {model::HeadType::kMeanpoolMlp, model::HeadType::kTransformer}) {
    for (const bool acba : {false, true}) {
      const std::string name =
          std::string(model::head_type_name(h)) + (acba ? "_acba" : "_original");
      log << "== train " << name << '\n';
      ExperimentConfig c = config;
      c.model.head_type = h;
      const fs::path run = out_dir / "runs" / name;
      const fs::path train_m = out_dir / (acba ? "data_acba" : "data") / "train.jsonl";
      TrainOptions opt;
      opt.force = force;
      const auto result = cmd_train(c, train_m, out_dir / "data" / "val.jsonl", run, opt, log);
      log << "== eval " << name << '\n';
      const auto reports = cmd_eval(run / "checkpoint", out_dir / "data" / "test.jsonl",
                                    out_dir / "data" / "probe.jsonl", c.eval, run / "eval", log);
      json metrics = json::object();
      for (const auto& r : reports) metrics[r.protocol] = r.metrics;
      summary["runs"][name] = {{"best_epoch", result.best_epoch},
                               {"best_val_recall", result.best_recall},
                               {"metrics", metrics}};
    }
  }
  RunLock lock(out_dir);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  log << "== summary\n";
  log << "run                      BAT %    PTe R@1 orig   swapped\n";
  for (const auto& [name, run] : summary["runs"].items()) {
    const json& m = run.at("metrics");
    log << std::left << std::setw(24) << name << std::right;
    log << std::setw(7) << (m.contains("bat") ? fixed(m["bat"]["bat_percent"].get<double>(), 1) : "-");
    if (m.contains("pte_swap")) {
      log << "   " << std::setw(12) << fixed(m["pte_swap"]["original_R@1"].get<double>(), 3)
          << "   " << fixed(m["pte_swap"]["swapped_R@1"].get<double>(), 3);
    }
    log << '\n';
  }
  return summary;
}

}  // namespace atlab::cli
