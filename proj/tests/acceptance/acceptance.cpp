// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion, with
// indented detail lines, and exits non-zero when any criterion fails.
//
//   acceptance [--work DIR] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "atlab/cli/commands.hpp"
#include "atlab/evalsuite/embedder.hpp"
#include "atlab/evalsuite/metrics.hpp"
#include "atlab/evalsuite/protocols.hpp"
#include "atlab/model/gradcheck.hpp"
#include "atlab/model/model.hpp"
#include "atlab/numcore/op_suite.hpp"

namespace {

namespace fs = std::filesystem;
using atlab::cli::ExperimentConfig;
using atlab::model::HeadType;
using atlab::num::Tensor;
using Clock = std::chrono::steady_clock;
using Graph = atlab::num::Graph<float>;
constexpr auto kInference = Graph::Mode::kInference;

// Pinned tolerances.
constexpr double kGradTol = 1e-3;
constexpr int kGradPoints = 10;
constexpr double kGradSeconds = 60.0;
constexpr double kLn64 = 4.158883;
constexpr double kLn64Tol = 1e-4;
constexpr double kOneHotLossMax = 1e-3;
constexpr double kPermutationTol = 1e-6;
constexpr double kReversalCosine = 0.999;
constexpr int kReversalNeeded = 95;
constexpr double kChance = 50.0;
constexpr double kChanceBand = 5.0;
constexpr double kTransformerBatMin = 65.0;
constexpr double kAcbaGainMin = 5.0;
constexpr double kTrainMinutesMax = 30.0;
constexpr double kTransformerDropMin = 0.10;
constexpr double kMeanpoolDropMax = 0.03;
constexpr double kNvDeltaMax = 0.03;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

std::ofstream progress;

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;
  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "ok   " : "MISS ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double cosine(const Tensor<float>& a, const Tensor<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

Tensor<float> random_sequence(std::size_t len, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<float> v(len * dim);
  for (auto& x : v) x = static_cast<float>(nd(rng));
  return Tensor<float>({len, dim}, std::move(v));
}

// ---------------------------------------------------------------- 1 to 5

Outcome gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  bool all_points = true;
  const auto cases = atlab::num::op_gradient_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto r = atlab::num::check_op_gradient(cases[i].inputs, cases[i].op, kGradPoints, i);
    all_points = all_points && r.accepted == kGradPoints;
    if (r.max_rel_error >= worst) worst = r.max_rel_error, worst_name = cases[i].name;
  }
  o.require(worst < kGradTol && all_points,
            std::to_string(cases.size()) + " ops, " + std::to_string(kGradPoints) +
                " points each: max rel err " + sci(worst) + " (" + worst_name + ")");
  for (HeadType h : {HeadType::kMeanpoolMlp, HeadType::kTransformer}) {
    atlab::model::ModelConfig c;
    c.head_type = h;
    const auto r = atlab::model::full_model_gradcheck(c, kGradPoints, 0);
    o.require(r.max_rel_error < kGradTol && r.accepted == kGradPoints,
              "full model loss, " + std::string(atlab::model::head_type_name(h)) +
                  ", 2-pair batch: max rel err " + sci(r.max_rel_error) + " over " +
                  std::to_string(r.accepted) + " points");
  }
  const double secs = seconds_since(t0);
  o.require(secs < kGradSeconds, "runtime " + fmt(secs, 1) + " s");
  return o;
}

Outcome info_nce_anchors() {
  Outcome o;
  Tensor<float> same({64, 64});
  for (std::size_t i = 0; i < 64; ++i) same[i * 64] = 1.f;
  Graph g(kInference);
  const double equal = atlab::model::info_nce_loss(g, same, same, 0.07).item();
  o.require(std::abs(equal - kLn64) <= kLn64Tol,
            "equal similarities, B=64: loss " + fmt(equal, 6) + " (ln 64 = 4.158883)");
  Tensor<float> eye({64, 64});
  for (std::size_t i = 0; i < 64; ++i) eye[i * 64 + i] = 1.f;
  const double onehot = atlab::model::info_nce_loss(g, eye, eye, 0.01).item();
  o.require(onehot < kOneHotLossMax, "one-hot batch, B=64, temperature 0.01: loss " + sci(onehot));
  return o;
}

Outcome meanpool_order_blind() {
  Outcome o;
  atlab::model::ModelConfig c;
  c.head_type = HeadType::kMeanpoolMlp;
  std::mt19937_64 rng(3);
  double worst = 0.0;
  int permutations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const atlab::model::Model<float> m(c, 500 + trial);
    const std::size_t len = 2 + trial % 7;
    const Tensor<float> seq = random_sequence(len, c.audio.dim, rng);
    Graph g(kInference);
    const Tensor<float> base = m.aggregate_meanpool_mlp(g, atlab::model::Branch::kAudio, seq);
    std::vector<std::size_t> perm(len);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (int p = 0; p < 5; ++p) {
      if (p == 0) {
        std::reverse(perm.begin(), perm.end());
      } else {
        std::shuffle(perm.begin(), perm.end(), rng);
      }
      const Tensor<float> out =
          m.aggregate_meanpool_mlp(g, atlab::model::Branch::kAudio, g.embedding(seq, perm));
      for (std::size_t j = 0; j < out.size(); ++j) {
        worst = std::max(worst, static_cast<double>(std::abs(out[j] - base[j])));
      }
      ++permutations;
    }
  }
  o.require(worst <= kPermutationTol, "100 cases, " + std::to_string(permutations) +
                                          " permutations: max |diff| " + sci(worst));
  return o;
}

Outcome transformer_order_sensitive() {
  Outcome o;
  atlab::model::ModelConfig c;
  c.head_type = HeadType::kTransformer;
  int distinguished = 0;
  double max_cos = -1.0;
  for (int seed = 0; seed < 100; ++seed) {
    const atlab::model::Model<float> m(c, 2000 + seed);
    std::mt19937_64 rng(seed);
    const Tensor<float> seq = random_sequence(6, c.audio.dim, rng);
    const std::size_t rev[] = {5, 4, 3, 2, 1, 0};
    Graph g(kInference);
    const auto a = m.aggregate_transformer(g, atlab::model::Branch::kAudio, seq);
    const auto b = m.aggregate_transformer(g, atlab::model::Branch::kAudio, g.embedding(seq, rev));
    const double cs = cosine(a, b);
    max_cos = std::max(max_cos, cs);
    if (cs < kReversalCosine) ++distinguished;
  }
  o.require(distinguished >= kReversalNeeded,
            std::to_string(distinguished) + "/100 random inits give cosine(seq, reversed) < 0.999");
  o.note("largest cosine " + fmt(max_cos, 6));
  return o;
}

Outcome retrieval_oracle() {
  Outcome o;
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(-30, 30);
  std::size_t mismatches = 0, checks = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t q = 50, n = 200;
    std::vector<double> sims(q * n);
    for (auto& s : sims) s = level(rng) / 30.0;  // coarse levels force ties
    std::vector<std::size_t> truth(q);
    for (auto& t : truth) t = rng() % n;
    const auto ranks = atlab::eval::true_item_ranks(sims, q, n, truth);
    std::vector<std::size_t> oracle(q);
    for (std::size_t i = 0; i < q; ++i) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sims[i * n + a] > sims[i * n + b];
      });
      oracle[i] = static_cast<std::size_t>(std::find(order.begin(), order.end(), truth[i]) -
                                           order.begin());
    }
    for (std::size_t k : {1u, 5u, 10u, 50u, 200u}) {
      std::size_t hits = 0;
      for (std::size_t r : oracle) hits += r < k;
      ++checks;
      if (atlab::eval::recall_at_k(ranks, k) != static_cast<double>(hits) / q) ++mismatches;
    }
  }
  o.require(mismatches == 0, std::to_string(checks) + " R@k values on 20 random 50x200 matrices, " +
                                 std::to_string(mismatches) + " mismatches");
  return o;
}

// ---------------------------------------------------------- desk scale

struct Run {
  std::string name;
  HeadType head;
  std::uint64_t seed;
  bool acba = false;
  bool nv = false;
  double train_minutes = 0.0;
  std::size_t epochs = 0;
  bool early_stopped = false;
  std::map<std::string, std::map<std::string, double>> metrics;
};

class DeskScale {
 public:
  explicit DeskScale(fs::path work) : work_(std::move(work)) {}

  void prepare() {
    if (prepared_) return;
    prepared_ = true;
    progress << "== gen\n";
    atlab::cli::cmd_gen(config_, work_ / "data", true, progress);
    progress << "== augment-acba\n";
    atlab::cli::cmd_augment_acba(work_ / "data" / "train.jsonl", config_.acba.count,
                                 config_.acba.seed, config_.acba.fade_s, work_ / "data_acba", true,
                                 progress);
  }

  const Run& run(HeadType head, std::uint64_t seed, bool acba, bool nv) {
    std::string name = std::string(atlab::model::head_type_name(head)) + "_s" +
                       std::to_string(seed) + (acba ? "_acba" : "") + (nv ? "_nv" : "");
    if (auto it = runs_.find(name); it != runs_.end()) return it->second;
    prepare();
    Run r;
    r.name = name;
    r.head = head;
    r.seed = seed;
    r.acba = acba;
    r.nv = nv;
    ExperimentConfig c = config_;
    c.model.head_type = head;
    c.train_seed = seed;
    const fs::path dir = work_ / "runs" / name;
    atlab::cli::TrainOptions opt;
    opt.nv_filter = nv;
    opt.force = true;
    progress << "== train " << name << '\n';
    const auto t0 = Clock::now();
    const auto result = atlab::cli::cmd_train(
        c, work_ / (acba ? "data_acba" : "data") / "train.jsonl", work_ / "data" / "val.jsonl",
        dir, opt, progress);
    r.train_minutes = seconds_since(t0) / 60.0;
    r.epochs = result.log.size();
    r.early_stopped = result.early_stopped;
    progress << "== eval " << name << '\n';
    const auto reports =
        atlab::cli::cmd_eval(dir / "checkpoint", work_ / "data" / "test.jsonl",
                             work_ / "data" / "probe.jsonl", c.eval, dir / "eval", progress);
    for (const auto& rep : reports) {
      r.metrics[rep.protocol] = rep.metrics;
      report_paths_.push_back(dir / "eval" / (rep.protocol + ".json"));
    }
    progress.flush();
    return runs_.emplace(name, std::move(r)).first->second;
  }

  const std::vector<fs::path>& report_paths() const { return report_paths_; }
  const fs::path& work() const { return work_; }
  const ExperimentConfig& config() const { return config_; }

 private:
  fs::path work_;
  ExperimentConfig config_;  // defaults: 8k/1k/1k, 5k ACBA, 30 epochs
  bool prepared_ = false;
  std::map<std::string, Run> runs_;
  std::vector<fs::path> report_paths_;
};

double bat(const Run& r) { return r.metrics.at("bat").at("bat_percent"); }
double drop(const Run& r) { return r.metrics.at("pte_swap").at("drop"); }
double r10(const Run& r) { return r.metrics.at("retrieval").at("R@10"); }

std::string run_line(const Run& r) {
  return r.name + ": " + std::to_string(r.epochs) + " epochs" +
         (r.early_stopped ? " (early stop)" : "") + ", " + fmt(r.train_minutes, 1) + " min";
}

Outcome bat_directional(DeskScale& d) {
  Outcome o;
  const Run& mp = d.run(HeadType::kMeanpoolMlp, 1, false, false);
  const Run& tf = d.run(HeadType::kTransformer, 1, false, false);
  const Run& mpa = d.run(HeadType::kMeanpoolMlp, 1, true, false);
  const Run& tfa = d.run(HeadType::kTransformer, 1, true, false);
  for (const Run* r : {&mp, &tf, &mpa, &tfa}) {
    o.require(r->train_minutes <= kTrainMinutesMax, run_line(*r));
  }
  o.require(std::abs(bat(mp) - kChance) <= kChanceBand,
            "meanpool BAT " + fmt(bat(mp), 1) + "% (within 50 +/- 5)");
  o.require(bat(tf) >= kTransformerBatMin, "transformer BAT " + fmt(bat(tf), 1) + "% (>= 65)");
  o.require(bat(tfa) - bat(tf) >= kAcbaGainMin, "transformer +ACBA BAT " + fmt(bat(tfa), 1) +
                                                    "%, gain " + fmt(bat(tfa) - bat(tf), 1) +
                                                    " points (>= 5)");
  o.require(std::abs(bat(mpa) - kChance) <= kChanceBand,
            "meanpool +ACBA BAT " + fmt(bat(mpa), 1) + "% (within 50 +/- 5)");
  return o;
}

Outcome pte_directional(DeskScale& d) {
  Outcome o;
  for (HeadType h : {HeadType::kTransformer, HeadType::kMeanpoolMlp}) {
    double sum = 0.0;
    std::string per_seed;
    for (std::uint64_t s : kSeeds) {
      const Run& r = d.run(h, s, false, false);
      sum += drop(r);
      per_seed += " s" + std::to_string(s) + " " +
                  fmt(r.metrics.at("pte_swap").at("original_R@1"), 3) + "->" +
                  fmt(r.metrics.at("pte_swap").at("swapped_R@1"), 3);
    }
    const double mean = sum / std::size(kSeeds);
    const std::string head(atlab::model::head_type_name(h));
    if (h == HeadType::kTransformer) {
      o.require(mean >= kTransformerDropMin,
                head + " mean R@1 drop " + fmt(100 * mean, 1) + " points (>= 10)");
    } else {
      o.require(std::abs(mean) <= kMeanpoolDropMax,
                head + " mean R@1 drop " + fmt(100 * mean, 1) + " points (|drop| <= 3)");
    }
    o.note(head + " R@1 original->swapped:" + per_seed);
  }
  return o;
}

Outcome nv_directional(DeskScale& d) {
  Outcome o;
  double full = 0.0, nv = 0.0;
  std::string per_seed;
  for (std::uint64_t s : kSeeds) {
    const Run& a = d.run(HeadType::kMeanpoolMlp, s, false, false);
    const Run& b = d.run(HeadType::kMeanpoolMlp, s, false, true);
    full += r10(a);
    nv += r10(b);
    per_seed += " s" + std::to_string(s) + " " + fmt(r10(a), 3) + "/" + fmt(r10(b), 3);
  }
  full /= std::size(kSeeds);
  nv /= std::size(kSeeds);
  o.require(std::abs(nv - full) <= kNvDeltaMax, "meanpool test R@10 full " + fmt(full, 3) +
                                                    ", nv-filtered " + fmt(nv, 3) + ", delta " +
                                                    fmt(100 * (nv - full), 1) + " points (<= 3)");
  o.note("full/nv per seed:" + per_seed);
  return o;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

Outcome determinism(const fs::path& work) {
  Outcome o;
  // Reduced sizes; the pipeline and code paths are those of a full repro.
  ExperimentConfig c;
  c.generation.train_size = 600;
  c.generation.val_size = 100;
  c.generation.test_size = 100;
  c.generation.probe_size = 100;
  c.acba.count = 200;
  c.model.train.max_epochs = 3;
  std::ostringstream log_a, log_b;
  atlab::cli::cmd_repro(c, work / "repro_a", true, log_a);
  atlab::cli::cmd_repro(c, work / "repro_b", true, log_b);
  const auto a = tree(work / "repro_a"), b = tree(work / "repro_b");
  std::size_t differing = 0, manifests = 0, logs = 0, checkpoints = 0;
  for (const auto& [path, bytes] : a) {
    auto it = b.find(path);
    if (it == b.end() || it->second != bytes) ++differing;
    if (path.ends_with(".jsonl") && path.find("eval") == std::string::npos) {
      path.ends_with("log.jsonl") ? ++logs : ++manifests;
    }
    if (path.find("checkpoint") != std::string::npos) ++checkpoints;
  }
  o.require(a.size() == b.size() && differing == 0,
            std::to_string(a.size()) + " files compared, " + std::to_string(differing) +
                " differ (" + std::to_string(manifests) + " manifests, " + std::to_string(logs) +
                " training logs, " + std::to_string(checkpoints) + " checkpoint files)");
  o.require(log_a.str() == log_b.str(), "console logs identical");
  return o;
}

Outcome self_consistency(DeskScale& d) {
  Outcome o;
  std::vector<fs::path> paths = d.report_paths();
  for (const auto& e : fs::recursive_directory_iterator(d.work())) {
    const auto p = e.path().string();
    if (e.path().extension() == ".json" && p.find("repro_") != std::string::npos &&
        e.path().parent_path().filename() == "eval") {
      paths.push_back(e.path());
    }
  }
  std::size_t bad = 0;
  for (const auto& p : paths) {
    const auto r = atlab::eval::read_report(p);
    const auto wrong = atlab::eval::inconsistent_metrics(r);
    if (!wrong.empty()) {
      ++bad;
      o.note("inconsistent: " + p.string() + " " + wrong.front());
    }
  }
  o.require(!paths.empty() && bad == 0, std::to_string(paths.size()) +
                                            " reports recomputed from records, " +
                                            std::to_string(bad) + " inconsistent");
  d.prepare();
  const auto test = atlab::cli::read_manifest(d.work() / "data" / "test.jsonl");
  const auto r = atlab::eval::then_as_protocol(atlab::eval::OrderOracleEmbedder{},
                                               atlab::cli::to_items(test.samples));
  for (const std::string dir : {"as", "then"}) {
    const double orig = r.metrics.at(dir + "/original_R@10");
    const double sub = r.metrics.at(dir + "/substituted_R@10");
    o.require(sub < orig, "order oracle, " + dir + ": substituted R@10 " + fmt(sub, 3) +
                              " < original " + fmt(orig, 3));
  }
  o.require(atlab::eval::inconsistent_metrics(r).empty(), "oracle then/as report recomputes");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atlab acceptance run"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory (recreated)");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  fs::create_directories(work);
  progress.open(fs::path(work) / "progress.log");
  DeskScale desk{fs::path(work)};

  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", gradients},
      {2, "InfoNCE anchors", info_nce_anchors},
      {3, "meanpool head is order-blind", meanpool_order_blind},
      {4, "transformer head is order-sensitive", transformer_order_sensitive},
      {5, "retrieval matches full-sort oracle", retrieval_oracle},
      {6, "before/after test, both heads, +ACBA", [&] { return bat_directional(desk); }},
      {7, "clause-swap R@1 drop over 3 seeds", [&] { return pte_directional(desk); }},
      {8, "noun/verb filtering keeps R@10", [&] { return nv_directional(desk); }},
      {9, "repro is byte-identical", [&] { return determinism(fs::path(work)); }},
      {10, "reports recompute; order oracle then/as", [&] { return self_consistency(desk); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.require(false, std::string("error: ") + e.what());
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << c.id << "  " << c.title
              << "  [" << fmt(seconds_since(t0), 1) << " s]\n";
    for (const auto& line : o.details) std::cout << "          " << line << '\n';
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
