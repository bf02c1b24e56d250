// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "atlab/errors.hpp"
#include "atlab/evalsuite/embedder.hpp"
#include "atlab/evalsuite/metrics.hpp"
#include "atlab/evalsuite/protocols.hpp"
#include "atlab/evalsuite/report.hpp"
#include "atlab/model/model.hpp"

namespace atlab::eval {
namespace {

using text::Preposition;

std::vector<EvalItem> make_items(std::size_t n, std::uint64_t seed, scene::RelationMix mix,
                                 const text::CaptionConfig& cc = {}, double noise = 0.05) {
  scene::SceneConfig sc;
  sc.mix = mix;
  static const scene::PrototypeTable table(scene::kNumEventTypes, 32, 7);
  scene::RenderConfig rc;
  rc.noise_sigma = noise;
  std::vector<EvalItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    EvalItem it;
    it.id = "item-" + std::to_string(i);
    it.scene = scene::sample_scene(scene::derive_seed(seed, i), sc);
    it.caption = text::realize_caption(it.scene, scene::derive_seed(seed + 1, i), cc);
    it.clip = scene::render_scene(it.scene, table, rc);
    out.push_back(std::move(it));
  }
  return out;
}

text::CaptionConfig only(Preposition p) {
  text::CaptionConfig c;
  c.p_before = p == Preposition::kBefore;
  c.p_after = p == Preposition::kAfter;
  c.p_then = p == Preposition::kThen;
  c.p_followed_by = p == Preposition::kFollowedBy;
  c.p_as = p == Preposition::kAs;
  return c;
}

// Every caption and clip maps to the same unit vector.
class ConstantEmbedder final : public Embedder {
 public:
  num::Tensor<float> embed_texts(std::span<const text::Caption> c) const override {
    return ones(c.size());
  }
  num::Tensor<float> embed_audio(std::span<const AudioRef> a) const override {
    return ones(a.size());
  }

 private:
  static num::Tensor<float> ones(std::size_t n) {
    return num::Tensor<float>({n, 4}, std::vector<float>(n * 4, 0.5f));
  }
};

void expect_consistent(const EvalReport& r) {
  EXPECT_TRUE(inconsistent_metrics(r).empty()) << r.protocol;
}

// ------------------------------------------------------------- retrieval

std::size_t brute_force_rank(const std::vector<double>& sims, std::size_t q, std::size_t n,
                             std::size_t truth) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = sims[q * n + a], sb = sims[q * n + b];
    return sa != sb ? sa > sb : a < b;
  });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin());
}

TEST(Retrieval, MatchesFullSortOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t q = 50, n = 200;
    // Coarse values force plenty of ties.
    std::uniform_int_distribution<int> level(-20, 20);
    std::vector<double> sims(q * n);
    for (auto& s : sims) s = level(rng) / 20.0;
    std::vector<std::size_t> truth(q);
    for (auto& t : truth) t = rng() % n;
    const auto ranks = true_item_ranks(sims, q, n, truth);
    for (std::size_t k : {1u, 5u, 10u, 50u}) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < q; ++i) {
        ASSERT_EQ(ranks[i], brute_force_rank(sims, i, n, truth[i]));
        hits += brute_force_rank(sims, i, n, truth[i]) < k;
      }
      EXPECT_EQ(recall_at_k(ranks, k), static_cast<double>(hits) / q);
    }
  }
}

TEST(Retrieval, MonotoneInKAndFullAtCorpusSize) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  const std::size_t q = 30, n = 40;
  std::vector<double> sims(q * n);
  for (auto& s : sims) s = nd(rng);
  std::vector<std::size_t> truth(q);
  for (auto& t : truth) t = rng() % n;
  const auto ranks = true_item_ranks(sims, q, n, truth);
  double prev = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double r = recall_at_k(ranks, k);
    EXPECT_GE(r, prev);
    prev = r;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(Retrieval, HandBuiltRanks) {
  // Query 0's true item is third; query 1's ties with item 0 and loses on index.
  const std::vector<double> sims = {0.9, 0.8, 0.7, 0.5, 0.5, 0.1};
  const std::vector<std::size_t> truth = {2, 1};
  const auto ranks = true_item_ranks(sims, 2, 3, truth);
  EXPECT_EQ(ranks, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(recall_at_k(ranks, 2), 0.5);
  EXPECT_THROW(recall_at_k(ranks, 0), ArgumentError);
  const std::vector<std::string> corpus = {"a", "b"}, ids = {"c"};
  EXPECT_THROW(resolve_truth(ids, corpus), DataError);
}

TEST(Retrieval, SingleItemCorpusIsPerfect) {
  const auto items = make_items(1, 13, {1.0, 0.0, 0.0});
  const auto r = retrieval_protocol(ConstantEmbedder{}, items, {1, 10});
  EXPECT_EQ(r.metrics.at("R@1"), 1.0);
  EXPECT_EQ(r.metrics.at("R@10"), 1.0);
  expect_consistent(r);
}

TEST(Retrieval, OracleRetrievesExactMatchesFirst) {
  const auto items = make_items(60, 14, {0.4, 0.4, 0.2}, text::CaptionConfig::uniform_temporal());
  const auto r = retrieval_protocol(OrderOracleEmbedder{}, items);
  // Duplicated scenes can outrank the true clip only through the index rule.
  EXPECT_GT(r.metrics.at("R@10"), 0.9);
  expect_consistent(r);
}

// -------------------------------------------------------------- then / as

std::vector<EvalItem> then_as_items(std::size_t n, std::uint64_t seed) {
  text::CaptionConfig cc = only(Preposition::kThen);
  cc.p_as = 1.0;
  return make_items(n, seed, {0.0, 0.5, 0.5}, cc);
}

TEST(ThenAs, OracleLosesRecallUnderSubstitution) {
  const auto items = then_as_items(80, 15);
  const auto r = then_as_protocol(OrderOracleEmbedder{}, items);
  EXPECT_LT(r.metrics.at("as/substituted_R@10"), r.metrics.at("as/original_R@10"));
  EXPECT_LT(r.metrics.at("then/substituted_R@10"), r.metrics.at("then/original_R@10"));
  expect_consistent(r);
}

TEST(ThenAs, CorpusOfOneIsPerfectBothWays) {
  auto items = then_as_items(40, 16);
  std::vector<EvalItem> two;
  for (Preposition p : {Preposition::kAs, Preposition::kThen}) {
    two.push_back(*std::find_if(items.begin(), items.end(),
                                [&](const EvalItem& it) { return it.caption.preposition == p; }));
  }
  const auto r = then_as_protocol(OrderOracleEmbedder{}, two);
  for (const auto& [name, v] : r.metrics) EXPECT_EQ(v, 1.0) << name;
}

TEST(ThenAs, MissingPrepositionIsDataError) {
  const auto items = make_items(10, 17, {0.0, 1.0, 0.0}, only(Preposition::kThen));
  EXPECT_THROW(then_as_protocol(OrderOracleEmbedder{}, items), DataError);
}

// ------------------------------------------------------------------ PTe

TEST(PteSwap, OrderBlindModelHasZeroDrop) {
  const auto items = make_items(80, 18, {0.0, 1.0, 0.0}, text::CaptionConfig::uniform_temporal());
  const auto r = pte_swap_protocol(BagOfLabelsEmbedder{}, items);
  EXPECT_EQ(r.metrics.at("drop"), 0.0);
  EXPECT_EQ(r.metrics.at("original_R@1"), r.metrics.at("swapped_R@1"));
  expect_consistent(r);
}

TEST(PteSwap, OracleDropsAndSkipsUnswappableItems) {
  auto items = make_items(60, 19, {0.0, 1.0, 0.0}, text::CaptionConfig::uniform_temporal());
  auto singles = make_items(3, 20, {1.0, 0.0, 0.0});
  items.insert(items.end(), singles.begin(), singles.end());
  const auto r = pte_swap_protocol(OrderOracleEmbedder{}, items);
  EXPECT_EQ(r.params.at("skipped").get<std::size_t>(), 3u);
  EXPECT_EQ(r.warnings.size(), 3u);
  EXPECT_GT(r.metrics.at("drop"), 0.5);
  expect_consistent(r);
}

TEST(PteSwap, NoTwoClauseCaptionIsDataError) {
  const auto items = make_items(5, 21, {1.0, 0.0, 0.0});
  EXPECT_THROW(pte_swap_protocol(OrderOracleEmbedder{}, items), DataError);
}

// ------------------------------------------------------------------ BAT

std::vector<EvalItem> bat_items(std::size_t n, std::uint64_t seed) {
  text::CaptionConfig cc = only(Preposition::kBefore);
  cc.p_before = 0.5;
  cc.p_after = 0.5;
  auto items = make_items(n, seed, {0.0, 1.0, 0.0}, cc);
  std::erase_if(items, [](const EvalItem& it) {
    return it.caption.preposition != Preposition::kBefore &&
           it.caption.preposition != Preposition::kAfter;
  });
  return items;
}

TEST(Bat, IdenticalEmbeddingsScoreFifty) {
  const auto r = bat_protocol(ConstantEmbedder{}, bat_items(40, 22));
  EXPECT_EQ(r.metrics.at("bat_percent"), 50.0);
  expect_consistent(r);
}

TEST(Bat, OrderBlindModelScoresFifty) {
  const auto r = bat_protocol(BagOfLabelsEmbedder{}, bat_items(40, 23));
  EXPECT_EQ(r.metrics.at("bat_percent"), 50.0);
}

TEST(Bat, OracleScoresHundredOnDistinctLabels) {
  auto items = bat_items(60, 24);
  std::erase_if(items, [](const EvalItem& it) {
    return it.scene.events[0].label == it.scene.events[1].label;
  });
  ASSERT_GT(items.size(), 20u);
  const auto r = bat_protocol(OrderOracleEmbedder{}, items);
  EXPECT_EQ(r.metrics.at("bat_percent"), 100.0);
  expect_consistent(r);
}

TEST(Bat, RejectsCaptionsWithoutBeforeOrAfter) {
  const auto items = make_items(4, 25, {0.0, 1.0, 0.0}, only(Preposition::kThen));
  EXPECT_THROW(bat_protocol(OrderOracleEmbedder{}, items), DataError);
}

// ------------------------------------------------------------ zero-shot

long double oracle_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  return 2.0L * tp / (2.0L * tp + fp + fn);
}

TEST(ZeroShot, ConfusionTableMatchesOracle) {
  // Truth: 6 of class 0, 6 of class 1. Predictions: 4 of class 0 right,
  // 2 called class 1; 5 of class 1 right, 1 called class 0.
  const std::vector<std::size_t> truth = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  const std::vector<std::size_t> pred = {0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 0};
  const long double f0 = oracle_f1(4, 1, 2), f1 = oracle_f1(5, 2, 1);
  const auto s = macro_f1(pred, truth, 2);
  EXPECT_EQ(s.f1[0], static_cast<double>(f0));
  EXPECT_EQ(s.f1[1], static_cast<double>(f1));
  EXPECT_NEAR(s.macro_f1, static_cast<double>((f0 + f1) / 2), 1e-15);
}

TEST(ZeroShot, RandomBinaryAssignmentsConcentrateNearHalf) {
  std::mt19937_64 rng(26);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::size_t> truth(100), pred(100);
    for (std::size_t i = 0; i < 100; ++i) {
      truth[i] = i % 2;
      pred[i] = rng() % 2;
    }
    total += macro_f1(pred, truth, 2).macro_f1;
  }
  EXPECT_NEAR(total / trials, 0.5, 0.02);
}

TEST(ZeroShot, PrototypeClipPredictsItsLabel) {
  const scene::PrototypeTable table(scene::kNumEventTypes, 32, 7);
  const auto labels = label_prompts();
  auto items = make_items(30, 27, {1.0, 0.0, 0.0}, {}, 0.0);
  std::vector<std::size_t> truth;
  for (const auto& it : items) truth.push_back(it.scene.events[0].label);
  const auto r = zero_shot_protocol(PrototypeEmbedder(table), items, truth, labels);
  EXPECT_EQ(r.metrics.at("macro_f1"), 1.0);
  EXPECT_EQ(r.params.at("f1"), "macro");
  expect_consistent(r);

  std::vector<EvalItem> one(items.begin(), items.begin() + 1);
  const std::vector<std::size_t> t1 = {truth[0]};
  EXPECT_EQ(zero_shot_protocol(PrototypeEmbedder(table), one, t1, labels).metrics.at("macro_f1"),
            1.0);
}

TEST(ZeroShot, TiesGoToLowestLabelAndOovIsDataError) {
  const auto items = make_items(3, 28, {1.0, 0.0, 0.0});
  const std::vector<std::size_t> truth = {1, 1, 1};
  const std::vector<std::string> labels = {"a dog barks", "a cat meows"};
  const auto r = zero_shot_protocol(ConstantEmbedder{}, items, truth, labels);
  for (const auto& rec : r.records) EXPECT_EQ(rec.at("predicted"), 0u);
  const std::vector<std::string> bad = {"a unicorn sings"};
  const std::vector<std::size_t> t0 = {0, 0, 0};
  EXPECT_THROW(zero_shot_protocol(ConstantEmbedder{}, items, t0, bad), DataError);
}

// ------------------------------------------------------------------- SED

EvalItem single_event_item() {
  EvalItem it;
  it.id = "sed";
  it.scene.relation = scene::Relation::kSingle;
  it.scene.duration_s = 4.0;
  it.scene.events = {{3, 1.5, 1.0, 1.0}};
  it.scene.seed = 5;
  it.caption = text::caption_from_text(label_prompt(3));
  static const scene::PrototypeTable table(scene::kNumEventTypes, 32, 7);
  scene::RenderConfig rc;
  rc.noise_sigma = 0.0;
  it.clip = scene::render_scene(it.scene, table, rc);
  return it;
}

TEST(Sed, SingleEventMatchesHandTable) {
  const scene::PrototypeTable table(scene::kNumEventTypes, 32, 7);
  const PrototypeEmbedder emb(table);
  const EvalItem it = single_event_item();
  const auto labels = label_prompts();
  const auto label_emb = emb.embed_texts(label_captions(labels));
  const auto s = sed_scores(emb, it.clip, label_emb);
  // Starts every 50 ms from 0 to 3.0 s, floored onto 100 ms frames.
  ASSERT_EQ(s.start_frames.size(), 61u);
  EXPECT_EQ(s.start_frames[1], 0u);
  EXPECT_EQ(s.start_frames[2], 1u);
  EXPECT_EQ(s.start_frames.back(), 30u);
  // The event covers frames 15..24. A window [f, f+10) sees it for f in 6..24
  // and then matches the prototype exactly; silent windows score 0.5.
  for (std::size_t w = 0; w < s.start_frames.size(); ++w) {
    const std::size_t f = s.start_frames[w];
    const bool sees = f >= 6 && f <= 24;
    EXPECT_NEAR(s.score(w, 3), sees ? 1.0 : 0.5, 1e-6) << f;
  }
  // Window [0.6, 1.6) reaches into segment 0 and [2.4, 3.4) into segment 3,
  // so at 0.75 label 3 fires in all four segments and nothing else fires.
  const auto pred = segment_activity(s, 0.75);
  const auto truth = truth_activity(it.scene, 4.0, labels.size());
  for (std::size_t g = 0; g < 4; ++g) {
    for (std::size_t l = 0; l < labels.size(); ++l) {
      EXPECT_EQ(pred[g * labels.size() + l], l == 3) << g << " " << l;
      EXPECT_EQ(truth[g * labels.size() + l], l == 3 && (g == 1 || g == 2)) << g << " " << l;
    }
  }
  const auto c = count_segments(pred, truth);
  EXPECT_EQ(c.tp, 2u);
  EXPECT_EQ(c.fp, 2u);
  EXPECT_EQ(c.fn, 0u);
  EXPECT_DOUBLE_EQ(c.f1(), 2.0 / 3.0);

  const std::vector<EvalItem> one = {it};
  const auto r = sed_protocol(emb, one, labels, 0.75);
  EXPECT_DOUBLE_EQ(r.metrics.at("f1"), 2.0 / 3.0);
  EXPECT_EQ(r.params.at("f1"), "micro");
  expect_consistent(r);
}

TEST(Sed, ThresholdExtremes) {
  const scene::PrototypeTable table(scene::kNumEventTypes, 32, 7);
  const PrototypeEmbedder emb(table);
  const auto items = make_items(5, 29, {0.4, 0.4, 0.2});
  const auto labels = label_prompts();
  const auto all = sed_protocol(emb, items, labels, 0.0);
  EXPECT_EQ(all.metrics.at("recall"), 1.0);
  const auto none = sed_protocol(emb, items, labels, 1.0);
  EXPECT_EQ(none.metrics.at("f1"), 0.0);
  EXPECT_THROW(sed_protocol(emb, items, labels, 1.01), ArgumentError);
}

TEST(Sed, HopLargerThanClipIsArgumentError) {
  const scene::PrototypeTable table(scene::kNumEventTypes, 32, 7);
  const PrototypeEmbedder emb(table);
  const EvalItem it = single_event_item();
  const auto label_emb = emb.embed_texts(label_captions(label_prompts()));
  SedOptions o;
  o.hop_s = 5.0;
  EXPECT_THROW(sed_scores(emb, it.clip, label_emb, o), ArgumentError);
}

TEST(ThresholdSearch, ConstantCurvePicksZero) {
  EXPECT_EQ(threshold_search([](double) { return 0.4; }), 0.0);
}

TEST(ThresholdSearch, SinglePeakIsFound) {
  EXPECT_EQ(threshold_search([](double t) { return -std::abs(t - 0.37); }), 0.37);
}

TEST(ThresholdSearch, ReturnedThresholdBeatsEveryCandidate) {
  const scene::PrototypeTable table(scene::kNumEventTypes, 32, 7);
  const PrototypeEmbedder emb(table);
  const auto items = make_items(6, 30, {0.4, 0.4, 0.2});
  const auto labels = label_prompts();
  const auto search = threshold_search(emb, items, labels);
  const double best = sed_protocol(emb, items, labels, search.threshold).metrics.at("f1");
  for (std::size_t i = 0; i <= 100; ++i) {
    const double f = sed_protocol(emb, items, labels, i / 100.0).metrics.at("f1");
    EXPECT_EQ(f, search.f1[i]);
    EXPECT_GE(best, f);
  }
  EXPECT_GT(best, 0.5);
}

// --------------------------------------------------- reports end to end

TEST(Report, EveryProtocolRoundTripsAndRecomputesExactly) {
  model::ModelConfig c;
  c.head_type = model::HeadType::kTransformer;
  c.text.layers = c.head.layers = 1;
  const model::Model<float> m(c, 31);
  const ModelEmbedder emb(m);
  text::CaptionConfig cc = text::CaptionConfig::uniform_temporal();
  auto items = make_items(40, 32, {0.3, 0.5, 0.2}, cc);
  auto more = then_as_items(20, 33);
  items.insert(items.end(), more.begin(), more.end());
  for (std::size_t i = 0; i < items.size(); ++i) items[i].id = "r" + std::to_string(i);

  std::vector<EvalItem> pte, bat, singles;
  std::vector<std::size_t> truth;
  for (const auto& it : items) {
    if (text::is_temporal(it.caption.preposition)) pte.push_back(it);
    if (it.caption.preposition == Preposition::kBefore ||
        it.caption.preposition == Preposition::kAfter) {
      bat.push_back(it);
    }
    if (it.scene.relation == scene::Relation::kSingle) {
      singles.push_back(it);
      truth.push_back(it.scene.events[0].label);
    }
  }
  const auto labels = label_prompts();
  std::vector<EvalReport> reports = {
      retrieval_protocol(emb, items),
      then_as_protocol(emb, items),
      pte_swap_protocol(emb, pte),
      bat_protocol(emb, bat),
      zero_shot_protocol(emb, singles, truth, labels),
      sed_split_protocol(emb, std::span(items).first(10), labels, 3),
  };
  const auto dir = std::filesystem::temp_directory_path() / "atlab_report_test";
  std::filesystem::remove_all(dir);
  for (auto& r : reports) {
    r.dataset_id = "ds";
    r.checkpoint_id = "ck";
    expect_consistent(r);
    write_report(dir, r);
    const EvalReport back = read_report(dir / (r.protocol + ".json"));
    EXPECT_EQ(back.metrics, r.metrics) << r.protocol;
    EXPECT_EQ(back.records, r.records) << r.protocol;
    expect_consistent(back);
  }
  std::filesystem::remove_all(dir);
}

TEST(Report, TamperedMetricIsDetected) {
  auto r = bat_protocol(ConstantEmbedder{}, bat_items(20, 34));
  r.metrics["bat_percent"] = std::nextafter(50.0, 51.0);
  EXPECT_EQ(inconsistent_metrics(r), (std::vector<std::string>{"bat_percent"}));
  r.protocol = "mystery";
  EXPECT_THROW(recompute_metrics(r), DataError);
}

TEST(Report, DeterministicForFixedInputs) {
  const auto items = make_items(30, 35, {0.4, 0.4, 0.2}, text::CaptionConfig::uniform_temporal());
  model::ModelConfig c;
  const model::Model<float> m(c, 36);
  const ModelEmbedder emb(m);
  const auto a = retrieval_protocol(emb, items), b = retrieval_protocol(emb, items);
  EXPECT_EQ(summary_json(a).dump(), summary_json(b).dump());
  EXPECT_EQ(a.records, b.records);
}

}  // namespace
}  // namespace atlab::eval
