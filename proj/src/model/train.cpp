// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/model/train.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "atlab/evalsuite/metrics.hpp"
#include "atlab/numcore/kernels.hpp"
#include "atlab/numcore/optim.hpp"
#include "atlab/scenegen/scene.hpp"

namespace atlab::model {

using num::Graph;
using num::Tensor;

void PairSet::check() const {
  if (tokens.size() != ids.size() || clips.size() != ids.size()) {
    throw DimensionError("pair set: " + std::to_string(ids.size()) + " ids, " +
                         std::to_string(tokens.size()) + " texts, " +
                         std::to_string(clips.size()) + " clips");
  }
}

namespace {

Tensor<float> stack(const std::vector<Tensor<float>>& parts, std::size_t dim) {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.rows();
  Tensor<float> out({n, dim});
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + at);
    at += p.size();
  }
  return out;
}

}  // namespace

Tensor<float> embed_texts(const Model<float>& model, std::span<const TokenIds> texts,
                          std::size_t batch_size) {
  if (texts.empty()) throw ArgumentError("embed_texts: nothing to embed");
  std::vector<Tensor<float>> parts;
  for (std::size_t b = 0; b < texts.size(); b += batch_size) {
    Graph<float> g(Graph<float>::Mode::kInference);
    parts.push_back(model.encode_texts(g, texts.subspan(b, std::min(batch_size, texts.size() - b))));
  }
  return stack(parts, model.config().embed_dim);
}

Tensor<float> embed_audios(const Model<float>& model,
                           std::span<const scene::AudioClip* const> clips,
                           std::size_t batch_size) {
  if (clips.empty()) throw ArgumentError("embed_audios: nothing to embed");
  std::vector<Tensor<float>> parts;
  for (std::size_t b = 0; b < clips.size(); b += batch_size) {
    Graph<float> g(Graph<float>::Mode::kInference);
    parts.push_back(model.encode_audios(g, clips.subspan(b, std::min(batch_size, clips.size() - b))));
  }
  return stack(parts, model.config().embed_dim);
}

Model<float> TrainResult::best_model() const {
  return Model<float>(config, best_params.clone_as<float>());
}

namespace {

std::vector<const scene::AudioClip*> clip_pointers(const PairSet& set) {
  std::vector<const scene::AudioClip*> out;
  out.reserve(set.size());
  for (const auto& c : set.clips) out.push_back(&c);
  return out;
}

struct Validation {
  double loss = 0.0;
  double recall = 0.0;
};

Validation validate(const Model<float>& model, const PairSet& val,
                    const std::vector<const scene::AudioClip*>& clips) {
  const ModelConfig& c = model.config();
  const Tensor<float> text = embed_texts(model, val.tokens, c.train.batch_size);
  const Tensor<float> audio = embed_audios(model, clips, c.train.batch_size);
  std::vector<std::size_t> truth(val.size());
  std::iota(truth.begin(), truth.end(), std::size_t{0});
  Validation out;
  out.recall = eval::retrieval_recall_at_k(text, audio, truth, c.train.recall_k);

  // Validation loss over the same fixed batches every epoch.
  const std::size_t b = c.train.batch_size, d = c.embed_dim;
  double sum = 0.0;
  std::size_t batches = 0;
  Graph<float> g(Graph<float>::Mode::kInference);
  for (std::size_t start = 0; start + 2 <= val.size(); start += b) {
    const std::size_t n = std::min(b, val.size() - start);
    Tensor<float> t({n, d}), a({n, d});
    std::copy_n(text.values().begin() + start * d, n * d, t.values().begin());
    std::copy_n(audio.values().begin() + start * d, n * d, a.values().begin());
    sum += info_nce_loss(g, t, a, c.temperature).item();
    ++batches;
  }
  out.loss = batches ? sum / static_cast<double>(batches) : 0.0;
  return out;
}

// Uniform index in [0, n) from a 64-bit draw; the same on every platform,
// unlike std::uniform_int_distribution.
std::size_t draw_below(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

}  // namespace

TrainResult train(const ModelConfig& config, const PairSet& train_set, const PairSet& val_set,
                  std::uint64_t seed, const EpochCallback& on_epoch) {
  validate_config(config);
  train_set.check();
  val_set.check();
  const TrainConfig& tc = config.train;
  if (train_set.size() < tc.batch_size) {
    throw ArgumentError("train: batch size " + std::to_string(tc.batch_size) +
                        " exceeds the " + std::to_string(train_set.size()) + " training pairs");
  }
  if (val_set.size() == 0) throw ArgumentError("train: empty validation set");
  const int previous_threads = num::kernels::num_threads();
  num::kernels::set_num_threads(tc.threads);

  TrainResult result;
  result.config = config;
  Model<float> model(config, scene::derive_seed(seed, 0));
  result.best_params = model.params().clone_as<float>();
  num::AdamState<float> adam =
      num::AdamState<float>::for_params(model.params(), num::AdamHyper{tc.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 shuffle_rng(scene::derive_seed(seed, 1));

  const auto train_clips = clip_pointers(train_set);
  const auto val_clips = clip_pointers(val_set);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_best = 0;

  try {
    for (std::size_t epoch = 0; epoch < tc.max_epochs; ++epoch) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.lr = num::step_decay_lr(epoch, tc.lr, tc.lr_step, tc.lr_gamma);
      adam.hyper.lr = rec.lr;
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[draw_below(shuffle_rng, i)]);
      }
      double loss_sum = 0.0;
      std::size_t batches = 0;
      for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
        const std::size_t n = std::min(tc.batch_size, order.size() - start);
        if (n < 2) break;  // InfoNCE needs at least one negative
        std::vector<TokenIds> texts;
        std::vector<const scene::AudioClip*> clips;
        std::vector<std::string> ids;
        for (std::size_t k = start; k < start + n; ++k) {
          texts.push_back(train_set.tokens[order[k]]);
          clips.push_back(train_clips[order[k]]);
          ids.push_back(train_set.ids[order[k]]);
        }
        if (!duplicate_ids(ids).empty()) {
          if (rec.duplicate_batches++ == 0 && result.warnings.size() < 10) {
            result.warnings.push_back("epoch " + std::to_string(epoch) +
                                      ": duplicate pair ids in a batch act as false negatives");
          }
        }
        Graph<float> g;
        const Tensor<float> t = model.encode_texts(g, texts);
        const Tensor<float> a = model.encode_audios(g, clips);
        const Tensor<float> loss = info_nce_loss(g, t, a, config.temperature);
        model.params().zero_grad();
        g.backward(loss);
        num::adam_step(model.params(), adam);
        loss_sum += loss.item();
        ++batches;
      }
      rec.train_loss = loss_sum / static_cast<double>(batches);
      const Validation v = validate(model, val_set, val_clips);
      rec.val_loss = v.loss;
      rec.val_recall = v.recall;
      if (v.recall > result.best_recall) {
        rec.improved = true;
        result.best_recall = v.recall;
        result.best_epoch = epoch;
        result.best_params = model.params().clone_as<float>();
        since_best = 0;
      } else {
        ++since_best;
      }
      result.log.push_back(rec);
      if (on_epoch) on_epoch(rec);
      if (tc.patience > 0 && since_best >= tc.patience) {
        result.early_stopped = true;
        break;
      }
    }
  } catch (const NumericError& e) {
    result.aborted = true;
    result.abort_reason = e.what();
  }
  num::kernels::set_num_threads(previous_threads);
  return result;
}

}  // namespace atlab::model
