// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/model/gradcheck.hpp"

#include <algorithm>
#include <random>

#include "atlab/model/model.hpp"
#include "atlab/numcore/gradcheck.hpp"

namespace atlab::model {
namespace {

scene::AudioClip random_clip(std::size_t frames, std::size_t dim, double rate,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.3);
  std::vector<float> v(frames * dim);
  for (auto& x : v) x = static_cast<float>(nd(rng));
  return scene::make_clip(num::Tensor<float>({frames, dim}, std::move(v)), rate);
}

}  // namespace

ModelGradCheck full_model_gradcheck(const ModelConfig& config, int points, std::uint64_t seed,
                                    std::size_t coords_per_param) {
  ModelGradCheck out;
  const std::uint32_t v = static_cast<std::uint32_t>(config.text.vocab_size);
  const std::vector<TokenIds> texts = {{0, 2 % v, 10 % v, 33 % v, 40 % v},
                                       {0, 3 % v, 11 % v, 2 % v, 12 % v, 41 % v, 60 % v}};
  for (std::uint64_t s = seed; out.accepted < points && s < seed + 4 * std::uint64_t(points); ++s) {
    Model<double> m(config, s);
    std::mt19937_64 rng(s);
    const scene::AudioClip a = random_clip(25, config.audio.feat_dim, config.audio.frame_rate, rng);
    const scene::AudioClip b = random_clip(40, config.audio.feat_dim, config.audio.frame_rate, rng);
    num::ScalarFunction<double> f = [&](num::Graph<double>& g) {
      const scene::AudioClip* clips[] = {&a, &b};
      return info_nce_loss(g, m.encode_texts(g, texts), m.encode_audios(g, clips),
                           config.temperature);
    };
    num::GradCheckOptions opt;
    opt.max_coords_per_param = coords_per_param;
    opt.seed = s;
    try {
      const auto r = num::finite_difference_check(f, m.params(), opt);
      if (r.max_rel_error >= out.max_rel_error) {
        out.max_rel_error = r.max_rel_error;
        out.worst_param = r.worst_param;
      }
      ++out.accepted;
    } catch (const num::GradCheckRejected&) {
      ++out.rejected;
    }
  }
  return out;
}

}  // namespace atlab::model
