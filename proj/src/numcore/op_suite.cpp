// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include "atlab/numcore/op_suite.hpp"

#include <algorithm>

#include "atlab/numcore/attention.hpp"

namespace atlab::num {
namespace {

using Gd = Graph<double>;

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace

std::vector<OpGradCase> op_gradient_cases() {
  auto two = [](Shape a, Shape b) {
    return [a, b](ParamSet<double>& ps, std::mt19937_64& rng) {
      ps.add("a", random_tensor(a, rng));
      ps.add("b", random_tensor(b, rng));
    };
  };
  auto one = [](Shape a) {
    return [a](ParamSet<double>& ps, std::mt19937_64& rng) {
      ps.add("a", random_tensor(a, rng));
    };
  };
  std::vector<OpGradCase> cases;
  cases.push_back({"affine",
                   [](ParamSet<double>& ps, std::mt19937_64& rng) {
                     ps.add("x", random_tensor({3, 4}, rng));
                     ps.add("w", random_tensor({4, 5}, rng));
                     ps.add("b", random_tensor({5}, rng));
                   },
                   [](Gd& g, ParamSet<double>& ps) {
                     return g.affine(ps.get("x"), ps.get("w"), ps.get("b"));
                   }});
  cases.push_back({"matmul", two({3, 4}, {4, 2}),
                   [](Gd& g, ParamSet<double>& ps) { return g.matmul(ps.get("a"), ps.get("b")); }});
  cases.push_back({"matmul_nt", two({3, 4}, {5, 4}), [](Gd& g, ParamSet<double>& ps) {
                     return g.matmul_nt(ps.get("a"), ps.get("b"));
                   }});
  cases.push_back({"transpose", one({3, 4}),
                   [](Gd& g, ParamSet<double>& ps) { return g.transpose(ps.get("a")); }});
  cases.push_back({"add", two({2, 3}, {2, 3}),
                   [](Gd& g, ParamSet<double>& ps) { return g.add(ps.get("a"), ps.get("b")); }});
  cases.push_back({"mul", two({2, 3}, {2, 3}),
                   [](Gd& g, ParamSet<double>& ps) { return g.mul(ps.get("a"), ps.get("b")); }});
  cases.push_back({"add_row", two({3, 4}, {4}), [](Gd& g, ParamSet<double>& ps) {
                     return g.add_row(ps.get("a"), ps.get("b"));
                   }});
  cases.push_back({"scale", one({2, 3}),
                   [](Gd& g, ParamSet<double>& ps) { return g.scale(ps.get("a"), -1.7); }});
  cases.push_back({"relu", one({3, 5}),
                   [](Gd& g, ParamSet<double>& ps) { return g.relu(ps.get("a")); }});
  cases.push_back({"softmax", one({7}),
                   [](Gd& g, ParamSet<double>& ps) { return g.softmax(ps.get("a")); }});
  cases.push_back({"softmax_rows_masked", one({3, 4}), [](Gd& g, ParamSet<double>& ps) {
                     static const bool mask[] = {true, false, true, true};
                     return g.softmax_rows(ps.get("a"), mask);
                   }});
  cases.push_back({"layer_norm",
                   [](ParamSet<double>& ps, std::mt19937_64& rng) {
                     ps.add("x", random_tensor({3, 6}, rng));
                     ps.add("gamma", random_tensor({6}, rng));
                     ps.add("beta", random_tensor({6}, rng));
                   },
                   [](Gd& g, ParamSet<double>& ps) {
                     return g.layer_norm(ps.get("x"), ps.get("gamma"), ps.get("beta"), 1e-5);
                   }});
  cases.push_back({"embedding", one({5, 3}), [](Gd& g, ParamSet<double>& ps) {
                     static const std::size_t ids[] = {4, 0, 4, 2};
                     return g.embedding(ps.get("a"), ids);
                   }});
  cases.push_back({"concat_rows", two({2, 3}, {1, 3}), [](Gd& g, ParamSet<double>& ps) {
                     const Tensor<double> parts[] = {ps.get("a"), ps.get("b"), ps.get("a")};
                     return g.concat_rows(parts);
                   }});
  cases.push_back({"slice_rows", one({5, 3}),
                   [](Gd& g, ParamSet<double>& ps) { return g.slice_rows(ps.get("a"), 1, 4); }});
  cases.push_back({"mean_rows", one({4, 3}),
                   [](Gd& g, ParamSet<double>& ps) { return g.mean_rows(ps.get("a")); }});
  cases.push_back({"l2_normalize_rows", one({3, 5}), [](Gd& g, ParamSet<double>& ps) {
                     return g.l2_normalize_rows(ps.get("a"));
                   }});
  cases.push_back({"sum", one({3, 2}),
                   [](Gd& g, ParamSet<double>& ps) { return g.sum(ps.get("a")); }});
  cases.push_back({"cross_entropy_rows", one({4, 5}), [](Gd& g, ParamSet<double>& ps) {
                     static const std::size_t targets[] = {0, 3, 3, 4};
                     return g.cross_entropy_rows(ps.get("a"), targets);
                   }});
  cases.push_back({"segment_mean_rows", one({6, 3}), [](Gd& g, ParamSet<double>& ps) {
                     static const std::size_t offsets[] = {0, 1, 4, 6};
                     return g.segment_mean_rows(ps.get("a"), offsets);
                   }});
  cases.push_back({"segment_attention",
                   [](ParamSet<double>& ps, std::mt19937_64& rng) {
                     ps.add("q", random_tensor({6, 3}, rng));
                     ps.add("k", random_tensor({6, 3}, rng));
                     ps.add("v", random_tensor({6, 2}, rng));
                   },
                   [](Gd& g, ParamSet<double>& ps) {
                     static const std::size_t offsets[] = {0, 2, 6};
                     static const bool mask[] = {true, true, true, false, true, true};
                     return g.segment_attention(ps.get("q"), ps.get("k"), ps.get("v"), offsets,
                                                mask, 0.8);
                   }});
  OpInputs att_inputs = [](ParamSet<double>& ps, std::mt19937_64& rng) {
    ps.add("x", random_tensor({4, 6}, rng));
    for (int h = 0; h < 2; ++h) {
      const std::string s = std::to_string(h);
      ps.add("wq" + s, random_tensor({6, 3}, rng, 0.5));
      ps.add("wk" + s, random_tensor({6, 3}, rng, 0.5));
      ps.add("wv" + s, random_tensor({6, 3}, rng, 0.5));
      ps.add("wo" + s, random_tensor({3, 6}, rng, 0.5));
    }
  };
  OpBody att_op = [](Gd& g, ParamSet<double>& ps) {
    AttentionWeights<double> w;
    for (int h = 0; h < 2; ++h) {
      const std::string s = std::to_string(h);
      w.wq.push_back(ps.get("wq" + s));
      w.wk.push_back(ps.get("wk" + s));
      w.wv.push_back(ps.get("wv" + s));
      w.wo.push_back(ps.get("wo" + s));
    }
    static const bool mask[] = {true, true, false, true};
    return multi_head_self_attention(g, ps.get("x"), w, mask);
  };
  OpInputs block_inputs = [](ParamSet<double>& ps, std::mt19937_64& rng) {
    ps.add("x", random_tensor({3, 4}, rng));
    ps.add("g1", random_tensor({4}, rng));
    ps.add("b1", random_tensor({4}, rng));
    ps.add("g2", random_tensor({4}, rng));
    ps.add("b2", random_tensor({4}, rng));
    for (int h = 0; h < 2; ++h) {
      const std::string s = std::to_string(h);
      ps.add("wq" + s, random_tensor({4, 2}, rng, 0.5));
      ps.add("wk" + s, random_tensor({4, 2}, rng, 0.5));
      ps.add("wv" + s, random_tensor({4, 2}, rng, 0.5));
      ps.add("wo" + s, random_tensor({2, 4}, rng, 0.5));
    }
    ps.add("w1", random_tensor({4, 8}, rng, 0.5));
    ps.add("c1", random_tensor({8}, rng));
    ps.add("w2", random_tensor({8, 4}, rng, 0.5));
    ps.add("c2", random_tensor({4}, rng));
  };
  OpBody block_op = [](Gd& g, ParamSet<double>& ps) {
    TransformerBlockWeights<double> w;
    w.ln1_gamma = ps.get("g1");
    w.ln1_beta = ps.get("b1");
    w.ln2_gamma = ps.get("g2");
    w.ln2_beta = ps.get("b2");
    for (int h = 0; h < 2; ++h) {
      const std::string s = std::to_string(h);
      w.attention.wq.push_back(ps.get("wq" + s));
      w.attention.wk.push_back(ps.get("wk" + s));
      w.attention.wv.push_back(ps.get("wv" + s));
      w.attention.wo.push_back(ps.get("wo" + s));
    }
    w.ffn_w1 = ps.get("w1");
    w.ffn_b1 = ps.get("c1");
    w.ffn_w2 = ps.get("w2");
    w.ffn_b2 = ps.get("c2");
    return transformer_block(g, ps.get("x"), w);
  };
  cases.push_back({"multi_head_self_attention", att_inputs, att_op});
  cases.push_back({"transformer_block", block_inputs, block_op});
  return cases;
}

OpGradResult check_op_gradient(const OpInputs& inputs, const OpBody& op, int points,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  OpGradResult r;
  while (r.accepted < points && r.rejected < points * 20) {
    ParamSet<double> ps;
    inputs(ps, rng);
    Gd probe(Gd::Mode::kInference);
    Tensor<double> w = random_tensor(op(probe, ps).shape(), rng);
    ScalarFunction<double> f = [&](Gd& g) { return g.sum(g.mul(op(g, ps), w)); };
    try {
      r.max_rel_error = std::max(r.max_rel_error, finite_difference_check(f, ps).max_rel_error);
      ++r.accepted;
    } catch (const GradCheckRejected&) {
      ++r.rejected;
    }
  }
  return r;
}

}  // namespace atlab::num
