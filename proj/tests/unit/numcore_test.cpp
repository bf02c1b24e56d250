// Copyright 2026 The atlab Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "atlab/numcore/attention.hpp"
#include "atlab/numcore/gradcheck.hpp"
#include "atlab/numcore/graph.hpp"
#include "atlab/numcore/kernels.hpp"
#include "atlab/numcore/op_suite.hpp"
#include "atlab/numcore/optim.hpp"
#include "test_util.hpp"

namespace atlab::num {
namespace {

using testing::random_tensor;
using Gd = Graph<double>;
using Gf = Graph<float>;

using OpFn = std::function<Tensor<double>(Gd&, ParamSet<double>&)>;
using InputFn = std::function<void(ParamSet<double>&, std::mt19937_64&)>;

double op_gradcheck(const InputFn& make_inputs, const OpFn& op, int points, std::uint64_t seed) {
  const OpGradResult r = check_op_gradient(make_inputs, op, points, seed);
  EXPECT_EQ(r.accepted, points);
  return r.max_rel_error;
}

// ---------------------------------------------------------------- affine

TEST(Affine, IdentityCase) {
  Gf g;
  Tensor<float> eye({2, 2}, {1, 0, 0, 1});
  Tensor<float> zero({2});
  auto y = g.affine(eye, eye, zero);
  EXPECT_EQ(std::vector<float>(y.values().begin(), y.values().end()),
            (std::vector<float>{1, 0, 0, 1}));
}

TEST(Affine, ForcedArithmetic) {
  Gf g;
  auto y = g.affine(Tensor<float>({1, 2}, {1, 2}), Tensor<float>({2, 1}, {1, 1}),
                    Tensor<float>({1}, {3}));
  ASSERT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_EQ(y[0], 6.0f);
}

TEST(Affine, MatchesNaiveTripleLoopExactly) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_tensor<float>({3, 4}, rng);
    auto w = random_tensor<float>({4, 2}, rng);
    auto b = random_tensor<float>({2}, rng);
    Gf g;
    auto y = g.affine(x, w, b);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0.0;
        for (std::size_t p = 0; p < 4; ++p) s += static_cast<double>(x.at(i, p)) * w.at(p, j);
        EXPECT_EQ(y.at(i, j), static_cast<float>(s + b[j]));
      }
    }
  }
}

TEST(Affine, ShapeMismatchIsDimensionError) {
  Gf g;
  EXPECT_THROW(g.affine(Tensor<float>({2, 3}), Tensor<float>({2, 2}), Tensor<float>({2})),
               DimensionError);
  EXPECT_THROW(g.affine(Tensor<float>({2, 2}), Tensor<float>({2, 2}), Tensor<float>({3})),
               DimensionError);
}

// --------------------------------------------------------------- softmax

TEST(Softmax, SingleElementIsOne) {
  Gf g;
  EXPECT_EQ(g.softmax(Tensor<float>({1}, {-3.5f}))[0], 1.0f);
}

TEST(Softmax, SymmetricInputIsUniform) {
  Gf g;
  auto y = g.softmax(Tensor<float>({4}, {2.f, 2.f, 2.f, 2.f}));
  for (float v : y.values()) EXPECT_EQ(v, 0.25f);
}

TEST(Softmax, MatchesHighPrecisionOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto v = random_tensor<float>({8}, rng, 3.0);
    Gf g;
    auto y = g.softmax(v);
    long double mx = *std::max_element(v.values().begin(), v.values().end());
    long double z = 0;
    for (float x : v.values()) z += std::exp(static_cast<long double>(x) - mx);
    double total = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      const long double ref = std::exp(static_cast<long double>(v[i]) - mx) / z;
      EXPECT_LT(std::abs((y[i] - ref) / ref), 1e-6L);
      EXPECT_GT(y[i], 0.0f);
      total += y[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Softmax, PermutationEquivariantExactly) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto v = random_tensor<float>({7}, rng, 2.0);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor<float> pv({7});
    for (std::size_t i = 0; i < 7; ++i) pv[i] = v[perm[i]];
    Gf g;
    auto y = g.softmax(v);
    auto py = g.softmax(pv);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(py[i], y[perm[i]]);
  }
}

TEST(Softmax, EmptyInputIsDimensionError) {
  Gf g;
  EXPECT_THROW(g.softmax(Tensor<float>({0})), DimensionError);
}

TEST(Softmax, MaskedColumnsGetZeroWeight) {
  Gf g;
  const bool mask[] = {false, true, false};
  auto y = g.softmax_rows(Tensor<float>({2, 3}, {5, 1, 9, -2, 0, 3}), mask);
  EXPECT_EQ(y.at(0, 0), 0.0f);
  EXPECT_EQ(y.at(0, 1), 1.0f);
  EXPECT_EQ(y.at(1, 2), 0.0f);
  EXPECT_EQ(y.at(1, 1), 1.0f);
}

// ------------------------------------------------------------ layer norm

TEST(LayerNorm, ConstantRowBecomesZero) {
  Gf g;
  auto y = g.layer_norm(Tensor<float>({1, 4}, {3, 3, 3, 3}), Tensor<float>({4}, {1, 1, 1, 1}),
                        Tensor<float>({4}), 1e-5);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

TEST(LayerNorm, AlreadyNormalizedRowUnchanged) {
  Gd g;
  auto y = g.layer_norm(Tensor<double>({1, 2}, {1, -1}), Tensor<double>({2}, {1, 1}),
                        Tensor<double>({2}), 1e-12);
  EXPECT_NEAR(y[0], 1.0, 1e-9);
  EXPECT_NEAR(y[1], -1.0, 1e-9);
}

TEST(LayerNorm, MatchesHighPrecisionOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto x = random_tensor<float>({1, 16}, rng, 2.0);
    auto gamma = random_tensor<float>({16}, rng);
    auto beta = random_tensor<float>({16}, rng);
    Gf g;
    auto y = g.layer_norm(x, gamma, beta, 1e-5);
    long double mean = 0, var = 0;
    for (float v : x.values()) mean += v;
    mean /= 16;
    for (float v : x.values()) var += (v - mean) * (v - mean);
    var /= 16;
    for (std::size_t j = 0; j < 16; ++j) {
      const long double ref = (x[j] - mean) / std::sqrt(var + 1e-5L) * gamma[j] + beta[j];
      EXPECT_LT(std::abs(y[j] - ref), 1e-5L * std::max(1.0L, std::abs(ref)));
    }
  }
}

// -------------------------------------------------------------- attention

AttentionWeights<float> identity_heads(std::size_t d, std::size_t heads) {
  AttentionWeights<float> w;
  const std::size_t hd = d / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor<float> slice({d, hd});
    Tensor<float> back({hd, d});
    for (std::size_t i = 0; i < hd; ++i) {
      slice[(h * hd + i) * hd + i] = 1.0f;
      back[i * d + h * hd + i] = 1.0f;
    }
    w.wq.push_back(slice);
    w.wk.push_back(slice);
    w.wv.push_back(slice);
    w.wo.push_back(back);
  }
  return w;
}

TEST(Attention, SinglePositionWithIdentityProjectionsReturnsInput) {
  std::mt19937_64 rng(6);
  auto x = random_tensor<float>({1, 4}, rng);
  Gf g;
  auto y = multi_head_self_attention(g, x, identity_heads(4, 2));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_FLOAT_EQ(y[j], x[j]);
}

TEST(Attention, AllButOneKeyMaskedPutsFullWeightOnIt) {
  std::mt19937_64 rng(7);
  auto x = random_tensor<float>({4, 4}, rng);
  const bool mask[] = {false, false, true, false};
  Gf g;
  auto y = multi_head_self_attention(g, x, identity_heads(4, 2), mask);
  // Every query attends only to position 2, whose value row is x[2].
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_FLOAT_EQ(y.at(i, j), x.at(2, j));
  }
}

TEST(Attention, IndivisibleWidthIsConfigError) {
  AttentionWeights<float> w;
  for (int h = 0; h < 2; ++h) {
    w.wq.emplace_back(Shape{5, 2});
    w.wk.emplace_back(Shape{5, 2});
    w.wv.emplace_back(Shape{5, 2});
    w.wo.emplace_back(Shape{2, 5});
  }
  Gf g;
  EXPECT_THROW(multi_head_self_attention(g, Tensor<float>({3, 5}), w), ConfigError);
}

TEST(Attention, MaskedPositionsDoNotInfluenceValidOutputs) {
  std::mt19937_64 rng(8);
  auto x = random_tensor<float>({5, 4}, rng);
  AttentionWeights<float> w;
  for (int h = 0; h < 2; ++h) {
    w.wq.push_back(random_tensor<float>({4, 2}, rng));
    w.wk.push_back(random_tensor<float>({4, 2}, rng));
    w.wv.push_back(random_tensor<float>({4, 2}, rng));
    w.wo.push_back(random_tensor<float>({2, 4}, rng));
  }
  const bool mask[] = {true, true, true, false, false};
  Gf g;
  auto y1 = multi_head_self_attention(g, x, w, mask);
  auto x2 = x.clone();
  for (std::size_t j = 0; j < 4; ++j) x2[3 * 4 + j] = 100.0f + j;
  auto y2 = multi_head_self_attention(g, x2, w, mask);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y1.at(i, j), y2.at(i, j));
  }
}

// ---------------------------------------------- per-op gradient checks

class EveryOpGradient : public ::testing::TestWithParam<int> {};

TEST_P(EveryOpGradient, MatchesFiniteDifferencesAtTenPoints) {
  const auto cases = op_gradient_cases();
  const OpGradCase& c = cases.at(static_cast<std::size_t>(GetParam()));
  SCOPED_TRACE(c.name);
  EXPECT_LT(op_gradcheck(c.inputs, c.op, 10, 1000 + GetParam()), 1e-3);
}

INSTANTIATE_TEST_SUITE_P(AllOps, EveryOpGradient,
                         ::testing::Range(0, static_cast<int>(op_gradient_cases().size())),
                         [](const ::testing::TestParamInfo<int>& info) {
                           return op_gradient_cases()[static_cast<std::size_t>(info.param)].name;
                         });

TEST(SegmentAttention, PackedEqualsSeparateSequences) {
  std::mt19937_64 rng(77);
  const std::size_t lens[] = {3, 1, 4};
  const std::size_t offsets[] = {0, 3, 4, 8};
  Tensor<double> q = random_tensor<double>({8, 4}, rng);
  Tensor<double> k = random_tensor<double>({8, 4}, rng);
  Tensor<double> v = random_tensor<double>({8, 2}, rng);
  Graph<double> g(Graph<double>::Mode::kInference);
  const Tensor<double> packed = g.segment_attention(q, k, v, offsets, {}, 0.5);
  std::size_t row = 0;
  for (std::size_t len : lens) {
    const Tensor<double> qs = g.slice_rows(q, row, row + len);
    const Tensor<double> ks = g.slice_rows(k, row, row + len);
    const Tensor<double> vs = g.slice_rows(v, row, row + len);
    const Tensor<double> ref =
        g.matmul(g.softmax_rows(g.scale(g.matmul_nt(qs, ks), 0.5)), vs);
    for (std::size_t i = 0; i < len * 2; ++i) {
      EXPECT_NEAR(packed[row * 2 + i], ref[i], 1e-12);
    }
    row += len;
  }
}

TEST(SegmentMean, ExactUnderRowPermutation) {
  std::mt19937_64 rng(5);
  Tensor<float> x = random_tensor<float>({7, 16}, rng, 3.0);
  Tensor<float> rev({7, 16});
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t c = 0; c < 16; ++c) rev[(6 - i) * 16 + c] = x[i * 16 + c];
  }
  Graph<float> g(Graph<float>::Mode::kInference);
  const std::size_t offsets[] = {0, 7};
  const Tensor<float> a = g.segment_mean_rows(x, offsets), b = g.segment_mean_rows(rev, offsets);
  for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(a[c], b[c]);
}

TEST(SegmentAttention, RejectsSegmentWithoutValidKey) {
  Graph<double> g(Graph<double>::Mode::kInference);
  Tensor<double> x({3, 2}, std::vector<double>(6, 0.1));
  const std::size_t offsets[] = {0, 1, 3};
  const bool mask[] = {false, true, true};
  EXPECT_THROW(g.segment_attention(x, x, x, offsets, mask, 1.0), ContractError);
  const std::size_t bad[] = {0, 2};
  EXPECT_THROW(g.segment_attention(x, x, x, bad, {}, 1.0), DimensionError);
}

// --------------------------------------------------------------- backward

TEST(Backward, SumGivesAllOnes) {
  Tensor<float> w({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Gf g;
  g.backward(g.sum(w));
  for (float v : w.grad()) EXPECT_EQ(v, 1.0f);
}

TEST(Backward, UnreachedParameterHasZeroGradient) {
  ParamSet<float> ps;
  ps.add("w", Tensor<float>({2, 2}, {1, 2, 3, 4}));
  ps.add("u", Tensor<float>({2}, {1, 1}));
  ps.zero_grad();
  Gf g;
  g.backward(g.sum(ps.get("u")));
  for (float v : ps.get("w").grad()) EXPECT_EQ(v, 0.0f);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor<float> w({2}, {1, 2}, true);
  Gf g;
  EXPECT_THROW(g.backward(g.scale(w, 2.0)), ContractError);
}

TEST(Backward, CompositeAffineSoftmaxMatchesFiniteDifferences) {
  InputFn inputs = [](ParamSet<double>& ps, std::mt19937_64& rng) {
    ps.add("x", random_tensor<double>({1, 5}, rng));
    ps.add("w", random_tensor<double>({5, 6}, rng));
    ps.add("b", random_tensor<double>({6}, rng));
  };
  OpFn op = [](Gd& g, ParamSet<double>& ps) {
    return g.softmax_rows(g.affine(ps.get("x"), ps.get("w"), ps.get("b")));
  };
  EXPECT_LT(op_gradcheck(inputs, op, 10, 55), 1e-3);
}

TEST(Backward, NodesVisitedOncePerSweep) {
  Tensor<double> w({3}, {1, 2, 3}, true);
  Gd g;
  auto a = g.scale(w, 2.0);
  auto b = g.add(a, a);  // a is reached twice through one node
  g.backward(g.sum(b));
  for (double v : w.grad()) EXPECT_EQ(v, 4.0);
}

TEST(Graph, NonFiniteForwardValueFailsFastWithOpName) {
  Gf g;
  try {
    g.scale(Tensor<float>({1}, {1e30f}), 1e30);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("scale"), std::string::npos);
  }
}

TEST(Graph, InferenceModeRecordsNothing) {
  Tensor<float> w({2}, {1, 2}, true);
  Gf g(Gf::Mode::kInference);
  g.sum(g.scale(w, 3.0));
  EXPECT_EQ(g.num_nodes(), 0u);
}

// ---------------------------------------------------------------- kernels

TEST(Kernels, ParallelMatchesSerialBitwise) {
  std::mt19937_64 rng(9);
  auto a = random_tensor<float>({67, 45}, rng);
  auto b = random_tensor<float>({45, 33}, rng);
  auto bias = random_tensor<float>({33}, rng);
  std::vector<float> s(67 * 33), p(67 * 33);
  kernels::set_num_threads(4);
  kernels::serial::gemm_nn<float>(a.values(), b.values(), s, 67, 45, 33, bias.values());
  kernels::parallel::gemm_nn<float>(a.values(), b.values(), p, 67, 45, 33, bias.values());
  EXPECT_EQ(s, p);
  auto c = random_tensor<float>({67, 20}, rng);
  std::vector<float> st(45 * 20), pt(45 * 20);
  kernels::serial::gemm_tn<float>(a.values(), c.values(), st, 45, 67, 20);
  kernels::parallel::gemm_tn<float>(a.values(), c.values(), pt, 45, 67, 20);
  EXPECT_EQ(st, pt);
  kernels::set_num_threads(1);
}

// ------------------------------------------------------------------- adam

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParamSet<float> ps;
  ps.add("w", Tensor<float>({3}, {0.5f, -1.0f, 2.0f}));
  ps.zero_grad();
  ps.get("w").grad();
  auto state = AdamState<float>::for_params(ps, {});
  adam_step(ps, state);
  EXPECT_EQ(ps.get("w")[0], 0.5f);
  EXPECT_EQ(ps.get("w")[1], -1.0f);
  EXPECT_EQ(ps.get("w")[2], 2.0f);
  EXPECT_EQ(state.step_count, 1u);
}

TEST(Adam, FirstStepMovesBySignedLearningRate) {
  ParamSet<double> ps;
  ps.add("w", Tensor<double>({3}, {1.0, 1.0, 1.0}));
  auto g = ps.get("w").grad();
  g[0] = 0.3;
  g[1] = -2.0;
  g[2] = 1e-3;
  auto state = AdamState<double>::for_params(ps, {.lr = 1e-2});
  adam_step(ps, state);
  const double expected[] = {1.0 - 1e-2, 1.0 + 1e-2, 1.0 - 1e-2};
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT(std::abs((ps.get("w")[i] - 1.0) - (expected[i] - 1.0)) / 1e-2, 1e-3);
  }
}

// Independent 64-bit Adam on f(w) = 0.5 Σ c_i (w_i - t_i)².
TEST(Adam, FiveStepTrajectoryMatchesReferenceImplementation) {
  const std::vector<double> c = {1.0, 3.0, 0.5, 2.0};
  const std::vector<double> t = {0.2, -0.4, 1.5, 0.0};
  std::vector<double> w_ref = {1.0, 1.0, -1.0, 0.3};
  std::vector<double> m(4, 0.0), v(4, 0.0);
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  ParamSet<float> ps;
  ps.add("w", Tensor<float>({4}, {1.0f, 1.0f, -1.0f, 0.3f}));
  auto state = AdamState<float>::for_params(ps, {.lr = lr});

  for (int step = 1; step <= 5; ++step) {
    for (int i = 0; i < 4; ++i) {
      const double gr = c[i] * (w_ref[i] - t[i]);
      m[i] = b1 * m[i] + (1 - b1) * gr;
      v[i] = b2 * v[i] + (1 - b2) * gr * gr;
      const double mh = m[i] / (1 - std::pow(b1, step));
      const double vh = v[i] / (1 - std::pow(b2, step));
      w_ref[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
    ps.zero_grad();
    auto gw = ps.get("w").grad();
    for (int i = 0; i < 4; ++i) gw[i] = static_cast<float>(c[i] * (ps.get("w")[i] - t[i]));
    adam_step(ps, state);
  }
  for (int i = 0; i < 4; ++i) {
    EXPECT_LT(std::abs(ps.get("w")[i] - w_ref[i]) / std::abs(w_ref[i]), 1e-5) << i;
  }
}

TEST(Adam, BitDeterministic) {
  auto run = [] {
    std::mt19937_64 rng(21);
    ParamSet<float> ps;
    ps.add("w", random_tensor<float>({16}, rng));
    auto state = AdamState<float>::for_params(ps, {});
    for (int s = 0; s < 3; ++s) {
      auto g = ps.get("w").grad();
      for (auto& x : g) x = static_cast<float>(std::normal_distribution<double>()(rng));
      adam_step(ps, state);
    }
    return std::vector<float>(ps.get("w").values().begin(), ps.get("w").values().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ParamSet<float> ps;
  ps.add("encoder.w", Tensor<float>({2}, {1, 2}));
  ps.get("encoder.w").grad()[1] = std::nanf("");
  auto state = AdamState<float>::for_params(ps, {});
  try {
    adam_step(ps, state);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.w"), std::string::npos);
  }
  EXPECT_EQ(state.step_count, 0u);
}

// ------------------------------------------------------------- lr schedule

TEST(StepDecay, Examples) {
  EXPECT_DOUBLE_EQ(step_decay_lr(0, 1e-5, 20, 0.1), 1e-5);
  EXPECT_NEAR(step_decay_lr(20, 1e-5, 20, 0.1), 1e-6, 1e-20);
  EXPECT_NEAR(step_decay_lr(45, 1e-5, 20, 0.1), 1e-7, 1e-20);
}

TEST(StepDecay, NonIncreasingForGammaAtMostOne) {
  for (double gamma : {1.0, 0.5, 0.1}) {
    double prev = step_decay_lr(0, 3e-4, 7, gamma);
    for (std::uint64_t e = 1; e < 100; ++e) {
      const double cur = step_decay_lr(e, 3e-4, 7, gamma);
      EXPECT_LE(cur, prev);
      prev = cur;
    }
  }
}

// ------------------------------------------------------------- gradcheck

TEST(GradCheck, HalfSquaredNorm) {
  std::mt19937_64 rng(31);
  ParamSet<double> ps;
  ps.add("x", random_tensor<double>({6}, rng));
  ScalarFunction<double> f = [&](Gd& g) {
    return g.scale(g.sum(g.mul(ps.get("x"), ps.get("x"))), 0.5);
  };
  EXPECT_LT(finite_difference_check(f, ps).max_rel_error, 1e-6);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  ParamSet<double> ps;
  ps.add("x", Tensor<double>({3}, {1, 2, 3}));
  ScalarFunction<double> f = [](Gd& g) { return g.sum(Tensor<double>({2}, {4, 5})); };
  auto report = finite_difference_check(f, ps);
  EXPECT_EQ(report.max_rel_error, 0.0);
  EXPECT_EQ(report.coordinates, 3u);
}

TEST(GradCheck, NonFiniteFunctionIsCheckError) {
  ParamSet<double> ps;
  ps.add("x", Tensor<double>({1}, {1.0}));
  ScalarFunction<double> f = [&](Gd& g) {
    if (ps.get("x")[0] > 1.0) return g.scale(ps.get("x"), std::numeric_limits<double>::infinity());
    return g.sum(ps.get("x"));
  };
  EXPECT_THROW(finite_difference_check(f, ps), NumericError);
}

TEST(GradCheck, RejectsPointsNearReluKink) {
  ParamSet<double> ps;
  ps.add("x", Tensor<double>({2}, {1.0, 5e-5}));
  ScalarFunction<double> f = [&](Gd& g) { return g.sum(g.relu(ps.get("x"))); };
  EXPECT_THROW(finite_difference_check(f, ps), GradCheckRejected);
}

}  // namespace
}  // namespace atlab::num
