// Copyright 2026 The cohdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "cohdiff/grad_check.hpp"
#include "cohdiff/layout.hpp"
#include "cohdiff/nn_ops.hpp"
#include "cohdiff/oracle.hpp"
#include "cohdiff/ops.hpp"
#include "test_util.hpp"

namespace cohdiff {
namespace {

using test::randn;
using DT = Tensor<double>;

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  DT eye = DT::from({2, 2}, {1, 0, 0, 1});
  DT x = DT::from({2, 2}, {3.5, -1.25, 2, 7});
  EXPECT_TRUE(bitwise_equal(matmul(eye, x), x));
}

TEST(Matmul, HandComputedCase) {
  DT a = DT::from({2, 2}, {1, 2, 3, 4});
  DT b = DT::from({2, 1}, {1, 1});
  DT y = matmul(a, b);
  EXPECT_DOUBLE_EQ(y.at({0, 0}), 3.0);
  EXPECT_DOUBLE_EQ(y.at({1, 0}), 7.0);
}

TEST(Matmul, MatchesTripleLoopOracle) {
  Rng rng(77);
  DT a = randn<double>(rng, {7, 5});
  DT b = randn<double>(rng, {5, 3});
  EXPECT_LE(max_abs_diff(matmul(a, b), oracle::matmul_oracle(a, b)), 1e-12);
}

TEST(Matmul, ShapeMismatchThrows) {
  DT a({2, 3}), b({2, 3});
  EXPECT_THROW(matmul(a, b), DimensionError);
}

TEST(Softmax, UniformLogitsGiveUniformWeights) {
  DT x = DT::from({1, 3}, {0, 0, 0});
  DT y = softmax(x, -1);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(y.at({0, j}), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, NegInfSentinelGetsZeroWeight) {
  const double inf = std::numeric_limits<double>::infinity();
  DT x = DT::from({1, 2}, {-inf, 0.0});
  DT y = softmax(x, -1);
  EXPECT_EQ(y.at({0, 0}), 0.0);
  EXPECT_EQ(y.at({0, 1}), 1.0);
}

TEST(Softmax, MatchesDirectOracle) {
  DT x = DT::from({1, 3}, {1, 2, 3});
  EXPECT_LE(max_abs_diff(softmax(x, -1), oracle::softmax_oracle(x)), 1e-12);
}

TEST(Softmax, FullyMaskedSliceThrows) {
  const double inf = std::numeric_limits<double>::infinity();
  DT x = DT::from({1, 2}, {-inf, -inf});
  EXPECT_THROW(softmax(x, -1), MaskingError);
}

TEST(Softmax, ArbitraryAxis) {
  Rng rng(3);
  DT x = randn<double>(rng, {3, 4, 5});
  DT y = softmax(x, 1);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 5; ++k) {
      double sum = 0;
      for (int j = 0; j < 4; ++j) sum += y.at({i, j, k});
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Conv2d, OneByOneIdentityKernel) {
  Rng rng(5);
  DT x = randn<double>(rng, {1, 4, 4});
  DT w = DT::from({1, 1, 1, 1}, {1.0});
  DT b = DT::from({1}, {0.0});
  EXPECT_TRUE(bitwise_equal(conv2d(x, w, b, Padding::kSame), x));
}

TEST(Conv2d, ZeroInputZeroBiasGivesZeros) {
  DT x({2, 5, 5});
  Rng rng(6);
  DT w = randn<double>(rng, {3, 2, 3, 3});
  DT b({3});
  DT y = conv2d(x, w, b, Padding::kSame);
  for (int64_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y.data()[i], 0.0);
}

TEST(Conv2d, MatchesSixLoopOracle) {
  Rng rng(7);
  DT x = randn<double>(rng, {3, 6, 7});
  DT w = randn<double>(rng, {4, 3, 3, 3});
  DT b = randn<double>(rng, {4});
  EXPECT_LE(max_abs_diff(conv2d(x, w, b, Padding::kSame), oracle::conv_oracle(x, w, b, true)),
            1e-10);
  EXPECT_LE(max_abs_diff(conv2d(x, w, b, Padding::kValid), oracle::conv_oracle(x, w, b, false)),
            1e-10);
}

TEST(Conv2d, ChannelMismatchThrows) {
  DT x({2, 4, 4}), w({1, 3, 3, 3}), b({1});
  EXPECT_THROW(conv2d(x, w, b, Padding::kSame), DimensionError);
}

TEST(Conv2d, EvenKernelThrows) {
  DT x({1, 4, 4}), w({1, 1, 2, 2}), b({1});
  EXPECT_THROW(conv2d(x, w, b, Padding::kSame), ParameterError);
}

TEST(ResizeNearest, BlockReplication2x) {
  LayoutMap m(2, 2);
  m.at(0, 0) = 1;
  m.at(0, 1) = 2;
  m.at(1, 0) = 3;
  m.at(1, 1) = 0;
  LayoutMap up = resize_nearest(m, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(up.at(y, x), m.at(y / 2, x / 2));
}

TEST(ResizeNearest, IdenticalAtMatchingSize) {
  Rng rng(9);
  LayoutMap m(3, 5);
  for (auto& id : m.ids) id = static_cast<uint8_t>(rng.uniform_int(0, 3));
  EXPECT_TRUE(resize_nearest(m, 3, 5) == m);
}

TEST(ResizeNearest, MatchesIndexOracle3to5) {
  Rng rng(10);
  LayoutMap m(3, 3);
  for (auto& id : m.ids) id = static_cast<uint8_t>(rng.uniform_int(0, 3));
  EXPECT_TRUE(resize_nearest(m, 5, 5) == oracle::resize_oracle(m, 5, 5));
}

TEST(GradCheck, SumHasExactOnesGradient) {
  Rng rng(11);
  ParamStore<double> ps;
  auto& x = ps.create("x", randn<double>(rng, {4, 3}));
  const double err = grad_check(
      [&](Tape<double>* tape) { return sum_all(tape ? tape->param(x) : x.value); }, ps);
  EXPECT_LE(err, 1e-9);
  ps.zero_grad();
  Tape<double> tape;
  tape.backward(sum_all(tape.param(x)));
  for (double g : x.grad) EXPECT_EQ(g, 1.0);
}

TEST(GradCheck, HalfSquaredNormGradientIsX) {
  Rng rng(12);
  ParamStore<double> ps;
  auto& x = ps.create("x", randn<double>(rng, {6}));
  const double err = grad_check(
      [&](Tape<double>* tape) {
        DT t = tape ? tape->param(x) : x.value;
        return scale(sum_all(mul(t, t)), 0.5);
      },
      ps);
  EXPECT_LE(err, 1e-9);
  ps.zero_grad();
  Tape<double> tape;
  tape.backward(scale(sum_all(mul(tape.param(x), tape.param(x))), 0.5));
  for (size_t i = 0; i < x.grad.size(); ++i) EXPECT_NEAR(x.grad[i], x.value.data()[i], 1e-12);
}

TEST(GradCheck, RandomizedBackwardMatchesFiniteDifferences) {
  // matmul + softmax + conv2d chains over randomized small shapes.
  for (int c = 0; c < 100; ++c) {
    Rng rng(split_seed(1234, static_cast<uint64_t>(c)));
    ParamStore<double> ps;
    const int m = static_cast<int>(rng.uniform_int(2, 4));
    const int k = static_cast<int>(rng.uniform_int(2, 4));
    const int n = static_cast<int>(rng.uniform_int(2, 4));
    auto& a = ps.create("a", randn<double>(rng, {m, k}));
    auto& b = ps.create("b", randn<double>(rng, {k, n}));
    auto& x = ps.create("x", randn<double>(rng, {2, 4, 3}));
    auto& w = ps.create("w", randn<double>(rng, {2, 2, 3, 3}));
    auto& bias = ps.create("bias", randn<double>(rng, {2}));
    DT probe = randn<double>(rng, {m, n});
    const double err = grad_check(
        [&](Tape<double>* tape) {
          DT ta = tape ? tape->param(a) : a.value;
          DT tb = tape ? tape->param(b) : b.value;
          DT tx = tape ? tape->param(x) : x.value;
          DT tw = tape ? tape->param(w) : w.value;
          DT tbias = tape ? tape->param(bias) : bias.value;
          DT l1 = mean_all(mul(softmax(matmul(ta, tb), -1), probe));
          DT z = conv2d(tx, tw, tbias, Padding::kSame);
          return add(l1, mean_all(mul(z, z)));
        },
        ps);
    ASSERT_LE(err, 1e-4) << "case " << c;
  }
}

TEST(GradCheck, SelfSimilarityBackward) {
  Rng rng(13);
  ParamStore<double> ps;
  auto& x = ps.create("x", randn<double>(rng, {3, 5, 4}));
  DT probe = randn<double>(rng, {9, 5, 4});
  const double err = grad_check(
      [&](Tape<double>* tape) {
        DT t = tape ? tape->param(x) : x.value;
        return mean_all(mul(self_similarity(t, 3), probe));
      },
      ps);
  EXPECT_LE(err, 1e-4);
}

TEST(GradCheck, PoolUpsampleEmbedTanhBackward) {
  Rng rng(14);
  ParamStore<double> ps;
  auto& x = ps.create("x", randn<double>(rng, {2, 4, 4}));
  auto& table = ps.create("table", randn<double>(rng, {6, 3}));
  auto& gate = ps.create("gate", DT::scalar(0.37));
  DT probe = randn<double>(rng, {2, 4, 4});
  DT probe2 = randn<double>(rng, {3, 3});
  const double err = grad_check(
      [&](Tape<double>* tape) {
        DT t = tape ? tape->param(x) : x.value;
        DT tt = tape ? tape->param(table) : table.value;
        DT tg = tape ? tape->param(gate) : gate.value;
        DT pooled = upsample2x(avgpool2x2(t));
        DT gated = add_scaled(t, pooled, tanh_op(tg));
        DT emb = embed_rows(tt, {1, 4, 1});
        return add(mean_all(mul(gated, probe)), mean_all(mul(emb, probe2)));
      },
      ps);
  EXPECT_LE(err, 1e-4);
}

TEST(Ops, ForwardIsBitDeterministic) {
  Rng rng(15);
  DT a = randn<double>(rng, {17, 9});
  DT b = randn<double>(rng, {9, 13});
  EXPECT_TRUE(bitwise_equal(matmul(a, b), matmul(a, b)));
  DT x = randn<double>(rng, {3, 8, 8});
  DT w = randn<double>(rng, {5, 3, 3, 3});
  DT bias = randn<double>(rng, {5});
  EXPECT_TRUE(bitwise_equal(conv2d(x, w, bias, Padding::kSame), conv2d(x, w, bias, Padding::kSame)));
  EXPECT_TRUE(bitwise_equal(self_similarity(x, 3), self_similarity(x, 3)));
}

TEST(Tape, UntouchedParameterKeepsZeroGradient) {
  Rng rng(16);
  ParamStore<double> ps;
  auto& used = ps.create("used", randn<double>(rng, {3}));
  auto& unused = ps.create("unused", randn<double>(rng, {3}));
  ps.zero_grad();
  Tape<double> tape;
  tape.backward(sum_all(tape.param(used)));
  for (double g : unused.grad) EXPECT_EQ(g, 0.0);
  for (double g : used.grad) EXPECT_EQ(g, 1.0);
}

TEST(Tape, ReusedTensorAccumulatesGradient) {
  ParamStore<double> ps;
  auto& x = ps.create("x", DT::from({2}, {3.0, -1.0}));
  ps.zero_grad();
  Tape<double> tape;
  DT t = tape.param(x);
  tape.backward(sum_all(add(t, t)));
  for (double g : x.grad) EXPECT_EQ(g, 2.0);
}

TEST(Tensor, InvariantViolationsThrow) {
  EXPECT_THROW(DT({0, 3}), DimensionError);
  EXPECT_THROW(DT::from({2, 2}, {1.0}), DimensionError);
}

}  // namespace
}  // namespace cohdiff
