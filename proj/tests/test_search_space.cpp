/*
 * Copyright 2026 The dasnas Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <vector>

#include "dasnas/search_space.hpp"
#include "dasnas/sparsemax.hpp"
#include "dasnas/supernet.hpp"
#include "support/oracles.hpp"

namespace dasnas {
namespace {

using testing::random_tensor;

Tensor weights(std::vector<double> w) {
  const std::size_t n = w.size();
  return Tensor(Shape{n}, std::move(w));
}

TEST(SearchSpace, DefaultCount) {
  // (16·4)·(16·4)·(9·4)·(1·4)·(1·1)
  const std::uint64_t expected = 64ull * 64 * 36 * 4;
  EXPECT_EQ(total_architectures(SearchSpaceSpec::default_space(5)), expected);
  EXPECT_EQ(expected, 589824u);
}

TEST(SearchSpace, DegenerateSpaceHasOneArchitecture) {
  SearchSpaceSpec spec = SearchSpaceSpec::default_space(3);
  for (std::size_t l = 0; l < kConvLayerCount; ++l) spec.layers[l] = LayerCandidates::from_lists({{1, 1}}, {8});
  spec.layers[3] = LayerCandidates::from_lists({{1, 1}}, {128});
  EXPECT_EQ(total_architectures(spec), 1u);
}

TEST(SearchSpace, ValidationRejectsBadSpaces) {
  auto spec = SearchSpaceSpec::default_space(4);
  spec.layers.pop_back();
  EXPECT_THROW(spec.validate(), ArgumentError);
  spec = SearchSpaceSpec::default_space(4);
  spec.layers[3].kernel_sizes = {{3, 3}};
  spec.layers[3].h_max = spec.layers[3].w_max = 3;
  EXPECT_THROW(spec.validate(), ArgumentError);
  EXPECT_THROW(LayerCandidates::from_lists({}, {8}), ArgumentError);
  EXPECT_THROW(LayerCandidates::from_lists({{1, 1}, {1, 1}}, {8}), ArgumentError);
}

TEST(KernelSize, ParseAndPrint) {
  EXPECT_EQ(parse_kernel_size("2x1"), (KernelSize{2, 1}));
  EXPECT_EQ(to_string(KernelSize{5, 3}), "5x3");
  EXPECT_THROW(parse_kernel_size("3"), ArgumentError);
  EXPECT_THROW(parse_kernel_size("0x2"), ArgumentError);
}

TEST(PadKernel, TwoByOneInFiveByFive) {
  const Tensor k(Shape{1, 1, 2, 1}, std::vector<double>{7, 9});
  const Tensor p = pad_kernel_spatial(k, 5, 5);
  std::vector<double> expected(25, 0.0);
  expected[1 * 5 + 2] = 7;
  expected[2 * 5 + 2] = 9;
  EXPECT_EQ(std::vector<double>(p.values().begin(), p.values().end()), expected);
}

TEST(PadKernel, SameSizeIsIdentityAndOversizeRejected) {
  const Tensor k(Shape{2, 2, 3, 3}, 1.0);
  EXPECT_TRUE(pad_kernel_spatial(k, 3, 3).same_values(k));
  EXPECT_THROW(pad_kernel_spatial(k, 2, 5), ArgumentError);
}

TEST(PadKernel, PaddedConvolutionIsExact) {
  Rng rng(31);
  for (const auto& layer : SearchSpaceSpec::default_space(5).layers) {
    for (auto ks : layer.kernel_sizes) {
      const Tensor x = random_tensor({2, 3, 7, 7}, rng), k = random_tensor({2, 3, ks.h, ks.w}, rng);
      const Tensor a = conv2d_same(x, k), b = conv2d_same(x, pad_kernel_spatial(k, layer.h_max, layer.w_max));
      EXPECT_LT(testing::max_abs_diff(a.values(), b.values()), 1e-12) << to_string(ks);
    }
  }
}

TEST(ChannelMask, Examples) {
  const std::vector<std::size_t> d2{2}, d12{1, 2}, d4{4};
  const Tensor m1 = channel_mask(d2, weights({1.0}), 4);
  EXPECT_EQ(std::vector<double>(m1.values().begin(), m1.values().end()), (std::vector<double>{1, 1, 0, 0}));
  const Tensor m2 = channel_mask(d12, weights({0.5, 0.5}), 4);
  EXPECT_EQ(std::vector<double>(m2.values().begin(), m2.values().end()), (std::vector<double>{1, 0.5, 0, 0}));
  const Tensor m3 = channel_mask(d4, weights({1.0}), 4);
  EXPECT_EQ(std::vector<double>(m3.values().begin(), m3.values().end()), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_THROW(channel_mask(d12, weights({1.0}), 4), ArgumentError);
}

TEST(ChannelMask, HardMaskEqualsTruncatedKernel) {
  Rng rng(32);
  const std::vector<std::size_t> depths{8, 16, 32, 64};
  for (std::size_t j = 0; j < depths.size(); ++j) {
    std::vector<double> onehot(depths.size(), 0.0);
    onehot[j] = 1.0;
    const Tensor x = random_tensor({1, 64, 4, 4}, rng), k = random_tensor({3, 64, 3, 3}, rng);
    const Tensor masked = conv2d_same(x, scale_axis(k, channel_mask(depths, weights(onehot), 64), 1));
    // physically truncated input and kernel
    const std::size_t d = depths[j];
    std::vector<double> xt, kt;
    for (std::size_t c = 0; c < d; ++c)
      xt.insert(xt.end(), x.values().begin() + c * 16, x.values().begin() + (c + 1) * 16);
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t c = 0; c < d; ++c)
        kt.insert(kt.end(), k.values().begin() + (o * 64 + c) * 9, k.values().begin() + (o * 64 + c + 1) * 9);
    const Tensor truncated = conv2d_same(Tensor({1, d, 4, 4}, xt), Tensor({3, d, 3, 3}, kt));
    EXPECT_LT(testing::max_abs_diff(masked.values(), truncated.values()), 1e-12);
  }
}

TEST(MixedKernel, OneHotAndAverage) {
  Rng rng(33);
  const std::vector<Tensor> banks{random_tensor({2, 2, 1, 1}, rng), random_tensor({2, 2, 3, 3}, rng)};
  EXPECT_TRUE(mixed_kernel(banks, weights({0.0, 1.0}), 3, 3).same_values(banks[1]));
  const Tensor avg = mixed_kernel(banks, weights({0.5, 0.5}), 3, 3);
  const Tensor p0 = pad_kernel_spatial(banks[0], 3, 3);
  for (std::size_t i = 0; i < avg.size(); ++i) EXPECT_NEAR(avg[i], 0.5 * p0[i] + 0.5 * banks[1][i], 1e-15);
  EXPECT_THROW(mixed_kernel(banks, weights({1.0}), 3, 3), ArgumentError);
  EXPECT_THROW(mixed_kernel(banks, weights({0.7, 0.7}), 3, 3), ArgumentError);
}

TEST(MixedForward, SingleConvolutionMatchesDoubleSum) {
  Rng rng(34);
  const auto spec = SearchSpaceSpec::default_space(5);
  const auto& layer = spec.layers[0];
  const std::size_t cin = 16;
  std::vector<Tensor> shared;
  for (auto ks : layer.kernel_sizes) shared.push_back(random_tensor({4, cin, ks.h, ks.w}, rng));
  const std::vector<std::size_t> depths{2, 4, 8, 16};
  std::vector<std::vector<Tensor>> grid(shared.size(), std::vector<Tensor>(depths.size()));
  for (std::size_t i = 0; i < shared.size(); ++i)
    for (std::size_t j = 0; j < depths.size(); ++j) grid[i][j] = shared[i];
  std::vector<double> za(shared.size()), zb(depths.size());
  for (auto& v : za) v = rng.normal();
  for (auto& v : zb) v = rng.normal();
  const Tensor aw = weights(sparsemax_forward(za)), bw = weights(sparsemax_forward(zb));
  const Tensor x = random_tensor({2, cin, 6, 6}, rng);
  const Tensor fast = mixed_forward(x, shared, aw, bw, depths, 5, 5);
  const Tensor slow = mixed_forward_reference(x, grid, aw, bw, depths, 5, 5);
  EXPECT_LT(testing::relative_error(fast.values(), slow.values()), 1e-10);
}

TEST(MixedForward, ReferenceRejectsMissingBank) {
  const std::vector<std::vector<Tensor>> grid{{Tensor(Shape{1, 1, 1, 1})}, {}};
  const std::vector<std::size_t> depths{1};
  EXPECT_THROW(mixed_forward_reference(Tensor(Shape{1, 1, 2, 2}), grid, weights({0.5, 0.5}), weights({1.0}), depths, 1, 1),
               ArgumentError);
}

TEST(Supernet, BankAccountingPerPhase) {
  const auto spec = SearchSpaceSpec::default_space(5);
  const Supernet a(spec, Phase::alpha, 12, false, {}, 1);
  const Supernet b(spec, Phase::beta, 12, false, {0, 3, 2, 0, 0}, 1);
  for (std::size_t l = 0; l < kConvLayerCount; ++l) {
    EXPECT_EQ(a.weight_bank_count(l), spec.layers[l].kernel_sizes.size());
    EXPECT_EQ(b.weight_bank_count(l), 1u);
    EXPECT_EQ(b.mask_view_count(l), spec.layers[l].depths.size());
  }
}

TEST(Supernet, ScoresHaveClassShape) {
  const auto spec = SearchSpaceSpec::default_space(3);
  for (bool complex_mode : {false, true}) {
    const std::size_t cin = complex_mode ? 6 : 12;
    const Supernet net(spec, Phase::alpha, cin, complex_mode, {}, 7);
    Rng rng(1);
    Batch batch{random_tensor({2, cin, 15, 15}, rng), std::nullopt, {0, 1}};
    if (complex_mode) batch.im = random_tensor({2, cin, 15, 15}, rng);
    std::vector<Tensor> aw, bw;
    for (const auto& layer : spec.layers) {
      aw.push_back(sparsemax(Tensor(Shape{layer.kernel_sizes.size()})));
      bw.push_back(sparsemax(Tensor(Shape{layer.depths.size()})));
    }
    EXPECT_EQ(net.scores(batch, net.parameters(), aw, bw).shape(), (Shape{2, 3}));
  }
}

TEST(Supernet, DepthPhaseNeedsChosenKernels) {
  EXPECT_THROW(Supernet(SearchSpaceSpec::default_space(3), Phase::beta, 12, false, {}, 1), ArgumentError);
  EXPECT_THROW(Supernet(SearchSpaceSpec::default_space(3), Phase::beta, 12, false, {99, 0, 0, 0, 0}, 1),
               ArgumentError);
}

}  // namespace
}  // namespace dasnas
