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

#include <cmath>
#include <numeric>
#include <vector>

#include "dasnas/sparsemax.hpp"
#include "support/oracles.hpp"

namespace dasnas {
namespace {

std::vector<double> vec(std::initializer_list<double> v) { return v; }

TEST(Sparsemax, HandExamples) {
  EXPECT_EQ(sparsemax_forward(vec({0.0, 0.0})), vec({0.5, 0.5}));
  EXPECT_EQ(sparsemax_forward(vec({1.0, 0.0})), vec({1.0, 0.0}));
  // z = (1, 0.2, 0): τ = (1 + 0.2 − 1) / 2 = 0.1
  const auto p = sparsemax_forward(vec({1.0, 0.2, 0.0}));
  EXPECT_NEAR(p[0], 0.9, 1e-15);
  EXPECT_NEAR(p[1], 0.1, 1e-15);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Sparsemax, SingleElementIsOne) { EXPECT_EQ(sparsemax_forward(vec({-7.0})), vec({1.0})); }

TEST(Sparsemax, ShiftInvariant) {
  Rng rng(2);
  std::vector<double> z(7);
  for (auto& v : z) v = rng.normal() * 2;
  auto shifted = z;
  for (auto& v : shifted) v += 3.25;
  EXPECT_LT(testing::max_abs_diff(sparsemax_forward(z), sparsemax_forward(shifted)), 1e-12);
}

TEST(Sparsemax, MatchesBisectionProjection) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(2 + rng.below(15));
    for (auto& v : z) v = 3.0 * rng.normal();
    const auto p = sparsemax_forward(z);
    EXPECT_LT(testing::max_abs_diff(p, testing::simplex_projection(z)), 1e-9);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Sparsemax, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(sparsemax_forward(std::vector<double>{}), ArgumentError);
  EXPECT_THROW(sparsemax_forward(vec({1.0, NAN})), ArgumentError);
  EXPECT_THROW(sparsemax_forward(vec({INFINITY, 0.0})), ArgumentError);
}

TEST(Sparsemax, BackwardProjectsOntoSupport) {
  // support {0, 1}: grad = up − mean(up over support), zero elsewhere
  const auto g = sparsemax_backward(vec({1.0, 0.2, 0.0}), vec({1.0, 3.0, 5.0}));
  EXPECT_EQ(g, vec({-1.0, 1.0, 0.0}));
}

TEST(Sparsemax, BackwardLengthMismatch) {
  EXPECT_THROW(sparsemax_backward(vec({0.0, 1.0}), vec({1.0})), DimensionError);
}

TEST(Sparsemax, JacobianMatchesFiniteDifferencesAwayFromBoundaries) {
  Rng rng(9);
  int checked = 0;
  while (checked < 50) {
    std::vector<double> z(3 + rng.below(6));
    for (auto& v : z) v = rng.normal();
    const double tau = sparsemax_threshold(z);
    bool near = false;
    for (double v : z) near |= std::abs(v - tau) < 1e-3;
    if (near) continue;
    ++checked;
    const Tensor r = testing::random_tensor({z.size()}, rng);
    const std::vector<Tensor> in{Tensor({z.size()}, z)};
    EXPECT_LT(testing::gradient_check([&](auto v) { return testing::project(sparsemax(v[0]), r); }, in), 1e-7);
  }
}

TEST(Sparsemax, SupportSizeCountsPositives) { EXPECT_EQ(support_size(vec({0.5, 0.0, 0.5})), 2u); }

TEST(Softmax, SumsToOneAndIsStable) {
  const auto p = softmax_forward(vec({1000.0, 1000.0}));
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  const Tensor r(Shape{3}, std::vector<double>{0.3, -1.0, 2.0});
  const std::vector<Tensor> in{Tensor(Shape{3}, vec({0.1, -0.4, 1.2}))};
  EXPECT_LT(testing::gradient_check([&](auto v) { return testing::project(softmax(v[0]), r); }, in), 1e-7);
}

}  // namespace
}  // namespace dasnas
