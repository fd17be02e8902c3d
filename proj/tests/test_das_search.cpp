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
#include <sstream>
#include <string>
#include <vector>

#include "dasnas/das_search.hpp"
#include "support/datasets.hpp"

namespace dasnas {
namespace {

// Two candidates per choice so every phase has something to decide.
SearchSpaceSpec small_space(std::size_t classes = 2) {
  SearchSpaceSpec spec;
  spec.class_count = classes;
  spec.layers.push_back(LayerCandidates::from_lists({{1, 1}, {3, 3}}, {4, 8}));
  spec.layers.push_back(LayerCandidates::from_lists({{1, 1}, {2, 2}}, {4, 8}));
  spec.layers.push_back(LayerCandidates::from_lists({{1, 1}}, {4}));
  spec.layers.push_back(LayerCandidates::from_lists({{1, 1}}, {8, 16}));
  spec.layers.push_back(LayerCandidates::from_lists({{1, 1}}, {classes}));
  return spec;
}

SearchConfig quick_config(std::size_t epochs = 2) {
  SearchConfig c;
  c.epochs_alpha = epochs;
  c.epochs_beta = epochs;
  c.batch_size = 16;
  c.learning_rate = 1e-2;
  c.seed = 5;
  c.select_epochs = 2;
  return c;
}

PatchDataset quick_data(std::size_t count = 48, std::uint64_t seed = 1) {
  auto d = testing::separable_dataset(count, seed);
  testing::split_head(d, count * 3 / 4);
  return d;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

TEST(SearchPhase, ZeroEpochsReturnsInitialVectors) {
  auto cfg = quick_config(0);
  const auto spec = small_space();
  const auto zeros = ArchParams::zeros(spec);
  for (Phase phase : {Phase::alpha, Phase::beta}) {
    const auto r = search_phase(phase, spec, quick_data(), cfg, zeros);
    EXPECT_EQ(r.raw, phase == Phase::alpha ? zeros.alpha : zeros.beta);
    EXPECT_EQ(r.final_loss, 0.0);
  }
}

TEST(SearchPhase, DeterministicForSameInputs) {
  const auto spec = small_space();
  const auto data = quick_data();
  const auto a = search_phase(Phase::alpha, spec, data, quick_config(), ArchParams::zeros(spec));
  const auto b = search_phase(Phase::alpha, spec, data, quick_config(), ArchParams::zeros(spec));
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.final_loss, b.final_loss);
  auto other = quick_config();
  other.seed = 6;
  EXPECT_NE(search_phase(Phase::alpha, spec, data, other, ArchParams::zeros(spec)).raw, a.raw);
}

TEST(SearchPhase, MovesOnlyTheSearchedVectors) {
  const auto spec = small_space();
  const auto r = search_phase(Phase::alpha, spec, quick_data(), quick_config(), ArchParams::zeros(spec));
  ASSERT_EQ(r.raw.size(), spec.layers.size());
  EXPECT_NE(r.raw[0], std::vector<double>(2, 0.0));
  for (std::size_t l = 0; l < spec.layers.size(); ++l) EXPECT_EQ(r.raw[l].size(), spec.layers[l].kernel_sizes.size());
  const auto b = search_phase(Phase::beta, spec, quick_data(), quick_config(), ArchParams::zeros(spec));
  for (std::size_t l = 0; l < spec.layers.size(); ++l) EXPECT_EQ(b.raw[l].size(), spec.layers[l].depths.size());
}

TEST(SearchPhase, EmptyTrainingSplitIsArgumentError) {
  auto data = quick_data();
  testing::split_head(data, 0);
  EXPECT_THROW(search_phase(Phase::alpha, small_space(), data, quick_config(), ArchParams::zeros(small_space())),
               ArgumentError);
}

TEST(SearchPhase, NonFiniteLossIsDivergence) {
  auto cfg = quick_config();
  cfg.learning_rate = 1e300;
  cfg.epochs_alpha = 5;
  EXPECT_THROW(search_phase(Phase::alpha, small_space(), quick_data(), cfg, ArchParams::zeros(small_space())),
               DivergenceError);
}

TEST(RunDas, DegenerateSpaceHasOneAnswer) {
  SearchSpaceSpec spec;
  spec.class_count = 2;
  for (std::size_t depth : {4u, 4u, 4u, 8u, 2u}) spec.layers.push_back(LayerCandidates::from_lists({{1, 1}}, {depth}));
  const auto r = run_das(spec, quick_data(), quick_config());
  EXPECT_TRUE(r.architecture.member_of(spec));
  EXPECT_EQ(r.architecture.depths, (std::vector<std::size_t>{4, 4, 4, 8, 2}));
  EXPECT_GT(r.alpha_loss, 0.0);
}

TEST(RunDas, DefaultSpaceResultIsInTheSpace) {
  const auto spec = SearchSpaceSpec::default_space(2);
  auto cfg = quick_config(1);
  const auto r = run_das(spec, quick_data(24), cfg);
  EXPECT_TRUE(r.architecture.member_of(spec));
  r.architecture.validate();
  r.params.validate(spec);
}

TEST(RunDas, LoggedWeightsLieOnTheSimplex) {
  std::ostringstream log;
  auto cfg = quick_config(3);
  cfg.log = &log;
  run_das(small_space(), quick_data(), cfg);
  std::istringstream lines(log.str());
  std::string line;
  std::size_t epochs_seen = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("epoch=", 0) != 0) continue;
    ++epochs_seen;
    std::istringstream fields(line);
    std::string field;
    std::size_t layers = 0;
    while (fields >> field) {
      const auto eq = field.find(".weights=");
      if (eq == std::string::npos) continue;
      ++layers;
      double total = 0.0;
      for (double w : parse_list(field.substr(eq + 9))) {
        EXPECT_GE(w, 0.0);
        total += w;
      }
      EXPECT_NEAR(total, 1.0, 1e-9) << line;
    }
    EXPECT_EQ(layers, 5u);
  }
  EXPECT_EQ(epochs_seen, 6u);
}

TEST(RunDas, DeterministicArchitecture) {
  const auto data = quick_data();
  const auto a = run_das(small_space(), data, quick_config());
  const auto b = run_das(small_space(), data, quick_config());
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.architecture.to_text(), b.architecture.to_text());
}

TEST(RunDas, SoftmaxMixingRuns) {
  auto cfg = quick_config();
  cfg.activation = Mixing::softmax;
  EXPECT_TRUE(run_das(small_space(), quick_data(), cfg).architecture.member_of(small_space()));
}

TEST(Derive, ArgmaxOfSparsemaxWeights) {
  const auto spec = SearchSpaceSpec::default_space(3);
  auto p = ArchParams::zeros(spec);
  // sparsemax(0.7, 0.3, 0, 0, ...) keeps (0.7, 0.3) since 1 + 2·0.3 > 1 but 1 + 3·0 ≤ 1
  p.alpha[0].assign(16, 0.0);
  p.alpha[0][0] = 0.7;
  p.alpha[0][1] = 0.3;
  p.beta[1] = {0.0, 0.0, 2.0, 2.0};  // tie between candidates 2 and 3
  const auto arch = derive_architecture(p, spec);
  EXPECT_EQ(arch.kernels[0], spec.layers[0].kernel_sizes[0]);
  EXPECT_EQ(arch.depths[1], spec.layers[1].depths[2]);
  EXPECT_EQ(arch.depths[0], spec.layers[0].depths[0]);  // all-zero raw: uniform weights, lowest index
  EXPECT_EQ(arch.class_count, 3u);
}

TEST(Derive, ShiftInvariant) {
  const auto spec = SearchSpaceSpec::default_space(2);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = ArchParams::zeros(spec);
    for (auto& v : p.alpha) for (auto& x : v) x = rng.normal();
    for (auto& v : p.beta) for (auto& x : v) x = rng.normal();
    auto shifted = p;
    for (auto& v : shifted.alpha) for (auto& x : v) x += 0.75;
    for (auto& v : shifted.beta) for (auto& x : v) x -= 1.5;
    EXPECT_EQ(derive_architecture(p, spec), derive_architecture(shifted, spec));
  }
}

TEST(Derive, OnlyTopOne) {
  const auto spec = SearchSpaceSpec::default_space(2);
  EXPECT_THROW(derive_architecture(ArchParams::zeros(spec), spec, 2), UnsupportedError);
  EXPECT_THROW(derive_architecture(ArchParams::zeros(spec), spec, 0), UnsupportedError);
}

TEST(Derive, LengthMismatchIsDimensionError) {
  const auto spec = SearchSpaceSpec::default_space(2);
  auto p = ArchParams::zeros(spec);
  p.alpha[2].pop_back();
  EXPECT_THROW(derive_architecture(p, spec), DimensionError);
}

TEST(TopCandidate, TiesGoToLowestIndex) {
  const std::vector<double> tie{1.0, 1.0};
  EXPECT_EQ(top_candidate(tie, Mixing::sparsemax), 0u);
  EXPECT_EQ(top_candidate(tie, Mixing::softmax), 0u);
  const std::vector<double> later{0.0, 0.1, 0.1};
  EXPECT_EQ(top_candidate(later, Mixing::softmax), 1u);
}

TEST(RepeatSearch, DivergentRunIsSkipped) {
  const auto spec = small_space();
  const auto data = quick_data();
  auto cfg = quick_config();
  std::ostringstream log;
  cfg.log = &log;
  const SearchRunner runner = [&](const SearchSpaceSpec& s, const PatchDataset& d, const SearchConfig& c) {
    if (c.seed == cfg.seed + 1) throw DivergenceError("forced", 1, 1);
    return run_das(s, d, c);
  };
  const auto r = repeat_search(spec, data, cfg, 3, runner);
  ASSERT_EQ(r.runs.size(), 3u);
  EXPECT_FALSE(r.runs[1].architecture.has_value());
  EXPECT_NE(r.best_index, 1u);
  EXPECT_TRUE(r.runs[0].architecture && r.runs[2].architecture);
  for (const auto& run : r.runs) {
    if (run.architecture) {
      EXPECT_GE(r.runs[r.best_index].validation_oa, run.validation_oa);
    }
  }
  EXPECT_EQ(r.best, *r.runs[r.best_index].architecture);
  ASSERT_TRUE(r.best_model.has_value());
  EXPECT_EQ(r.best_model->architecture(), r.best);
  EXPECT_NE(log.str().find("run=1 seed=6 error="), std::string::npos);
}

TEST(RepeatSearch, AllRunsDivergingRethrows) {
  const SearchRunner runner = [](const SearchSpaceSpec&, const PatchDataset&, const SearchConfig&) -> DasResult {
    throw DivergenceError("forced", 1, 1);
  };
  EXPECT_THROW(repeat_search(small_space(), quick_data(), quick_config(), 2, runner), DivergenceError);
}

TEST(RepeatSearch, SingleRepeatMatchesRunDas) {
  const auto data = quick_data();
  const auto r = repeat_search(small_space(), data, quick_config(), 1);
  EXPECT_EQ(r.best, run_das(small_space(), data, quick_config()).architecture);
  EXPECT_EQ(r.runs[0].seed, quick_config().seed);
}

TEST(RepeatSearch, RejectsZeroRepeatsAndMissingValidation) {
  EXPECT_THROW(repeat_search(small_space(), quick_data(), quick_config(), 0), ArgumentError);
  auto data = quick_data();
  testing::split_head(data, data.count);
  EXPECT_THROW(repeat_search(small_space(), data, quick_config(), 1), ArgumentError);
}

}  // namespace
}  // namespace dasnas
