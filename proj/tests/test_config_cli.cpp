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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dasnas/cli.hpp"
#include "dasnas/config.hpp"

namespace dasnas {
namespace {

namespace fs = std::filesystem;

TEST(Config, Defaults) {
  const PipelineConfig c = parse_config("");
  EXPECT_EQ(c.epochs_retrain, 500u);
  EXPECT_EQ(c.search.batch_size, 64u);
  EXPECT_DOUBLE_EQ(c.search.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(c.search.gamma, 1e-3);
  EXPECT_EQ(c.search.activation, Mixing::sparsemax);
  EXPECT_FALSE(c.search.complex_mode);
  EXPECT_EQ(c.channels, 12u);
  EXPECT_EQ(c.per_class_train, 300u);
  EXPECT_EQ(c.per_class_val, 100u);
  EXPECT_EQ(c.repeats, 10u);
  EXPECT_EQ(c.search.precision, GemmPrecision::float32);
}

TEST(Config, ParsesKeysCommentsAndBlankLines) {
  const PipelineConfig c = parse_config(
      "# search budget\n"
      "epochs_alpha = 3\n"
      "\n"
      "epochs_beta=4   # trailing comment\n"
      "learning_rate = 2.5e-3\n"
      "gamma = 0\n"
      "activation = softmax\n"
      "repeats = 2\n"
      "seed = 17\n"
      "precision = double\n"
      "layer2.kernels = 1x1, 3x3\n"
      "layer4.depths = 128,256\n");
  EXPECT_EQ(c.search.epochs_alpha, 3u);
  EXPECT_EQ(c.search.epochs_beta, 4u);
  EXPECT_DOUBLE_EQ(c.search.learning_rate, 2.5e-3);
  EXPECT_EQ(c.search.gamma, 0.0);
  EXPECT_EQ(c.search.activation, Mixing::softmax);
  EXPECT_EQ(c.repeats, 2u);
  EXPECT_EQ(c.search.seed, 17u);
  EXPECT_EQ(c.search.precision, GemmPrecision::float64);
  const SearchSpaceSpec spec = c.search_space(4);
  EXPECT_EQ(spec.layers[1].kernel_sizes, (std::vector<KernelSize>{{1, 1}, {3, 3}}));
  EXPECT_EQ(spec.layers[1].depths, SearchSpaceSpec::default_space(4).layers[1].depths);
  EXPECT_EQ(spec.layers[3].depths, (std::vector<std::size_t>{128, 256}));
  EXPECT_EQ(spec.layers[4].depths, (std::vector<std::size_t>{4}));
}

TEST(Config, RetrainCopiesSharedSettings) {
  const PipelineConfig c = parse_config("epochs_retrain = 7\nbatch_size = 16\nseed = 3\nnormalize = 0\n");
  const TrainConfig t = c.retrain();
  EXPECT_EQ(t.epochs, 7u);
  EXPECT_EQ(t.batch_size, 16u);
  EXPECT_EQ(t.seed, 3u);
  EXPECT_FALSE(t.normalize);
  EXPECT_TRUE(t.select_best);
}

TEST(Config, ComplexModeUsesSixChannels) {
  EXPECT_EQ(parse_config("complex = 1\n").input_channels(), 6u);
  EXPECT_EQ(parse_config("channels = 9\n").input_channels(), 9u);
  EXPECT_THROW(parse_config("complex = 1\nchannels = 12\n"), ArgumentError);
  EXPECT_THROW(parse_config("channels = 6\n"), ArgumentError);
}

TEST(Config, RejectsBadInput) {
  for (const char* text : {"unknown_key = 1\n", "epochs_alpha\n", "channels = 7\n", "activation = relu\n",
                           "precision = half\n", "learning_rate = 0\n", "gamma = -1\n", "batch_size = 0\n",
                           "repeats = 0\n", "epochs_alpha = -2\n", "layer6.kernels = 1x1\n", "layer1.widths = 3\n",
                           "layer1.kernels = 3\n", "complex = yes\n"}) {
    EXPECT_THROW(parse_config(text), ArgumentError) << text;
  }
}

TEST(Config, ErrorNamesTheLine) {
  try {
    parse_config("seed = 1\n\nbogus = 2\n");
    FAIL() << "expected an error";
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("dasnas-cli-") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    std::vector<const char*> argv{"dasnas"};
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return dispatch(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  int generate() {
    return run({"gen", "--classes", "3", "--height", "32", "--width", "32", "--region", "8", "--seed", "4", "--out",
                path("scene.pct"), "--labels", path("scene.plb")});
  }

  static constexpr const char* kQuickConfig =
      "epochs_alpha = 1\nepochs_beta = 1\nepochs_retrain = 2\nselect_epochs = 1\nrepeats = 1\n"
      "per_class_train = 20\nper_class_val = 10\nbatch_size = 16\nlearning_rate = 1e-3\n";

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(Cli, Version) {
  EXPECT_EQ(run({"version"}), 0);
  EXPECT_EQ(out_.str(), std::string("dasnas ") + kVersion + "\n");
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({"gen", "--out", path("a.pct")}), 1);
  EXPECT_EQ(run({"gen", "--out", path("a.pct"), "--labels", path("a.plb"), "--height", "0"}), 1);
  EXPECT_EQ(run({"eval", "--model", "m", "--image", "i", "--labels", "l", "--split", "everything"}), 1);
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(Cli, HelpExitsZero) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("search"), std::string::npos);
}

TEST_F(Cli, GenWritesSceneFiles) {
  ASSERT_EQ(generate(), 0) << err_.str();
  const CoherencyImage image = read_pct(path("scene.pct"));
  const LabelMap labels = read_plb(path("scene.plb"));
  EXPECT_EQ(image.height, 32u);
  EXPECT_EQ(image.width, 32u);
  EXPECT_EQ(labels.height, 32u);
  EXPECT_EQ(labels.width, 32u);
}

TEST_F(Cli, MissingInputIsDataError) {
  EXPECT_EQ(run({"search", "--image", path("none.pct"), "--labels", path("none.plb"), "--out", path("a.arch")}), 2);
  EXPECT_NE(err_.str().find("none.pct"), std::string::npos) << err_.str();
}

TEST_F(Cli, BadConfigIsUsageError) {
  ASSERT_EQ(generate(), 0);
  write("bad.cfg", "mystery = 1\n");
  EXPECT_EQ(run({"search", "--config", path("bad.cfg"), "--image", path("scene.pct"), "--labels", path("scene.plb"),
                 "--out", path("a.arch")}),
            1);
}

TEST_F(Cli, CorruptModelIsDataError) {
  ASSERT_EQ(generate(), 0);
  write("broken.dasm", "not a model");
  EXPECT_EQ(run({"eval", "--model", path("broken.dasm"), "--image", path("scene.pct"), "--labels", path("scene.plb")}),
            2);
  EXPECT_EQ(run({"map", "--model", path("broken.dasm"), "--image", path("scene.pct"), "--out", path("m.plb")}), 2);
}

TEST_F(Cli, SearchTrainEvalMap) {
  ASSERT_EQ(generate(), 0);
  write("quick.cfg", kQuickConfig);
  const std::vector<std::string> scene{"--image", path("scene.pct"), "--labels", path("scene.plb")};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), scene.begin(), scene.end());
    return args;
  };
  ASSERT_EQ(run(with({"search", "--config", path("quick.cfg"), "--out", path("a.arch"), "--log", path("search.log")})),
            0)
      << err_.str();
  const DerivedArchitecture arch = DerivedArchitecture::parse(cli::read_text(path("a.arch")));
  EXPECT_TRUE(arch.member_of(SearchSpaceSpec::default_space(3)));
  EXPECT_NE(cli::read_text(path("search.log")).find("best run=0"), std::string::npos);

  ASSERT_EQ(run(with({"train", "--config", path("quick.cfg"), "--arch", path("a.arch"), "--out", path("m.dasm")})), 0)
      << err_.str();
  EXPECT_EQ(read_model(path("m.dasm")).architecture(), arch);

  ASSERT_EQ(run(with({"eval", "--config", path("quick.cfg"), "--model", path("m.dasm"), "--split", "all"})), 0)
      << err_.str();
  EXPECT_EQ(out_.str().rfind("OA=", 0), 0u) << out_.str();
  EXPECT_NE(out_.str().find("class3="), std::string::npos);

  ASSERT_EQ(run({"map", "--model", path("m.dasm"), "--image", path("scene.pct"), "--out", path("map.plb")}), 0)
      << err_.str();
  const LabelMap map = read_plb(path("map.plb"));
  EXPECT_EQ(map.height, 32u);
  EXPECT_EQ(map.width, 32u);
}

TEST_F(Cli, SearchIsReproducible) {
  ASSERT_EQ(generate(), 0);
  write("quick.cfg", kQuickConfig);
  for (const char* out : {"a.arch", "b.arch"}) {
    ASSERT_EQ(run({"search", "--config", path("quick.cfg"), "--image", path("scene.pct"), "--labels",
                   path("scene.plb"), "--out", path(out), "--log", path("search.log")}),
              0);
  }
  EXPECT_EQ(cli::read_text(path("a.arch")), cli::read_text(path("b.arch")));
}

TEST_F(Cli, DivergenceExitsThree) {
  ASSERT_EQ(generate(), 0);
  write("wild.cfg", std::string(kQuickConfig) + "learning_rate = 1e300\n");
  EXPECT_EQ(run({"search", "--config", path("wild.cfg"), "--image", path("scene.pct"), "--labels", path("scene.plb"),
                 "--out", path("a.arch"), "--log", path("search.log")}),
            3);
  EXPECT_NE(err_.str().find("diverged"), std::string::npos) << err_.str();
}

TEST_F(Cli, TrainRejectsClassCountMismatch) {
  ASSERT_EQ(generate(), 0);
  write("quick.cfg", kQuickConfig);
  DerivedArchitecture arch;
  arch.kernels = {{3, 3}, {3, 3}, {3, 3}, {1, 1}, {1, 1}};
  arch.depths = {8, 8, 8, 128, 4};
  arch.class_count = 4;
  write("four.arch", arch.to_text());
  EXPECT_EQ(run({"train", "--config", path("quick.cfg"), "--arch", path("four.arch"), "--image", path("scene.pct"),
                 "--labels", path("scene.plb"), "--out", path("m.dasm")}),
            2);
}

}  // namespace
}  // namespace dasnas
