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

#pragma once

// Command-line front end: gen | search | train | eval | map | version.
// Exit status 0 success, 1 usage error, 2 data or format error, 3 numeric
// divergence.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>

#include "dasnas/architecture.hpp"
#include "dasnas/config.hpp"
#include "dasnas/das_search.hpp"
#include "dasnas/errors.hpp"
#include "dasnas/metrics.hpp"
#include "dasnas/model.hpp"
#include "dasnas/polsar.hpp"

namespace dasnas {

inline constexpr const char* kVersion = "0.1.0";

namespace cli {

enum Exit : int { ok = 0, usage = 1, data = 2, divergence = 3 };

/// Marks failures caused by input files or their content.
class DataError : public Error {
 public:
  using Error::Error;
};

template <class F>
auto load(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(e.what());
  }
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DataError("cannot write '" + path + "'");
}

inline PipelineConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  PipelineConfig config = path.empty() ? PipelineConfig{} : parse_config(read_text(path));
  if (seed) config.search.seed = *seed;
  return config;
}

/// Patches of every labeled pixel in the requested input layout, split into
/// train / validation / rest-as-test.
inline PatchDataset prepare_dataset(const std::string& image_path, const std::string& labels_path,
                                    std::size_t channels, const PipelineConfig& config) {
  return load([&] {
    const CoherencyImage image = read_pct(image_path);
    const LabelMap labels = read_plb(labels_path);
    PatchDataset data = to_input_layout(extract_patches(image, labels), channels);
    split_dataset(data, config.per_class_train, config.per_class_val, std::nullopt, config.search.seed);
    return data;
  });
}

struct Options {
  std::string config, image, labels, out, arch, model, split = "test", log;
  std::optional<std::uint64_t> seed;
  std::size_t classes = 5, height = 128, width = 128, looks = 8, region = 32;
};

inline int run_gen(const Options& o, std::ostream& out) {
  const auto covs = default_class_covariances(o.classes);
  const auto [image, labels] = synth_generate(covs, o.height, o.width, o.looks, o.region, o.seed.value_or(0));
  load([&] {
    write_pct(o.out, image);
    write_plb(o.labels, labels);
    return 0;
  });
  out << "wrote " << o.out << " and " << o.labels << " (" << o.height << "x" << o.width << ", " << o.classes
      << " classes)\n";
  return ok;
}

inline int run_search(const Options& o, std::ostream& out, std::ostream& err) {
  PipelineConfig config = load_config(o.config, o.seed);
  const PatchDataset data = prepare_dataset(o.image, o.labels, config.input_channels(), config);
  const SearchSpaceSpec spec = config.search_space(data.class_count);
  std::ofstream log_file;
  if (!o.log.empty()) {
    log_file.open(o.log);
    if (!log_file) throw DataError("cannot write '" + o.log + "'");
  }
  config.search.log = o.log.empty() ? &err : &log_file;
  const RepeatResult result = repeat_search(spec, data, config.search, config.repeats);
  load([&] {
    write_text(o.out, result.best.to_text());
    return 0;
  });
  out << "architecture " << result.best.summary() << " (run " << result.best_index << ", validation OA "
      << result.runs[result.best_index].validation_oa << ")\n";
  return ok;
}

inline int run_train(const Options& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = load_config(o.config, o.seed);
  const DerivedArchitecture arch = load([&] { return DerivedArchitecture::parse(read_text(o.arch)); });
  const std::size_t channels = arch.complex_mode ? kCoherencyChannels : config.channels;
  const PatchDataset data = prepare_dataset(o.image, o.labels, channels, config);
  if (arch.class_count != data.class_count) {
    throw DataError("architecture has " + std::to_string(arch.class_count) + " classes, labels have " +
                    std::to_string(data.class_count));
  }
  Model model = Model::build(arch, channels, config.search.seed, data.patch_size);
  TrainConfig tc = config.retrain();
  tc.log = &err;
  const TrainHistory history = train(model, data, tc);
  load([&] {
    write_model(o.out, model);
    return 0;
  });
  out << "trained " << arch.summary() << ", " << model.parameter_count() << " parameters";
  if (history.best_epoch) out << ", best validation OA " << history.best_validation_oa << " at epoch " << *history.best_epoch;
  out << '\n';
  return ok;
}

inline int run_eval(const Options& o, std::ostream& out) {
  const PipelineConfig config = load_config(o.config, o.seed);
  const Model model = load([&] { return read_model(o.model); });
  PatchDataset data = prepare_dataset(o.image, o.labels, model.complex_mode() ? kCoherencyChannels : model.input_channels(), config);
  Split split = Split::test;
  if (o.split == "train") split = Split::train;
  else if (o.split == "validation") split = Split::validation;
  else if (o.split == "all") data.splits.assign(data.count, Split::test);
  const Evaluation e = load([&] { return evaluate(model, data, split); });
  out << format_report(e.metrics);
  return ok;
}

inline int run_map(const Options& o, std::ostream& out) {
  const Model model = load([&] { return read_model(o.model); });
  const CoherencyImage image = load([&] { return read_pct(o.image); });
  const LabelMap labels = load([&] { return classify_map(model, image); });
  load([&] {
    write_plb(o.out, labels);
    return 0;
  });
  out << "wrote " << o.out << " (" << labels.height << "x" << labels.width << ")\n";
  return ok;
}

}  // namespace cli

/// Parses `argv` and runs the selected command.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Differentiable architecture search for PolSAR patch classification", "dasnas"};
  app.require_subcommand(1, 1);
  Options o;

  auto seed_flag = [&](CLI::App* c) { c->add_option("--seed", o.seed, "seed for every random choice"); };

  auto* gen = app.add_subcommand("gen", "generate a synthetic complex-Wishart scene");
  gen->add_option("--classes", o.classes)->check(CLI::Range(2, 65535));
  gen->add_option("--height", o.height)->check(CLI::PositiveNumber);
  gen->add_option("--width", o.width)->check(CLI::PositiveNumber);
  gen->add_option("--looks", o.looks)->check(CLI::PositiveNumber);
  gen->add_option("--region", o.region)->check(CLI::PositiveNumber);
  gen->add_option("--out", o.out, "coherency image (.pct)")->required();
  gen->add_option("--labels", o.labels, "label map (.plb)")->required();
  seed_flag(gen);

  auto* search = app.add_subcommand("search", "search an architecture");
  search->add_option("--config", o.config);
  search->add_option("--image", o.image)->required();
  search->add_option("--labels", o.labels)->required();
  search->add_option("--out", o.out, "architecture text file")->required();
  search->add_option("--log", o.log, "search log file (default: standard error)");
  seed_flag(search);

  auto* trn = app.add_subcommand("train", "retrain a derived architecture");
  trn->add_option("--config", o.config);
  trn->add_option("--arch", o.arch)->required();
  trn->add_option("--image", o.image)->required();
  trn->add_option("--labels", o.labels)->required();
  trn->add_option("--out", o.out, "model file")->required();
  seed_flag(trn);

  auto* ev = app.add_subcommand("eval", "report OA, AA and Kappa");
  ev->add_option("--config", o.config);
  ev->add_option("--model", o.model)->required();
  ev->add_option("--image", o.image)->required();
  ev->add_option("--labels", o.labels)->required();
  ev->add_option("--split", o.split)->check(CLI::IsMember({"train", "validation", "test", "all"}));
  seed_flag(ev);

  auto* map = app.add_subcommand("map", "classify every pixel of an image");
  map->add_option("--model", o.model)->required();
  map->add_option("--image", o.image)->required();
  map->add_option("--out", o.out, "label map (.plb)")->required();

  auto* version = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Exit::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return Exit::ok;
  } catch (const CLI::ParseError& e) {
    err << "dasnas: " << e.what() << "\n" << app.help();
    return Exit::usage;
  }

  try {
    if (version->parsed()) {
      out << "dasnas " << kVersion << '\n';
      return Exit::ok;
    }
    if (gen->parsed()) return run_gen(o, out);
    if (search->parsed()) return run_search(o, out, err);
    if (trn->parsed()) return run_train(o, out, err);
    if (ev->parsed()) return run_eval(o, out);
    if (map->parsed()) return run_map(o, out);
  } catch (const DivergenceError& e) {
    err << "dasnas: diverged: " << e.what() << '\n';
    return Exit::divergence;
  } catch (const DataError& e) {
    err << "dasnas: " << e.what() << '\n';
    return Exit::data;
  } catch (const FormatError& e) {
    err << "dasnas: " << e.what() << '\n';
    return Exit::data;
  } catch (const Error& e) {
    err << "dasnas: " << e.what() << '\n';
    return Exit::usage;
  }
  return Exit::usage;
}

}  // namespace dasnas
