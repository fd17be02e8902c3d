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

// Flat `key = value` configuration with `#` comments. Every key has a
// default; unknown keys are rejected.

#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dasnas/das_search.hpp"
#include "dasnas/errors.hpp"
#include "dasnas/model.hpp"
#include "dasnas/search_space.hpp"

namespace dasnas {

struct PipelineConfig {
  SearchConfig search;
  std::size_t epochs_retrain = 500;
  std::size_t channels = 12;
  bool channels_set = false;
  std::size_t per_class_train = 300;
  std::size_t per_class_val = 100;
  std::size_t repeats = 10;
  std::array<std::optional<std::vector<KernelSize>>, kLayerCount> layer_kernels;
  std::array<std::optional<std::vector<std::size_t>>, kLayerCount> layer_depths;

  /// Model input channels: 6 in complex mode, else `channels`.
  std::size_t input_channels() const { return search.complex_mode ? kCoherencyChannels : channels; }

  /// Default space for `class_count` with the configured list overrides.
  SearchSpaceSpec search_space(std::size_t class_count) const {
    SearchSpaceSpec spec = SearchSpaceSpec::default_space(class_count);
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      if (!layer_kernels[l] && !layer_depths[l]) continue;
      spec.layers[l] = LayerCandidates::from_lists(layer_kernels[l].value_or(spec.layers[l].kernel_sizes),
                                                   layer_depths[l].value_or(spec.layers[l].depths));
    }
    spec.validate();
    return spec;
  }

  TrainConfig retrain() const {
    return {epochs_retrain, search.batch_size, search.learning_rate, search.seed, true,
            search.normalize, nullptr, search.precision};
  }

  void validate() const {
    search.validate();
    if (search.complex_mode && channels_set && channels != kCoherencyChannels) {
      throw ArgumentError("complex=1 requires channels=6");
    }
    if (!search.complex_mode && channels != 12 && channels != 9) {
      throw ArgumentError("real mode takes channels=12 or channels=9");
    }
    if (repeats == 0) throw ArgumentError("repeats must be at least 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::size_t parse_count(const std::string& v, bool allow_zero = true) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ArgumentError("expected a non-negative integer, got '" + v + "'");
  }
  const auto n = std::stoull(v);
  if (!allow_zero && n == 0) throw ArgumentError("expected a positive integer");
  return static_cast<std::size_t>(n);
}

inline double parse_real(const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ArgumentError("expected a number, got '" + v + "'");
  return x;
}

inline bool parse_flag(const std::string& v) {
  if (v == "0") return false;
  if (v == "1") return true;
  throw ArgumentError("expected 0 or 1, got '" + v + "'");
}

}  // namespace detail

inline PipelineConfig parse_config(const std::string& text) {
  PipelineConfig c;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      using namespace detail;
      if (key == "epochs_alpha") c.search.epochs_alpha = parse_count(value);
      else if (key == "epochs_beta") c.search.epochs_beta = parse_count(value);
      else if (key == "epochs_retrain") c.epochs_retrain = parse_count(value);
      else if (key == "select_epochs") c.search.select_epochs = parse_count(value);
      else if (key == "batch_size") c.search.batch_size = parse_count(value, false);
      else if (key == "learning_rate") c.search.learning_rate = parse_real(value);
      else if (key == "gamma") c.search.gamma = parse_real(value);
      else if (key == "seed") c.search.seed = parse_count(value);
      else if (key == "complex") c.search.complex_mode = parse_flag(value);
      else if (key == "normalize") c.search.normalize = parse_flag(value);
      else if (key == "warm_start") c.search.warm_start = parse_flag(value);
      else if (key == "precision") {
        if (value == "single") c.search.precision = GemmPrecision::float32;
        else if (value == "double") c.search.precision = GemmPrecision::float64;
        else throw ArgumentError("precision must be single or double");
      }
      else if (key == "per_class_train") c.per_class_train = parse_count(value, false);
      else if (key == "per_class_val") c.per_class_val = parse_count(value, false);
      else if (key == "repeats") c.repeats = parse_count(value, false);
      else if (key == "channels") {
        c.channels = parse_count(value);
        c.channels_set = true;
        if (c.channels != 6 && c.channels != 9 && c.channels != 12) throw ArgumentError("channels must be 6, 9 or 12");
      } else if (key == "activation") {
        if (value == "sparsemax") c.search.activation = Mixing::sparsemax;
        else if (value == "softmax") c.search.activation = Mixing::softmax;
        else throw ArgumentError("activation must be sparsemax or softmax");
      } else if (key.rfind("layer", 0) == 0 && key.find('.') != std::string::npos) {
        const auto dot = key.find('.');
        const std::size_t index = parse_count(key.substr(5, dot - 5));
        const std::string field = key.substr(dot + 1);
        if (index < 1 || index > kLayerCount || (field != "kernels" && field != "depths")) {
          throw ArgumentError("unknown key '" + key + "'");
        }
        if (field == "kernels") {
          std::vector<KernelSize> list;
          for (const auto& item : split_list(value)) list.push_back(parse_kernel_size(item));
          c.layer_kernels[index - 1] = list;
        } else {
          std::vector<std::size_t> list;
          for (const auto& item : split_list(value)) list.push_back(parse_count(item, false));
          c.layer_depths[index - 1] = list;
        }
      } else {
        throw ArgumentError("unknown key '" + key + "'");
      }
    } catch (const Error& e) {
      throw ArgumentError("config line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ArgumentError("config line " + std::to_string(line_no) + ": bad value '" + value + "'");
    }
  }
  c.validate();
  return c;
}

}  // namespace dasnas
