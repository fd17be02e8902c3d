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

#include <algorithm>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "dasnas/errors.hpp"
#include "dasnas/search_space.hpp"

namespace dasnas {

/// One concrete kernel size and depth per trainable layer.
struct DerivedArchitecture {
  std::vector<KernelSize> kernels;
  std::vector<std::size_t> depths;
  std::size_t class_count = 0;
  bool complex_mode = false;

  void validate() const {
    if (kernels.size() != kLayerCount || depths.size() != kLayerCount) {
      throw ArgumentError("architecture needs " + std::to_string(kLayerCount) + " layers");
    }
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      if (kernels[l].h == 0 || kernels[l].w == 0 || depths[l] == 0) {
        throw ArgumentError("layer " + std::to_string(l + 1) + " has an empty kernel or depth");
      }
    }
    for (std::size_t l = kConvLayerCount; l < kLayerCount; ++l) {
      if (kernels[l] != KernelSize{1, 1}) {
        throw ArgumentError("fully connected layer " + std::to_string(l + 1) + " must use a 1x1 kernel");
      }
    }
    if (depths.back() != class_count) throw ArgumentError("output layer depth must equal the class count");
  }

  /// True when every choice appears in the space's candidate lists.
  bool member_of(const SearchSpaceSpec& spec) const {
    if (spec.layers.size() != kernels.size() || class_count != spec.class_count) return false;
    for (std::size_t l = 0; l < kernels.size(); ++l) {
      const auto& layer = spec.layers[l];
      if (std::find(layer.kernel_sizes.begin(), layer.kernel_sizes.end(), kernels[l]) == layer.kernel_sizes.end())
        return false;
      if (std::find(layer.depths.begin(), layer.depths.end(), depths[l]) == layer.depths.end()) return false;
    }
    return true;
  }

  /// `layer<i>.kernel=<h>x<w>` and `layer<i>.depth=<c>` per layer, then
  /// `classes=<K>` and `complex=<0|1>`.
  std::string to_text() const {
    std::string out;
    for (std::size_t l = 0; l < kernels.size(); ++l) {
      const std::string prefix = "layer" + std::to_string(l + 1);
      out += prefix + ".kernel=" + to_string(kernels[l]) + "\n";
      out += prefix + ".depth=" + std::to_string(depths[l]) + "\n";
    }
    out += "classes=" + std::to_string(class_count) + "\n";
    out += "complex=" + std::string(complex_mode ? "1" : "0") + "\n";
    return out;
  }

  /// One-line form for logs, e.g. `5x5/64 2x1/32 3x3/16 1x1/256 1x1/5`.
  std::string summary() const {
    std::string out;
    for (std::size_t l = 0; l < kernels.size(); ++l) {
      if (l) out += ' ';
      out += to_string(kernels[l]) + "/" + std::to_string(depths[l]);
    }
    return out;
  }

  static DerivedArchitecture parse(const std::string& text) {
    DerivedArchitecture arch;
    arch.kernels.assign(kLayerCount, {0, 0});
    arch.depths.assign(kLayerCount, 0);
    std::vector<bool> seen_kernel(kLayerCount, false), seen_depth(kLayerCount, false);
    bool seen_classes = false, seen_complex = false;
    std::size_t offset = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const std::size_t line_offset = offset;
      offset += line.size() + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("architecture line without '='", line_offset);
      const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      try {
        if (key == "classes") {
          arch.class_count = std::stoul(value);
          seen_classes = true;
        } else if (key == "complex") {
          if (value != "0" && value != "1") throw ArgumentError("complex must be 0 or 1");
          arch.complex_mode = value == "1";
          seen_complex = true;
        } else if (key.rfind("layer", 0) == 0 && key.find('.') != std::string::npos) {
          const auto dot = key.find('.');
          const std::size_t index = std::stoul(key.substr(5, dot - 5));
          const std::string field = key.substr(dot + 1);
          if (index < 1 || index > kLayerCount) throw ArgumentError("layer index out of range");
          if (field == "kernel") {
            arch.kernels[index - 1] = parse_kernel_size(value);
            seen_kernel[index - 1] = true;
          } else if (field == "depth") {
            arch.depths[index - 1] = std::stoul(value);
            seen_depth[index - 1] = true;
          } else {
            throw ArgumentError("unknown layer field");
          }
        } else {
          throw ArgumentError("unknown key");
        }
      } catch (const FormatError&) {
        throw;
      } catch (const std::exception& e) {
        throw FormatError("bad architecture entry '" + line + "': " + e.what(), line_offset);
      }
    }
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      if (!seen_kernel[l] || !seen_depth[l]) {
        throw FormatError("architecture is missing layer" + std::to_string(l + 1), text.size());
      }
    }
    if (!seen_classes || !seen_complex) throw FormatError("architecture is missing classes/complex", text.size());
    try {
      arch.validate();
    } catch (const ArgumentError& e) {
      throw FormatError(e.what(), text.size());
    }
    return arch;
  }

  friend bool operator==(const DerivedArchitecture&, const DerivedArchitecture&) = default;
};

}  // namespace dasnas
