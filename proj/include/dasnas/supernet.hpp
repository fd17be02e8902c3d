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

// Weight-sharing network used during search. In the kernel-size phase every
// layer owns one weight bank per kernel candidate and the banks are mixed
// into a single effective kernel. In the depth phase each layer owns one bank
// of the already chosen size, and depth candidates act as input-channel masks
// of the following layer. Every layer physically emits its maximum depth.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dasnas/batch.hpp"
#include "dasnas/complex.hpp"
#include "dasnas/errors.hpp"
#include "dasnas/network.hpp"
#include "dasnas/random.hpp"
#include "dasnas/search_space.hpp"
#include "dasnas/sparsemax.hpp"

namespace dasnas {

enum class Phase { alpha, beta };

enum class Mixing { sparsemax, softmax };

inline const char* to_string(Phase p) { return p == Phase::alpha ? "a" : "b"; }
inline const char* to_string(Mixing m) { return m == Mixing::sparsemax ? "sparsemax" : "softmax"; }

inline Tensor mixing_weights(const Tensor& raw, Mixing mixing) {
  return mixing == Mixing::sparsemax ? sparsemax(raw) : softmax(raw);
}

inline std::vector<double> mixing_weights(std::span<const double> raw, Mixing mixing) {
  return mixing == Mixing::sparsemax ? sparsemax_forward(raw) : softmax_forward(raw);
}

class Supernet {
 public:
  /// `chosen_kernels` holds one kernel-candidate index per layer and is
  /// required for the depth phase only.
  Supernet(SearchSpaceSpec spec, Phase phase, std::size_t input_channels, bool complex_mode,
           std::vector<std::size_t> chosen_kernels, std::uint64_t seed, std::size_t patch_size = 15)
      : spec_(std::move(spec)),
        phase_(phase),
        complex_(complex_mode),
        input_channels_(input_channels),
        patch_size_(patch_size),
        chosen_(std::move(chosen_kernels)) {
    spec_.validate();
    if (input_channels_ == 0) throw ArgumentError("supernet needs at least one input channel");
    if (pooled_extent(patch_size_) == 0) throw ArgumentError("patch size too small for two pooling layers");
    if (phase_ == Phase::beta) {
      if (chosen_.size() != kLayerCount) throw ArgumentError("depth phase needs a chosen kernel per layer");
      for (std::size_t l = 0; l < kLayerCount; ++l) {
        if (chosen_[l] >= spec_.layers[l].kernel_sizes.size()) {
          throw ArgumentError("chosen kernel index out of range in layer " + std::to_string(l + 1));
        }
      }
    }
    Rng rng(seed);
    banks_.resize(kLayerCount);
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      const auto& layer = spec_.layers[l];
      auto add = [&](KernelSize k) {
        banks_[l].push_back(add_kernel(params_, complex_, {layer.c_max, layer_input_width(l), k.h, k.w}, rng));
      };
      if (phase_ == Phase::alpha) {
        for (auto k : layer.kernel_sizes) add(k);
      } else {
        add(layer.kernel_sizes[chosen_[l]]);
      }
      biases_.push_back(add_bias(params_, complex_, layer.c_max));
    }
  }

  Phase phase() const noexcept { return phase_; }
  bool complex_mode() const noexcept { return complex_; }
  const SearchSpaceSpec& spec() const noexcept { return spec_; }

  std::vector<Tensor>& parameters() noexcept { return params_; }
  const std::vector<Tensor>& parameters() const noexcept { return params_; }

  /// Trainable weight banks of `layer` (n in the kernel phase, 1 in the depth phase).
  std::size_t weight_bank_count(std::size_t layer) const { return banks_.at(layer).size(); }

  /// Parameter-free depth masks that gate the outputs of `layer`.
  std::size_t mask_view_count(std::size_t layer) const {
    return layer + 1 < kLayerCount ? spec_.layers.at(layer).depths.size() : 0;
  }

  /// Slot of bank `index` of `layer` in parameters(); complex banks occupy
  /// two consecutive slots (real, imaginary).
  std::size_t bank_slot(std::size_t layer, std::size_t index) const { return banks_.at(layer).at(index); }
  std::size_t bias_slot(std::size_t layer) const { return biases_.at(layer); }

  /// Input width of `layer` as allocated (maximum depth of the previous
  /// layer, times the pooled grid for the first fully connected layer).
  std::size_t layer_input_width(std::size_t layer) const {
    if (layer == 0) return input_channels_;
    const std::size_t previous = spec_.layers[layer - 1].c_max;
    return layer == kConvLayerCount ? previous * grid() : previous;
  }

  /// Class scores [N, K]. `alpha_weights` and `beta_weights` hold one simplex
  /// vector per layer; `alpha_weights` is ignored in the depth phase.
  Tensor scores(const Batch& batch, std::span<const Tensor> params, std::span<const Tensor> alpha_weights,
                std::span<const Tensor> beta_weights) const {
    if (params.size() != params_.size()) throw DimensionError("supernet parameter count mismatch");
    if (beta_weights.size() != kLayerCount || (phase_ == Phase::alpha && alpha_weights.size() != kLayerCount)) {
      throw DimensionError("supernet needs one mixing vector per layer");
    }
    if (batch.re.dim(1) != input_channels_ || batch.is_complex() != complex_) {
      throw ArgumentError("batch layout does not match the supernet input");
    }
    std::vector<Tensor> masks;
    for (std::size_t l = 0; l + 1 < kLayerCount; ++l) masks.push_back(depth_mask(l, beta_weights[l]));
    if (complex_) return run<ComplexTensor>(batch, params, alpha_weights, masks);
    return run<Tensor>(batch, params, alpha_weights, masks);
  }

 private:
  std::size_t grid() const { return pooled_extent(patch_size_) * pooled_extent(patch_size_); }

  Tensor depth_mask(std::size_t layer, const Tensor& weights) const {
    const auto& c = spec_.layers[layer];
    if (layer + 1 != kConvLayerCount) return channel_mask(c.depths, weights, c.c_max);
    std::vector<std::size_t> expanded;
    for (auto d : c.depths) expanded.push_back(d * grid());
    return channel_mask(expanded, weights, c.c_max * grid());
  }

  template <class Field>
  Tensor run(const Batch& batch, std::span<const Tensor> params, std::span<const Tensor> alpha_weights,
             const std::vector<Tensor>& masks) const {
    return topology_forward(batch_input<Field>(batch), [&](std::size_t l) {
      const auto& layer = spec_.layers[l];
      Field kernel;
      if (phase_ == Phase::alpha) {
        std::vector<Field> banks;
        for (auto slot : banks_[l]) banks.push_back(load_weight<Field>(params, slot));
        kernel = mix_banks(std::span<const Field>(banks), alpha_weights[l], layer.h_max, layer.w_max);
      } else {
        kernel = load_weight<Field>(params, banks_[l].front());
      }
      if (l > 0) kernel = mask_input_channels(kernel, masks[l - 1]);
      return std::pair{kernel, load_weight<Field>(params, biases_[l])};
    });
  }

  SearchSpaceSpec spec_;
  Phase phase_;
  bool complex_;
  std::size_t input_channels_;
  std::size_t patch_size_;
  std::vector<std::size_t> chosen_;
  std::vector<Tensor> params_;
  std::vector<std::vector<std::size_t>> banks_;
  std::vector<std::size_t> biases_;
};

}  // namespace dasnas
