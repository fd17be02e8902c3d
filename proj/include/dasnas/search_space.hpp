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

// The per-layer hyperparameter search space over the fixed five-layer
// topology, and the kernel transforms that let every candidate share one
// convolution: spatial zero-padding to the layer maxima and soft masking of
// input channels.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dasnas/errors.hpp"
#include "dasnas/ops.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

/// Trainable layers of the topology: conv1, conv2, conv3, fc1, fc2.
inline constexpr std::size_t kLayerCount = 5;
inline constexpr std::size_t kConvLayerCount = 3;

struct KernelSize {
  std::size_t h = 1;
  std::size_t w = 1;
  friend auto operator<=>(const KernelSize&, const KernelSize&) = default;
};

inline std::string to_string(KernelSize k) { return std::to_string(k.h) + "x" + std::to_string(k.w); }

/// Parses "HxW".
inline KernelSize parse_kernel_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw ArgumentError("");
    std::size_t used_h = 0, used_w = 0;
    const auto h = std::stoul(text.substr(0, x), &used_h);
    const auto w = std::stoul(text.substr(x + 1), &used_w);
    if (used_h != x || used_w != text.size() - x - 1 || h == 0 || w == 0) throw ArgumentError("");
    return {h, w};
  } catch (const std::exception&) {
    throw ArgumentError("malformed kernel size '" + text + "', expected HxW");
  }
}

struct LayerCandidates {
  std::vector<KernelSize> kernel_sizes;
  std::vector<std::size_t> depths;
  std::size_t h_max = 1;
  std::size_t w_max = 1;
  std::size_t c_max = 1;

  /// Candidate lists with maxima taken from the lists themselves.
  static LayerCandidates from_lists(std::vector<KernelSize> kernels, std::vector<std::size_t> depths) {
    LayerCandidates layer{std::move(kernels), std::move(depths), 0, 0, 0};
    for (auto k : layer.kernel_sizes) {
      layer.h_max = std::max(layer.h_max, k.h);
      layer.w_max = std::max(layer.w_max, k.w);
    }
    for (auto d : layer.depths) layer.c_max = std::max(layer.c_max, d);
    layer.validate();
    return layer;
  }

  void validate() const {
    if (kernel_sizes.empty() || depths.empty()) throw ArgumentError("layer candidate lists must be non-empty");
    for (std::size_t i = 0; i < kernel_sizes.size(); ++i) {
      const auto k = kernel_sizes[i];
      if (k.h == 0 || k.w == 0 || k.h > h_max || k.w > w_max) {
        throw ArgumentError("kernel candidate " + to_string(k) + " outside maxima " + std::to_string(h_max) + "x" +
                            std::to_string(w_max));
      }
      for (std::size_t j = 0; j < i; ++j)
        if (kernel_sizes[j] == k) throw ArgumentError("duplicate kernel candidate " + to_string(k));
    }
    for (std::size_t i = 0; i < depths.size(); ++i) {
      if (depths[i] == 0 || depths[i] > c_max) {
        throw ArgumentError("depth candidate " + std::to_string(depths[i]) + " outside (0, " +
                            std::to_string(c_max) + "]");
      }
      for (std::size_t j = 0; j < i; ++j)
        if (depths[j] == depths[i]) throw ArgumentError("duplicate depth candidate " + std::to_string(depths[i]));
    }
  }
};

struct SearchSpaceSpec {
  std::vector<LayerCandidates> layers;
  std::size_t class_count = 0;

  void validate() const {
    if (layers.size() != kLayerCount) {
      throw ArgumentError("search space needs exactly " + std::to_string(kLayerCount) + " layers, got " +
                          std::to_string(layers.size()));
    }
    if (class_count < 2) throw ArgumentError("search space needs at least 2 classes");
    for (const auto& layer : layers) layer.validate();
    for (std::size_t l = kConvLayerCount; l < kLayerCount; ++l) {
      if (layers[l].kernel_sizes != std::vector<KernelSize>{{1, 1}}) {
        throw ArgumentError("fully connected layer " + std::to_string(l + 1) + " must use the single kernel 1x1");
      }
    }
    if (layers.back().depths != std::vector<std::size_t>{class_count}) {
      throw ArgumentError("output layer depth must be the class count " + std::to_string(class_count));
    }
  }

  /// Conv1–2: {1,2,3,5}² kernels; conv3: {1,2,3}²; conv depths {8,16,32,64};
  /// fc1 depths {128,256,512,1024}; fc2 fixed to the class count.
  static SearchSpaceSpec default_space(std::size_t class_count) {
    auto grid = [](std::initializer_list<std::size_t> sizes) {
      std::vector<KernelSize> out;
      for (auto h : sizes)
        for (auto w : sizes) out.push_back({h, w});
      return out;
    };
    const std::vector<std::size_t> conv_depths{8, 16, 32, 64};
    SearchSpaceSpec spec;
    spec.class_count = class_count;
    spec.layers.push_back(LayerCandidates::from_lists(grid({1, 2, 3, 5}), conv_depths));
    spec.layers.push_back(LayerCandidates::from_lists(grid({1, 2, 3, 5}), conv_depths));
    spec.layers.push_back(LayerCandidates::from_lists(grid({1, 2, 3}), conv_depths));
    spec.layers.push_back(LayerCandidates::from_lists({{1, 1}}, {128, 256, 512, 1024}));
    spec.layers.push_back(LayerCandidates::from_lists({{1, 1}}, {class_count}));
    spec.validate();
    return spec;
  }
};

/// Number of distinct architectures: Π_l |kernel_sizes_l| · |depths_l|.
inline std::uint64_t total_architectures(const SearchSpaceSpec& spec) {
  std::uint64_t total = 1;
  for (const auto& layer : spec.layers) total *= layer.kernel_sizes.size() * layer.depths.size();
  return total;
}

/// Zero-pads kernel [Cout, Cin, h, w] to [Cout, Cin, h_max, w_max], placing it
/// so that 'same' convolution with the result equals convolution with the
/// original. When the size difference is odd the extra zero row/column lands
/// on the bottom/right.
inline Tensor pad_kernel_spatial(const Tensor& kernel, std::size_t h_max, std::size_t w_max) {
  detail::require_rank(kernel, 4, "pad_kernel_spatial");
  const std::size_t co = kernel.dim(0), ci = kernel.dim(1), h = kernel.dim(2), w = kernel.dim(3);
  if (h > h_max || w > w_max) {
    throw ArgumentError("pad_kernel_spatial: kernel " + std::to_string(h) + "x" + std::to_string(w) +
                        " exceeds maxima " + std::to_string(h_max) + "x" + std::to_string(w_max));
  }
  if (h == h_max && w == w_max) return kernel;
  const std::size_t top = same_padding_before(h_max) - same_padding_before(h);
  const std::size_t left = same_padding_before(w_max) - same_padding_before(w);
  const std::size_t planes = co * ci;
  std::vector<double> out(planes * h_max * w_max, 0.0);
  const auto kv = kernel.values();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t u = 0; u < h; ++u)
      for (std::size_t v = 0; v < w; ++v) out[(p * h_max + top + u) * w_max + left + v] = kv[(p * h + u) * w + v];
  return detail::finish(Tensor(Shape{co, ci, h_max, w_max}, std::move(out)), {&kernel},
                        [=](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          for (std::size_t p = 0; p < planes; ++p)
                            for (std::size_t u = 0; u < h; ++u)
                              for (std::size_t v = 0; v < w; ++v)
                                in[0][(p * h + u) * w + v] += g[(p * h_max + top + u) * w_max + left + v];
                        });
}

/// mask[c] = Σ_j weights[j] · [c < depths[j]]: the soft gate over input
/// channels that realizes a mixture of output depths of the previous layer.
inline Tensor channel_mask(std::span<const std::size_t> depths, const Tensor& weights, std::size_t c_max) {
  if (depths.size() != weights.size()) {
    throw ArgumentError("channel_mask: " + std::to_string(depths.size()) + " depths but " +
                        std::to_string(weights.size()) + " weights");
  }
  for (auto d : depths)
    if (d == 0 || d > c_max) throw ArgumentError("channel_mask: depth " + std::to_string(d) + " outside (0, c_max]");
  std::vector<double> mask(c_max, 0.0);
  for (std::size_t j = 0; j < depths.size(); ++j)
    for (std::size_t c = 0; c < depths[j]; ++c) mask[c] += weights[j];
  std::vector<std::size_t> saved(depths.begin(), depths.end());
  return detail::finish(Tensor(Shape{c_max}, std::move(mask)), {&weights},
                        [saved = std::move(saved)](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          for (std::size_t j = 0; j < saved.size(); ++j) {
                            double total = 0.0;
                            for (std::size_t c = 0; c < saved[j]; ++c) total += g[c];
                            in[0][j] += total;
                          }
                        });
}

namespace detail {

inline void require_simplex(const Tensor& weights, const char* op) {
  double total = 0.0;
  for (double w : weights.values()) {
    if (!(w >= 0.0)) throw ArgumentError(std::string(op) + ": mixing weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ArgumentError(std::string(op) + ": mixing weights must sum to 1, got " + std::to_string(total));
  }
}

}  // namespace detail

/// Σ_i weights[i] · pad_kernel_spatial(banks[i]): one effective kernel so a
/// mixed layer costs a single convolution.
inline Tensor mixed_kernel(std::span<const Tensor> banks, const Tensor& weights, std::size_t h_max,
                           std::size_t w_max) {
  if (banks.size() != weights.size()) {
    throw ArgumentError("mixed_kernel: " + std::to_string(banks.size()) + " banks but " +
                        std::to_string(weights.size()) + " weights");
  }
  detail::require_simplex(weights, "mixed_kernel");
  std::vector<Tensor> padded;
  padded.reserve(banks.size());
  for (const auto& bank : banks) padded.push_back(pad_kernel_spatial(bank, h_max, w_max));
  return weighted_sum(padded, weights);
}

/// Mixed layer along the fast path: one convolution with the α-mixed padded
/// kernel whose input channels are gated by the β-mixed channel mask.
inline Tensor mixed_forward(const Tensor& x, std::span<const Tensor> banks, const Tensor& alpha_weights,
                            const Tensor& beta_weights, std::span<const std::size_t> depths, std::size_t h_max,
                            std::size_t w_max) {
  detail::require_simplex(beta_weights, "mixed_forward");
  const Tensor kernel = mixed_kernel(banks, alpha_weights, h_max, w_max);
  const Tensor mask = channel_mask(depths, beta_weights, kernel.dim(1));
  return conv2d_same(x, scale_axis(kernel, mask, 1));
}

/// Reference double sum Σ_{i,j} α_i β_j conv(x, T_j(pad(W_ij))), computing all
/// n·m convolutions; T_j zeroes the input channels at or beyond depths[j].
/// `banks[i][j]` holds the kernel for kernel candidate i and depth candidate j.
inline Tensor mixed_forward_reference(const Tensor& x, const std::vector<std::vector<Tensor>>& banks,
                                      const Tensor& alpha_weights, const Tensor& beta_weights,
                                      std::span<const std::size_t> depths, std::size_t h_max, std::size_t w_max) {
  const std::size_t n = alpha_weights.size(), m = beta_weights.size();
  if (banks.size() != n) throw ArgumentError("mixed_forward_reference: bank grid rows != kernel candidates");
  if (depths.size() != m) throw ArgumentError("mixed_forward_reference: depth list != depth weights");
  std::vector<Tensor> terms;
  std::vector<double> coeff;
  for (std::size_t i = 0; i < n; ++i) {
    if (banks[i].size() != m) throw ArgumentError("mixed_forward_reference: missing bank in row " + std::to_string(i));
    for (std::size_t j = 0; j < m; ++j) {
      const Tensor padded = pad_kernel_spatial(banks[i][j].detach(), h_max, w_max);
      std::vector<double> hard(m, 0.0);
      hard[j] = 1.0;
      const Tensor mask = channel_mask(depths, Tensor(Shape{m}, std::move(hard)), padded.dim(1));
      terms.push_back(conv2d_same(x.detach(), scale_axis(padded, mask, 1)));
      coeff.push_back(alpha_weights[i] * beta_weights[j]);
    }
  }
  const std::size_t count = coeff.size();
  return weighted_sum(terms, Tensor(Shape{count}, std::move(coeff)));
}

}  // namespace dasnas
