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

// The fixed five-layer topology shared by the search supernet and derived
// models, written once for real (Tensor) and complex (ComplexTensor) fields:
//   conv1 → pool → conv2 → pool → conv3 → flatten → fc1 → fc2
// with an activation after every layer but the last. Fully connected layers
// are 1×1 convolutions over a 1×1 grid.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dasnas/batch.hpp"
#include "dasnas/complex.hpp"
#include "dasnas/init.hpp"
#include "dasnas/ops.hpp"
#include "dasnas/search_space.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

/// Spatial extent after the two pooling layers (15 → 7 → 3).
constexpr std::size_t pooled_extent(std::size_t patch_size) noexcept { return patch_size / 2 / 2; }

template <class Field>
inline constexpr std::size_t kParts = 1;
template <>
inline constexpr std::size_t kParts<ComplexTensor> = 2;

inline Tensor conv_layer(const Tensor& x, const Tensor& k, const Tensor& b) { return conv2d_same(x, k, b); }
inline ComplexTensor conv_layer(const ComplexTensor& x, const ComplexTensor& k, const ComplexTensor& b) {
  return cconv2d_same(x, k, b);
}

inline Tensor activate(const Tensor& x) { return relu(x); }
inline ComplexTensor activate(const ComplexTensor& x) { return crelu(x); }

inline Tensor pool(const Tensor& x) { return maxpool2x2(x); }
inline ComplexTensor pool(const ComplexTensor& x) { return cmaxpool2x2(x); }

inline Shape fc_shape(const Shape& s) { return {s[0], shape_size(s) / s[0], 1, 1}; }
inline Tensor to_fc_input(const Tensor& x) { return reshape(x, fc_shape(x.shape())); }
inline ComplexTensor to_fc_input(const ComplexTensor& x) { return reshape(x, fc_shape(x.shape())); }

/// Class scores [N, K]; complex outputs are read out by amplitude.
inline Tensor class_scores(const Tensor& x) { return reshape(x, {x.dim(0), x.dim(1)}); }
inline Tensor class_scores(const ComplexTensor& x) {
  return reshape(amplitude(x), {x.shape()[0], x.shape()[1]});
}

inline Tensor mask_input_channels(const Tensor& kernel, const Tensor& mask) { return scale_axis(kernel, mask, 1); }
inline ComplexTensor mask_input_channels(const ComplexTensor& kernel, const Tensor& mask) {
  return {scale_axis(kernel.re(), mask, 1), scale_axis(kernel.im(), mask, 1)};
}

inline Tensor mix_banks(std::span<const Tensor> banks, const Tensor& weights, std::size_t h_max, std::size_t w_max) {
  return mixed_kernel(banks, weights, h_max, w_max);
}
inline ComplexTensor mix_banks(std::span<const ComplexTensor> banks, const Tensor& weights, std::size_t h_max,
                               std::size_t w_max) {
  std::vector<Tensor> re, im;
  for (const auto& b : banks) {
    re.push_back(b.re());
    im.push_back(b.im());
  }
  return {mixed_kernel(re, weights, h_max, w_max), mixed_kernel(im, weights, h_max, w_max)};
}

/// Reads a weight stored at `slot` of a flat parameter list.
template <class Field>
Field load_weight(std::span<const Tensor> params, std::size_t slot);
template <>
inline Tensor load_weight<Tensor>(std::span<const Tensor> params, std::size_t slot) {
  return params[slot];
}
template <>
inline ComplexTensor load_weight<ComplexTensor>(std::span<const Tensor> params, std::size_t slot) {
  return {params[slot], params[slot + 1]};
}

/// Appends a Glorot-initialized kernel and returns its slot.
inline std::size_t add_kernel(std::vector<Tensor>& params, bool complex_mode, const Shape& shape, Rng& rng) {
  const std::size_t fan_in = shape[1] * shape[2] * shape[3];
  const std::size_t fan_out = shape[0] * shape[2] * shape[3];
  const std::size_t slot = params.size();
  if (complex_mode) {
    auto w = complex_glorot_uniform(shape, fan_in, fan_out, rng);
    params.push_back(w.re());
    params.push_back(w.im());
  } else {
    params.push_back(glorot_uniform(shape, fan_in, fan_out, rng));
  }
  return slot;
}

inline std::size_t add_bias(std::vector<Tensor>& params, bool complex_mode, std::size_t channels) {
  const std::size_t slot = params.size();
  params.emplace_back(Shape{channels});
  if (complex_mode) params.emplace_back(Shape{channels});
  return slot;
}

template <class Field>
Field batch_input(const Batch& batch);
template <>
inline Tensor batch_input<Tensor>(const Batch& batch) {
  return batch.re;
}
template <>
inline ComplexTensor batch_input<ComplexTensor>(const Batch& batch) {
  return {batch.re, *batch.im};
}

/// Runs the topology. `layer_weights(l)` returns the (kernel, bias) pair of
/// layer l as Field values.
template <class Field, class LayerWeights>
Tensor topology_forward(Field x, LayerWeights&& layer_weights) {
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    auto [kernel, bias] = layer_weights(l);
    x = conv_layer(x, kernel, bias);
    if (l + 1 < kLayerCount) x = activate(x);
    if (l < 2) x = pool(x);
    if (l == kConvLayerCount - 1) x = to_fc_input(x);
  }
  return class_scores(x);
}

}  // namespace dasnas
