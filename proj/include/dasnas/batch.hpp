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

// Mini-batch assembly and per-channel input standardization.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dasnas/complex.hpp"
#include "dasnas/errors.hpp"
#include "dasnas/polsar.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

/// Per-channel affine map applied to inputs: real channels become
/// (x − shift) / scale; complex channels are only divided by scale, which
/// keeps phases intact.
struct InputNormalizer {
  bool complex_mode = false;
  std::vector<double> shift;
  std::vector<double> scale;

  static InputNormalizer identity(std::size_t channels, bool complex_mode) {
    return {complex_mode, std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
  }

  /// Real: mean and standard deviation per channel. Complex: root mean
  /// square modulus per channel. Constant channels keep scale 1.
  static InputNormalizer fit(const PatchDataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ArgumentError("cannot fit input normalization on an empty split");
    InputNormalizer norm = identity(data.channels, data.is_complex);
    const std::size_t plane = data.patch_size * data.patch_size;
    const double count = static_cast<double>(indices.size() * plane);
    for (std::size_t c = 0; c < data.channels; ++c) {
      double first = 0.0, second = 0.0;
      for (auto i : indices) {
        const std::size_t base = (i * data.channels + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          const double re = data.re[base + p];
          const double im = data.is_complex ? data.im[base + p] : 0.0;
          first += re;
          second += re * re + im * im;
        }
      }
      if (data.is_complex) {
        const double rms = std::sqrt(second / count);
        norm.scale[c] = rms > 1e-12 ? rms : 1.0;
      } else {
        const double mean = first / count;
        const double var = std::max(0.0, second / count - mean * mean);
        norm.shift[c] = mean;
        norm.scale[c] = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
      }
    }
    return norm;
  }
};

struct Batch {
  Tensor re;
  std::optional<Tensor> im;
  std::vector<std::size_t> labels;

  bool is_complex() const noexcept { return im.has_value(); }
  std::size_t size() const noexcept { return labels.size(); }
};

/// Gathers `indices` into a [B, C, P, P] batch with normalization applied.
inline Batch make_batch(const PatchDataset& data, std::span<const std::size_t> indices, const InputNormalizer& norm) {
  if (indices.empty()) throw ArgumentError("make_batch: empty index list");
  if (norm.scale.size() != data.channels || norm.complex_mode != data.is_complex) {
    throw ArgumentError("input normalization does not match the dataset layout");
  }
  const std::size_t plane = data.patch_size * data.patch_size;
  const std::size_t stride = data.patch_values();
  std::vector<double> re(indices.size() * stride), im(data.is_complex ? indices.size() * stride : 0);
  std::vector<std::size_t> labels(indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    if (i >= data.count) throw ArgumentError("make_batch: sample index out of range");
    labels[b] = data.labels[i];
    for (std::size_t c = 0; c < data.channels; ++c) {
      const double shift = norm.shift[c], inv = 1.0 / norm.scale[c];
      const std::size_t src = i * stride + c * plane, dst = b * stride + c * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        re[dst + p] = (data.re[src + p] - shift) * inv;
        if (data.is_complex) im[dst + p] = data.im[src + p] * inv;
      }
    }
  }
  const Shape shape{indices.size(), data.channels, data.patch_size, data.patch_size};
  Batch batch{Tensor(shape, std::move(re)), std::nullopt, std::move(labels)};
  if (data.is_complex) batch.im = Tensor(shape, std::move(im));
  return batch;
}

}  // namespace dasnas
