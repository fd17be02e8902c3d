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

// Complex-valued layers built from pairs of real tensors. Every operation is
// a composition of real tape operations (or a real-valued rule over both
// parts), so the real reverse sweep differentiates them unchanged.

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "dasnas/errors.hpp"
#include "dasnas/ops.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

class ComplexTensor {
 public:
  ComplexTensor() = default;
  ComplexTensor(Tensor re, Tensor im) : re_(std::move(re)), im_(std::move(im)) {
    if (re_.shape() != im_.shape()) {
      throw DimensionError("complex parts differ in shape: " + to_string(re_.shape()) + " vs " +
                           to_string(im_.shape()));
    }
  }
  explicit ComplexTensor(const Shape& shape) : re_(shape), im_(shape) {}

  const Tensor& re() const noexcept { return re_; }
  const Tensor& im() const noexcept { return im_; }
  const Shape& shape() const noexcept { return re_.shape(); }
  std::size_t size() const noexcept { return re_.size(); }

 private:
  Tensor re_;
  Tensor im_;
};

/// Amplitude offset under the square root; keeps the gradient finite at 0.
inline constexpr double kAmplitudeEpsilon = 1e-12;

/// Complex 'same' convolution as four real convolutions:
///   re = Re W ∗ Re x − Im W ∗ Im x + Re B
///   im = Re W ∗ Im x + Im W ∗ Re x + Im B
inline ComplexTensor cconv2d_same(const ComplexTensor& x, const ComplexTensor& kernel, const ComplexTensor& bias) {
  Tensor re = sub(conv2d_same(x.re(), kernel.re(), bias.re()), conv2d_same(x.im(), kernel.im()));
  Tensor im = add(conv2d_same(x.re(), kernel.im(), bias.im()), conv2d_same(x.im(), kernel.re()));
  return {std::move(re), std::move(im)};
}

/// max(0, Re z) + j·max(0, Im z)
inline ComplexTensor crelu(const ComplexTensor& z) { return {relu(z.re()), relu(z.im())}; }

/// sqrt(re² + im² + ε) elementwise.
inline Tensor amplitude(const ComplexTensor& z) {
  const std::size_t n = z.size();
  auto amp = std::make_shared<std::vector<double>>(n);
  const auto re = z.re().values(), im = z.im().values();
  for (std::size_t i = 0; i < n; ++i) (*amp)[i] = std::sqrt(re[i] * re[i] + im[i] * im[i] + kAmplitudeEpsilon);
  const Tensor cre = z.re().detach(), cim = z.im().detach();
  return detail::finish(Tensor(z.shape(), *amp), {&z.re(), &z.im()},
                        [amp, cre, cim](std::span<const double> g, std::span<double* const> in) {
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const double s = g[i] / (*amp)[i];
                            if (in[0]) in[0][i] += s * cre[i];
                            if (in[1]) in[1][i] += s * cim[i];
                          }
                        });
}

/// 2×2 pooling that keeps, per window, the element of largest amplitude
/// (first in row-major window order on ties).
inline ComplexTensor cmaxpool2x2(const ComplexTensor& z) {
  const auto re = z.re().values(), im = z.im().values();
  auto index = detail::pool_argmax(z.shape(), [&](std::size_t i) { return re[i] * re[i] + im[i] * im[i]; });
  Shape out{z.shape()[0], z.shape()[1], z.shape()[2] / 2, z.shape()[3] / 2};
  return {detail::gather(z.re(), index, out), detail::gather(z.im(), index, out)};
}

inline ComplexTensor reshape(const ComplexTensor& z, const Shape& shape) {
  return {reshape(z.re(), shape), reshape(z.im(), shape)};
}

}  // namespace dasnas
