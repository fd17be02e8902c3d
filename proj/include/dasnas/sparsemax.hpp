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

// Sparsemax (Euclidean projection onto the probability simplex) and softmax,
// as plain vector functions and as tape-recorded operations on 1-D tensors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dasnas/errors.hpp"
#include "dasnas/ops.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

namespace detail {

inline void require_finite_nonempty(std::span<const double> z, const char* op) {
  if (z.empty()) throw ArgumentError(std::string(op) + ": empty input");
  for (double v : z) {
    if (!std::isfinite(v)) throw ArgumentError(std::string(op) + ": non-finite input");
  }
}

}  // namespace detail

/// Threshold τ(z) such that sparsemax(z)_i = max(0, z_i − τ).
/// Sorting is stable so equal scores keep their index order.
inline double sparsemax_threshold(std::span<const double> z) {
  detail::require_finite_nonempty(z, "sparsemax");
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  double cumulative = 0.0;
  double support_sum = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 1; k <= z.size(); ++k) {
    const double zk = z[order[k - 1]];
    cumulative += zk;
    if (1.0 + static_cast<double>(k) * zk > cumulative) {
      support = k;
      support_sum = cumulative;
    }
  }
  return (support_sum - 1.0) / static_cast<double>(support);
}

inline std::vector<double> sparsemax_forward(std::span<const double> z) {
  const double tau = sparsemax_threshold(z);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::max(0.0, z[i] - tau);
  return out;
}

/// Jacobian-vector product of sparsemax at z. Coordinates on the support
/// boundary (output exactly 0) receive no gradient.
inline std::vector<double> sparsemax_backward(std::span<const double> z, std::span<const double> upstream) {
  if (z.size() != upstream.size()) {
    throw DimensionError("sparsemax_backward: " + std::to_string(z.size()) + " scores but " +
                         std::to_string(upstream.size()) + " upstream values");
  }
  const auto p = sparsemax_forward(z);
  double mean = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      mean += upstream[i];
      ++support;
    }
  }
  mean /= static_cast<double>(support);
  std::vector<double> grad(z.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) grad[i] = upstream[i] - mean;
  return grad;
}

inline std::vector<double> softmax_forward(std::span<const double> z) {
  if (z.empty()) throw ArgumentError("softmax: empty input");
  const double peak = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) denom += (out[i] = std::exp(z[i] - peak));
  for (double& v : out) v /= denom;
  return out;
}

inline std::size_t support_size(std::span<const double> weights) {
  return static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
}

/// Tape-recorded sparsemax over a 1-D tensor.
inline Tensor sparsemax(const Tensor& z) {
  const Tensor cz = z.detach();
  return detail::finish(Tensor(z.shape(), sparsemax_forward(z.values())), {&z},
                        [cz](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          const auto grad = sparsemax_backward(cz.values(), g);
                          for (std::size_t i = 0; i < grad.size(); ++i) in[0][i] += grad[i];
                        });
}

/// Tape-recorded softmax over a 1-D tensor.
inline Tensor softmax(const Tensor& z) {
  auto p = softmax_forward(z.values());
  const Tensor out(z.shape(), p);
  return detail::finish(out, {&z}, [p = std::move(p)](std::span<const double> g, std::span<double* const> in) {
    if (!in[0]) return;
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += g[i] * p[i];
    for (std::size_t i = 0; i < p.size(); ++i) in[0][i] += p[i] * (g[i] - dot);
  });
}

}  // namespace dasnas
