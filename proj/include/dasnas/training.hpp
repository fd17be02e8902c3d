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

// Pieces shared by the search phases and model retraining.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dasnas/adam.hpp"
#include "dasnas/batch.hpp"
#include "dasnas/errors.hpp"
#include "dasnas/polsar.hpp"
#include "dasnas/random.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

/// Watches every tensor of `params`, evaluates `objective(watched)` to a
/// scalar loss, backpropagates and applies one Adam step in place.
/// Returns the loss value. A non-finite loss throws before any update; an
/// update that leaves a non-finite parameter throws after it.
template <class Objective>
double gradient_step(std::vector<Tensor>& params, AdamState& state, double learning_rate, Objective&& objective,
                     std::size_t epoch, std::size_t batch) {
  std::vector<Tensor> grads;
  double value = 0.0;
  {
    Tape tape;
    std::vector<Tensor> watched;
    watched.reserve(params.size());
    for (const auto& p : params) watched.push_back(tape.watch(p));
    const Tensor loss = objective(std::span<const Tensor>(watched));
    value = loss.item();
    if (!std::isfinite(value)) throw DivergenceError("non-finite training loss", epoch, batch);
    const Gradients g = tape.backward(loss);
    grads.reserve(watched.size());
    for (const auto& w : watched) grads.push_back(g.of(w));
  }
  adam_step(params, grads, state, learning_rate);
  for (const auto& p : params)
    for (double v : p.values())
      if (!std::isfinite(v)) throw DivergenceError("non-finite parameter after update", epoch, batch);
  return value;
}

/// Reshuffles `order` and cuts it into consecutive batches; the last batch
/// may be short.
inline std::vector<std::span<const std::size_t>> shuffled_batches(std::vector<std::size_t>& order,
                                                                  std::size_t batch_size, Rng& rng) {
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::span<const std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    batches.emplace_back(order.data() + start, std::min(batch_size, order.size() - start));
  }
  return batches;
}

/// Normalization fitted on the training split, or the identity map.
inline InputNormalizer training_normalizer(const PatchDataset& data, bool normalize) {
  if (!normalize) return InputNormalizer::identity(data.channels, data.is_complex);
  return InputNormalizer::fit(data, data.indices(Split::train));
}

}  // namespace dasnas
