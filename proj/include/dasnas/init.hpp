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

#include <cmath>
#include <cstddef>
#include <vector>

#include "dasnas/complex.hpp"
#include "dasnas/random.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

/// Glorot uniform on (−b, b), b = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(shape_size(shape));
  for (auto& v : w) v = rng.uniform(-bound, bound);
  return Tensor(shape, std::move(w));
}

/// Complex variant: both parts uniform with the bound divided by sqrt(2), so
/// the modulus variance matches the real initialization.
inline ComplexTensor complex_glorot_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)) / std::sqrt(2.0);
  std::vector<double> re(shape_size(shape)), im(shape_size(shape));
  for (auto& v : re) v = rng.uniform(-bound, bound);
  for (auto& v : im) v = rng.uniform(-bound, bound);
  return {Tensor(shape, std::move(re)), Tensor(shape, std::move(im))};
}

}  // namespace dasnas
