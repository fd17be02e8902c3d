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

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dasnas/ops.hpp"
#include "dasnas/random.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

/// Values in [lo, hi] whose magnitude is at least `gap`, for ops with a kink at 0.
inline Tensor random_away_from_zero(const Shape& shape, Rng& rng, double gap = 1e-3) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) {
    do x = rng.uniform(-1.0, 1.0);
    while (std::abs(x) < gap);
  }
  return Tensor(shape, std::move(v));
}

/// Simplex projection by bisection on the threshold τ of Σ max(z − τ, 0) = 1.
inline std::vector<double> simplex_projection(std::span<const double> z) {
  double lo = *std::min_element(z.begin(), z.end()) - 1.0;
  double hi = *std::max_element(z.begin(), z.end());
  auto mass = [&](double tau) {
    double s = 0.0;
    for (double v : z) s += std::max(v - tau, 0.0);
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  // Polish: with the support fixed, τ has a closed form.
  const double tau0 = 0.5 * (lo + hi);
  double sum = 0.0;
  std::size_t k = 0;
  for (double v : z)
    if (v > tau0) {
      sum += v;
      ++k;
    }
  const double tau = (sum - 1.0) / static_cast<double>(k);
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::max(z[i] - tau, 0.0);
  return p;
}

/// Direct-summation 'same' cross-correlation with explicit zero padding
/// of k/2 rows/columns before each spatial axis.
inline std::vector<double> direct_conv(const std::vector<double>& x, const Shape& xs, const std::vector<double>& k,
                                       const Shape& ks, const std::vector<double>* bias = nullptr) {
  const std::size_t N = xs[0], C = xs[1], H = xs[2], W = xs[3], O = ks[0], KH = ks[2], KW = ks[3];
  const long pt = static_cast<long>(KH / 2), pl = static_cast<long>(KW / 2);
  std::vector<double> out(N * O * H * W, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          double acc = bias ? (*bias)[o] : 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t u = 0; u < KH; ++u)
              for (std::size_t v = 0; v < KW; ++v) {
                const long y = static_cast<long>(i + u) - pt, xx = static_cast<long>(j + v) - pl;
                if (y < 0 || xx < 0 || y >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                acc += x[((n * C + c) * H + y) * W + xx] * k[((o * C + c) * KH + u) * KW + v];
              }
          out[((n * O + o) * H + i) * W + j] = acc;
        }
  return out;
}

/// Complex version built from std::complex products.
inline std::vector<std::complex<double>> direct_cconv(const std::vector<std::complex<double>>& x, const Shape& xs,
                                                     const std::vector<std::complex<double>>& k, const Shape& ks,
                                                     const std::vector<std::complex<double>>& bias) {
  const std::size_t N = xs[0], C = xs[1], H = xs[2], W = xs[3], O = ks[0], KH = ks[2], KW = ks[3];
  const long pt = static_cast<long>(KH / 2), pl = static_cast<long>(KW / 2);
  std::vector<std::complex<double>> out(N * O * H * W);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
          std::complex<double> acc = bias[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t u = 0; u < KH; ++u)
              for (std::size_t v = 0; v < KW; ++v) {
                const long y = static_cast<long>(i + u) - pt, xx = static_cast<long>(j + v) - pl;
                if (y < 0 || xx < 0 || y >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                acc += x[((n * C + c) * H + y) * W + xx] * k[((o * C + c) * KH + u) * KW + v];
              }
          out[((n * O + o) * H + i) * W + j] = acc;
        }
  return out;
}

/// Relative error ||a − b|| / max(||a||, ||b||, floor).
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

struct GradientPair {
  std::vector<std::vector<double>> analytic, numeric;  ///< one entry per input
};

/// Taped gradients and central differences of `f` for every input.
inline GradientPair gradients(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-6) {
  GradientPair out;
  {
    Tape tape;
    std::vector<Tensor> watched;
    for (const auto& t : inputs) watched.push_back(tape.watch(t));
    const Tensor loss = f(watched);
    const Gradients g = tape.backward(loss);
    for (const auto& w : watched) out.analytic.emplace_back(g.of(w).values().begin(), g.of(w).values().end());
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> numeric(inputs[k].size());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Tensor> shifted = inputs;
        shifted[k].mutable_values()[i] += delta;
        return f(shifted).item();
      };
      numeric[i] = (eval(eps) - eval(-eps)) / (2.0 * eps);
    }
    out.numeric.push_back(std::move(numeric));
  }
  return out;
}

/// Worst relative error between taped gradients and central differences of
/// `f` over all `inputs`.
inline double gradient_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-6) {
  const GradientPair g = gradients(f, inputs, eps);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) worst = std::max(worst, relative_error(g.analytic[k], g.numeric[k]));
  return worst;
}

/// Relative error of the whole gradient, all inputs concatenated. Unlike
/// gradient_check it stays meaningful when one input's gradient is exactly
/// zero and the differences hold only round-off.
inline double joint_gradient_error(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-6) {
  const GradientPair g = gradients(f, inputs, eps);
  std::vector<double> analytic, numeric;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    analytic.insert(analytic.end(), g.analytic[k].begin(), g.analytic[k].end());
    numeric.insert(numeric.end(), g.numeric[k].begin(), g.numeric[k].end());
  }
  return relative_error(analytic, numeric);
}

/// Σ out · r with a fixed random r: turns any op into a scalar loss.
inline Tensor project(const Tensor& out, const Tensor& r) { return sum(mul(out, r)); }

}  // namespace dasnas::testing
