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

// Differentiable tensor operations. Each function computes its value eagerly
// and, when any operand is tracked, records a gradient rule on the operand's
// tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dasnas/errors.hpp"
#include "dasnas/tensor.hpp"

namespace dasnas {

/// Scalar type of the convolution matrix products. Inputs, outputs and
/// gradients stay double; float32 only rounds the GEMM operands.
enum class GemmPrecision { float64, float32 };

inline GemmPrecision& gemm_precision_slot() {
  thread_local GemmPrecision precision = GemmPrecision::float64;
  return precision;
}

inline GemmPrecision gemm_precision() { return gemm_precision_slot(); }

/// Sets the calling thread's GEMM precision for the lifetime of the guard.
class ScopedGemmPrecision {
 public:
  explicit ScopedGemmPrecision(GemmPrecision p) : saved_(gemm_precision_slot()) { gemm_precision_slot() = p; }
  ~ScopedGemmPrecision() { gemm_precision_slot() = saved_; }
  ScopedGemmPrecision(const ScopedGemmPrecision&) = delete;
  ScopedGemmPrecision& operator=(const ScopedGemmPrecision&) = delete;

 private:
  GemmPrecision saved_;
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

inline Tensor finish(Tensor value, std::vector<const Tensor*> inputs, Tape::Rule rule) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t || !t->tracked()) continue;
    if (tape && tape != t->tape()) throw StateError("operands belong to different tapes");
    tape = t->tape();
  }
  if (!tape) return value;
  return tape->record(std::move(value), std::move(inputs), std::move(rule));
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         to_string(t.shape()));
  }
}

/// out[i] = x[index[i]]; the gradient scatters back.
inline Tensor gather(const Tensor& x, std::shared_ptr<const std::vector<std::size_t>> index, Shape out_shape) {
  std::vector<double> out(index->size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[(*index)[i]];
  return finish(Tensor(std::move(out_shape), std::move(out)), {&x},
                [index](std::span<const double> g, std::span<double* const> in) {
                  if (!in[0]) return;
                  for (std::size_t i = 0; i < g.size(); ++i) in[0][(*index)[i]] += g[i];
                });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reductions

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::finish(Tensor(a.shape(), std::move(out)), {&a, &b},
                        [](std::span<const double> g, std::span<double* const> in) {
                          for (std::size_t k = 0; k < 2; ++k) {
                            if (!in[k]) continue;
                            for (std::size_t i = 0; i < g.size(); ++i) in[k][i] += g[i];
                          }
                        });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::finish(Tensor(a.shape(), std::move(out)), {&a, &b},
                        [](std::span<const double> g, std::span<double* const> in) {
                          if (in[0])
                            for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                          if (in[1])
                            for (std::size_t i = 0; i < g.size(); ++i) in[1][i] -= g[i];
                        });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const Tensor ca = a.detach(), cb = b.detach();
  return detail::finish(Tensor(a.shape(), std::move(out)), {&a, &b},
                        [ca, cb](std::span<const double> g, std::span<double* const> in) {
                          if (in[0])
                            for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i] * cb[i];
                          if (in[1])
                            for (std::size_t i = 0; i < g.size(); ++i) in[1][i] += g[i] * ca[i];
                        });
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return detail::finish(Tensor(a.shape(), std::move(out)), {&a},
                        [factor](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i] * factor;
                        });
}

inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  const std::size_t n = a.size();
  return detail::finish(Tensor::scalar(total), {&a},
                        [n](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          for (std::size_t i = 0; i < n; ++i) in[0][i] += g[0];
                        });
}

/// Sum of absolute values; subgradient sign(x) with sign(0) = 0.
inline Tensor l1norm(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += std::abs(v);
  const Tensor ca = a.detach();
  return detail::finish(Tensor::scalar(total), {&a},
                        [ca](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          for (std::size_t i = 0; i < ca.size(); ++i) {
                            const double s = ca[i] > 0.0 ? 1.0 : (ca[i] < 0.0 ? -1.0 : 0.0);
                            in[0][i] += g[0] * s;
                          }
                        });
}

/// Σ_i weights[i] · terms[i] for a 1-D weight vector and equally shaped terms.
inline Tensor weighted_sum(std::span<const Tensor> terms, const Tensor& weights) {
  if (terms.empty()) throw ArgumentError("weighted_sum: no terms");
  if (weights.size() != terms.size()) {
    throw ArgumentError("weighted_sum: " + std::to_string(terms.size()) + " terms but " +
                        std::to_string(weights.size()) + " weights");
  }
  for (const auto& t : terms) detail::require_same_shape(terms[0], t, "weighted_sum");
  std::vector<double> out(terms[0].size(), 0.0);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const double w = weights[k];
    const auto tv = terms[k].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * tv[i];
  }
  std::vector<const Tensor*> inputs{&weights};
  std::vector<Tensor> saved;
  saved.reserve(terms.size());
  for (const auto& t : terms) {
    inputs.push_back(&t);
    saved.push_back(t.detach());
  }
  const Tensor cw = weights.detach();
  return detail::finish(
      Tensor(terms[0].shape(), std::move(out)), std::move(inputs),
      [saved = std::move(saved), cw](std::span<const double> g, std::span<double* const> in) {
        for (std::size_t k = 0; k < saved.size(); ++k) {
          const auto tv = saved[k].values();
          if (in[0]) {
            double dot = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * tv[i];
            in[0][k] += dot;
          }
          if (double* gt = in[k + 1]) {
            const double w = cw[k];
            for (std::size_t i = 0; i < g.size(); ++i) gt[i] += w * g[i];
          }
        }
      });
}

/// Multiplies x by factors[c] along `axis` (broadcast over all other axes).
inline Tensor scale_axis(const Tensor& x, const Tensor& factors, std::size_t axis) {
  const std::size_t extent = x.dim(axis);
  if (factors.size() != extent) {
    throw DimensionError("scale_axis: " + std::to_string(factors.size()) + " factors for axis of extent " +
                         std::to_string(extent));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  std::vector<double> out(x.size());
  const auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t c = 0; c < extent; ++c) {
      const double f = factors[c];
      const std::size_t base = (o * extent + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) out[base + i] = xv[base + i] * f;
    }
  const Tensor cx = x.detach(), cf = factors.detach();
  return detail::finish(Tensor(x.shape(), std::move(out)), {&x, &factors},
                        [cx, cf, outer, extent, inner](std::span<const double> g, std::span<double* const> in) {
                          for (std::size_t o = 0; o < outer; ++o)
                            for (std::size_t c = 0; c < extent; ++c) {
                              const std::size_t base = (o * extent + c) * inner;
                              if (in[0]) {
                                const double f = cf[c];
                                for (std::size_t i = 0; i < inner; ++i) in[0][base + i] += g[base + i] * f;
                              }
                              if (in[1]) {
                                double dot = 0.0;
                                for (std::size_t i = 0; i < inner; ++i) dot += g[base + i] * cx[base + i];
                                in[1][c] += dot;
                              }
                            }
                        });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return detail::finish(Tensor(std::move(shape), std::move(out)), {&x},
                        [](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                        });
}

/// [N, C, H, W] -> [N, C·H·W]; channel index varies slowest after the batch.
inline Tensor flatten(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("flatten: expected a batch axis, got " + to_string(x.shape()));
  return reshape(x, Shape{x.dim(0), x.size() / x.dim(0)});
}

inline Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  const Tensor cx = x.detach();
  return detail::finish(Tensor(x.shape(), std::move(out)), {&x},
                        [cx](std::span<const double> g, std::span<double* const> in) {
                          if (!in[0]) return;
                          for (std::size_t i = 0; i < g.size(); ++i)
                            if (cx[i] > 0.0) in[0][i] += g[i];
                        });
}

// ---------------------------------------------------------------------------
// Pooling

namespace detail {

/// Flat input index of the selected element of each disjoint 2×2 window.
/// `score` ranks candidates; the first maximum in row-major window order wins.
template <class Score>
std::shared_ptr<std::vector<std::size_t>> pool_argmax(const Shape& shape, Score score) {
  if (shape.size() != 4) throw DimensionError("pool: expected [N,C,H,W], got " + to_string(shape));
  const std::size_t n = shape[0], c = shape[1], h = shape[2], w = shape[3];
  if (h < 2 || w < 2) throw DimensionError("pool: spatial dims must be at least 2, got " + to_string(shape));
  const std::size_t oh = h / 2, ow = w / 2;
  auto index = std::make_shared<std::vector<std::size_t>>(n * c * oh * ow);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = base + (2 * i) * w + 2 * j;
        double best_score = score(best);
        for (std::size_t u = 0; u < 2; ++u)
          for (std::size_t v = 0; v < 2; ++v) {
            const std::size_t at = base + (2 * i + u) * w + 2 * j + v;
            const double s = score(at);
            if (s > best_score) {
              best = at;
              best_score = s;
            }
          }
        (*index)[o++] = best;
      }
  }
  return index;
}

}  // namespace detail

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
inline Tensor maxpool2x2(const Tensor& x) {
  const auto xv = x.values();
  auto index = detail::pool_argmax(x.shape(), [&](std::size_t i) { return xv[i]; });
  Shape out{x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3) / 2};
  return detail::gather(x, std::move(index), std::move(out));
}

// ---------------------------------------------------------------------------
// Convolution

/// Zeros inserted before the first row (or column) by 'same' padding for a
/// kernel extent k. Even kernels get the extra padding row/column on the
/// top/left, which keeps a kernel centered inside any larger odd grid.
constexpr std::size_t same_padding_before(std::size_t k) noexcept { return k / 2; }

namespace detail {

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw;
  std::size_t pad_top() const { return same_padding_before(kh); }
  std::size_t pad_left() const { return same_padding_before(kw); }
  std::size_t plane() const { return h * w; }
  std::size_t patch() const { return cin * kh * kw; }
  /// Samples per column block, keeping a block near 1 MiB.
  std::size_t block() const { return std::clamp<std::size_t>((std::size_t{1} << 17) / (patch() * plane()), 1, n); }
};

/// Output columns j whose tap v reads an in-bounds input column: [lo, hi).
inline std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_columns(std::ptrdiff_t v, std::ptrdiff_t pl, std::ptrdiff_t w) {
  const std::ptrdiff_t lo = std::clamp<std::ptrdiff_t>(pl - v, 0, w);
  const std::ptrdiff_t hi = std::clamp<std::ptrdiff_t>(w + pl - v, lo, w);
  return {lo, hi};
}

/// Column block of samples [n0, n0 + m):
/// cols[(c·kh + u)·kw + v][s·H·W + i·W + j] = x_padded[n0 + s, c, i + u, j + v]
template <class S>
void im2col(const double* x, const ConvGeometry& g, std::size_t n0, std::size_t m, S* cols) {
  const auto pt = static_cast<std::ptrdiff_t>(g.pad_top()), pl = static_cast<std::ptrdiff_t>(g.pad_left());
  const auto H = static_cast<std::ptrdiff_t>(g.h), W = static_cast<std::ptrdiff_t>(g.w);
  S* dst = cols;
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(g.kh); ++u)
      for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(g.kw); ++v) {
        const auto [lo, hi] = valid_columns(v, pl, W);
        for (std::size_t s = 0; s < m; ++s) {
          const double* src = x + ((n0 + s) * g.cin + c) * g.plane();
          for (std::ptrdiff_t i = 0; i < H; ++i, dst += W) {
            const std::ptrdiff_t y = i + u - pt;
            if (y < 0 || y >= H) {
              std::fill(dst, dst + W, S{0});
              continue;
            }
            const double* row = src + y * W + (lo + v - pl);  // input column of output lo
            std::fill(dst, dst + lo, S{0});
            std::copy(row, row + (hi - lo), dst + lo);
            std::fill(dst + hi, dst + W, S{0});
          }
        }
      }
}

/// Adjoint of im2col: scatters a column block back into dx.
template <class S>
void col2im(const S* cols, const ConvGeometry& g, std::size_t n0, std::size_t m, double* dx) {
  const auto pt = static_cast<std::ptrdiff_t>(g.pad_top()), pl = static_cast<std::ptrdiff_t>(g.pad_left());
  const auto H = static_cast<std::ptrdiff_t>(g.h), W = static_cast<std::ptrdiff_t>(g.w);
  const S* src = cols;
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(g.kh); ++u)
      for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(g.kw); ++v) {
        const auto [lo, hi] = valid_columns(v, pl, W);
        for (std::size_t s = 0; s < m; ++s) {
          double* dst = dx + ((n0 + s) * g.cin + c) * g.plane();
          for (std::ptrdiff_t i = 0; i < H; ++i, src += W) {
            const std::ptrdiff_t y = i + u - pt;
            if (y < 0 || y >= H) continue;
            double* row = dst + y * W + (lo + v - pl);
            for (std::ptrdiff_t j = 0; j < hi - lo; ++j) row[j] += static_cast<double>(src[lo + j]);
          }
        }
      }
}

template <class S>
using GemmMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Kernel [Cout, Cin·Kh·Kw] in the GEMM scalar.
template <class S>
GemmMatrix<S> kernel_matrix(const Tensor& kernel, const ConvGeometry& g) {
  return ConstMatrixMap(kernel.values().data(), static_cast<Eigen::Index>(g.cout), static_cast<Eigen::Index>(g.patch()))
      .template cast<S>();
}

template <class S>
std::vector<double> conv_forward(const Tensor& x, const Tensor& kernel, const Tensor* bias, const ConvGeometry& g) {
  using Map = Eigen::Map<GemmMatrix<S>>;
  using ConstMap = Eigen::Map<const GemmMatrix<S>>;
  const auto cout = static_cast<Eigen::Index>(g.cout), patch = static_cast<Eigen::Index>(g.patch());
  const std::size_t plane = g.plane(), block = g.block();
  const GemmMatrix<S> kmat = kernel_matrix<S>(kernel, g);
  std::vector<S> cols(g.patch() * block * plane), out_block(g.cout * block * plane);
  std::vector<double> out(g.n * g.cout * plane);
  for (std::size_t n0 = 0; n0 < g.n; n0 += block) {
    const std::size_t m = std::min(block, g.n - n0);
    const auto width = static_cast<Eigen::Index>(m * plane);
    im2col(x.values().data(), g, n0, m, cols.data());
    Map(out_block.data(), cout, width).noalias() = kmat * ConstMap(cols.data(), patch, width);
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t co = 0; co < g.cout; ++co) {
        const double b = bias ? (*bias)[co] : 0.0;
        const S* src = out_block.data() + (co * m + s) * plane;
        double* dst = out.data() + ((n0 + s) * g.cout + co) * plane;
        for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<double>(src[p]) + b;
      }
  }
  return out;
}

template <class S>
void conv_backward(const Tensor& x, const Tensor& kernel, const ConvGeometry& g, std::span<const double> grad,
                   std::span<double* const> in) {
  using ConstMap = Eigen::Map<const GemmMatrix<S>>;
  const auto cout = static_cast<Eigen::Index>(g.cout), patch = static_cast<Eigen::Index>(g.patch());
  const std::size_t plane = g.plane(), block = g.block();
  if (in.size() > 2 && in[2]) {
    // plain loop in sample order: Eigen's vectorized sums depend on alignment
    for (std::size_t co = 0; co < g.cout; ++co) {
      double total = 0.0;
      for (std::size_t s = 0; s < g.n; ++s) {
        const double* src = grad.data() + (s * g.cout + co) * plane;
        for (std::size_t p = 0; p < plane; ++p) total += src[p];
      }
      in[2][co] += total;
    }
  }
  if (!in[0] && !in[1]) return;
  const GemmMatrix<S> kmat = in[0] ? kernel_matrix<S>(kernel, g) : GemmMatrix<S>();
  GemmMatrix<S> dk = in[1] ? GemmMatrix<S>::Zero(cout, patch) : GemmMatrix<S>();
  std::vector<S> cols(g.patch() * block * plane), g_block(g.cout * block * plane);
  GemmMatrix<S> dcols;
  for (std::size_t n0 = 0; n0 < g.n; n0 += block) {
    const std::size_t m = std::min(block, g.n - n0);
    const auto width = static_cast<Eigen::Index>(m * plane);
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t co = 0; co < g.cout; ++co) {
        const double* src = grad.data() + ((n0 + s) * g.cout + co) * plane;
        std::copy(src, src + plane, g_block.data() + (co * m + s) * plane);
      }
    const ConstMap gb(g_block.data(), cout, width);
    if (in[1]) {
      im2col(x.values().data(), g, n0, m, cols.data());
      dk.noalias() += gb * ConstMap(cols.data(), patch, width).transpose();
    }
    if (in[0]) {
      dcols.noalias() = kmat.transpose() * gb;  // [patch, m·plane]
      col2im(dcols.data(), g, n0, m, in[0]);
    }
  }
  if (in[1]) MatrixMap(in[1], cout, patch) += dk.template cast<double>();
}

inline Tensor conv2d_impl(const Tensor& x, const Tensor& kernel, const Tensor* bias) {
  require_rank(x, 4, "conv2d_same");
  require_rank(kernel, 4, "conv2d_same");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernel.dim(0), kernel.dim(2), kernel.dim(3)};
  if (kernel.dim(1) != g.cin) {
    throw DimensionError("conv2d_same: input has " + std::to_string(g.cin) + " channels, kernel expects " +
                         std::to_string(kernel.dim(1)));
  }
  if (bias && bias->size() != g.cout) {
    throw DimensionError("conv2d_same: bias of shape " + to_string(bias->shape()) + " for " +
                         std::to_string(g.cout) + " output channels");
  }
  const bool single = gemm_precision() == GemmPrecision::float32;
  std::vector<double> out = single ? conv_forward<float>(x, kernel, bias, g) : conv_forward<double>(x, kernel, bias, g);

  const Tensor cx = x.detach(), ck = kernel.detach();
  std::vector<const Tensor*> inputs{&x, &kernel};
  if (bias) inputs.push_back(bias);
  return finish(Tensor(Shape{g.n, g.cout, g.h, g.w}, std::move(out)), std::move(inputs),
                [g, cx, ck, single](std::span<const double> grad, std::span<double* const> in) {
                  if (single) {
                    conv_backward<float>(cx, ck, g, grad, in);
                  } else {
                    conv_backward<double>(cx, ck, g, grad, in);
                  }
                });
}

}  // namespace detail

/// Stride-1 cross-correlation with zero 'same' padding: output spatial dims
/// equal the input's for every kernel size.
/// x: [N, Cin, H, W], kernel: [Cout, Cin, Kh, Kw], bias: [Cout].
inline Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  return detail::conv2d_impl(x, kernel, &bias);
}

inline Tensor conv2d_same(const Tensor& x, const Tensor& kernel) { return detail::conv2d_impl(x, kernel, nullptr); }

// ---------------------------------------------------------------------------
// Loss

/// Mean over the batch of −log softmax(logits)[label], via log-sum-exp.
inline Tensor cross_entropy_softmax(const Tensor& logits, std::span<const std::size_t> labels) {
  detail::require_rank(logits, 2, "cross_entropy_softmax");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("cross_entropy_softmax: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(n));
  }
  for (auto label : labels) {
    if (label >= k) {
      throw ArgumentError("cross_entropy_softmax: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(k) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<double>>(n * k);
  double total = 0.0;
  const auto z = logits.values();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = z.data() + r * k;
    const double peak = *std::max_element(row, row + k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(row[c] - peak);
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < k; ++c) (*probs)[r * k + c] = std::exp(row[c] - peak - log_denom);
    total += log_denom - (row[labels[r]] - peak);
  }
  std::vector<std::size_t> saved(labels.begin(), labels.end());
  return detail::finish(Tensor::scalar(total / static_cast<double>(n)), {&logits},
                        [probs, saved = std::move(saved), n, k](std::span<const double> g,
                                                                std::span<double* const> in) {
                          if (!in[0]) return;
                          const double s = g[0] / static_cast<double>(n);
                          for (std::size_t r = 0; r < n; ++r)
                            for (std::size_t c = 0; c < k; ++c) {
                              const double target = c == saved[r] ? 1.0 : 0.0;
                              in[0][r * k + c] += s * ((*probs)[r * k + c] - target);
                            }
                        });
}

}  // namespace dasnas
