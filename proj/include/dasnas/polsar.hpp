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

// Coherency-matrix imagery: in-memory model, the .pct/.plb file formats,
// labeled patch extraction, train/validation/test splitting and a synthetic
// multi-look scene generator.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dasnas/errors.hpp"
#include "dasnas/random.hpp"

namespace dasnas {

/// Upper triangle of T in the order T11, T12, T13, T22, T23, T33.
inline constexpr std::size_t kCoherencyChannels = 6;
/// Channel indices of the diagonal entries (purely real).
inline constexpr std::array<std::size_t, 3> kDiagonalChannels{0, 3, 5};

using cfloat = std::complex<float>;

struct CoherencyImage {
  std::size_t height = 0;
  std::size_t width = 0;
  /// Row-major by pixel, channel-minor.
  std::vector<cfloat> data;

  CoherencyImage() = default;
  CoherencyImage(std::size_t h, std::size_t w) : height(h), width(w), data(h * w * kCoherencyChannels) {}

  cfloat& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * kCoherencyChannels + c]; }
  cfloat at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * kCoherencyChannels + c];
  }

  /// Full 3×3 Hermitian matrix of one pixel.
  Eigen::Matrix3cd matrix(std::size_t y, std::size_t x) const {
    static constexpr std::size_t kIndex[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    Eigen::Matrix3cd t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        const std::complex<double> v(at(y, x, kIndex[r][c]));
        t(r, c) = r <= c ? v : std::conj(v);
      }
    return t;
  }

  friend bool operator==(const CoherencyImage&, const CoherencyImage&) = default;
};

struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  /// 0 = unlabeled, 1..c = classes.
  std::vector<std::uint16_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w) : height(h), width(w), labels(h * w, 0) {}

  std::uint16_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::uint16_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::size_t class_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

enum class Split : std::uint8_t { unassigned, train, validation, test };

/// Labeled patches, [N, channels, patch, patch]. Complex datasets keep the
/// imaginary planes in `im`; real ones leave it empty.
struct PatchDataset {
  std::size_t count = 0;
  std::size_t channels = 0;
  std::size_t patch_size = 0;
  bool is_complex = false;
  std::vector<float> re;
  std::vector<float> im;
  std::vector<std::size_t> labels;                 ///< 0-based class index
  std::vector<std::pair<std::size_t, std::size_t>> centers;  ///< source pixel (row, col)
  std::vector<Split> splits;
  std::size_t class_count = 0;

  std::size_t patch_values() const { return channels * patch_size * patch_size; }

  std::vector<std::size_t> indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count; ++i)
      if (splits[i] == split) out.push_back(i);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Coherency statistics

using ScatteringVector = Eigen::Vector3cd;

/// Pauli vector k = [S_HH + S_VV, S_HH − S_VV, 2 S_HV] / √2.
inline ScatteringVector pauli_vector(std::complex<double> s_hh, std::complex<double> s_hv,
                                     std::complex<double> s_vv) {
  return ScatteringVector(s_hh + s_vv, s_hh - s_vv, 2.0 * s_hv) / std::sqrt(2.0);
}

/// T = (1/L) Σ k kᴴ over the L looks. Diagonal entries are formed as |k_i|²
/// so they are exactly real.
inline Eigen::Matrix3cd coherency_from_scattering(std::span<const ScatteringVector> looks) {
  if (looks.empty()) throw ArgumentError("coherency_from_scattering: no samples");
  Eigen::Matrix3cd t = Eigen::Matrix3cd::Zero();
  for (const auto& k : looks) {
    for (int r = 0; r < 3; ++r) {
      t(r, r) += std::norm(k(r));
      for (int c = r + 1; c < 3; ++c) t(r, c) += k(r) * std::conj(k(c));
    }
  }
  t /= static_cast<double>(looks.size());
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < r; ++c) t(r, c) = std::conj(t(c, r));
  return t;
}

/// Factor A with A Aᴴ = Σ for a Hermitian positive semidefinite Σ.
inline Eigen::Matrix3cd hermitian_sqrt(const Eigen::Matrix3cd& sigma) {
  if ((sigma - sigma.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw ArgumentError("covariance is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> eig(sigma);
  const auto& values = eig.eigenvalues();
  if (values.minCoeff() < -1e-10) {
    throw ArgumentError("covariance is not positive semidefinite (min eigenvalue " +
                        std::to_string(values.minCoeff()) + ")");
  }
  Eigen::Vector3d root = values.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

/// Distinct class covariances for synthetic scenes: surface, double-bounce and
/// volume mechanisms at several power levels, some with T12/T13 correlation.
inline std::vector<Eigen::Matrix3cd> default_class_covariances(std::size_t count) {
  using C = std::complex<double>;
  auto make = [](double t11, double t22, double t33, C t12, C t13, C t23) {
    Eigen::Matrix3cd m;
    m << t11, t12, t13, std::conj(t12), t22, t23, std::conj(t13), std::conj(t23), t33;
    return m;
  };
  std::vector<Eigen::Matrix3cd> palette{
      make(1.0, 0.10, 0.05, C(0.15, 0.05), 0.0, 0.0),   // surface
      make(0.15, 1.0, 0.08, C(-0.10, 0.10), 0.0, 0.0),  // double bounce
      make(0.50, 0.45, 0.40, 0.0, 0.0, C(0.05, 0.0)),   // volume
      make(4.0, 1.2, 0.6, C(0.8, -0.6), C(0.2, 0.1), 0.0),
      make(0.08, 0.04, 0.03, 0.0, C(0.01, 0.0), 0.0),   // dark, smooth
      make(2.0, 2.5, 0.3, C(0.0, 1.2), 0.0, C(0.1, -0.1)),
      make(0.6, 0.1, 0.9, 0.0, C(0.3, 0.2), 0.0),
      make(8.0, 0.5, 0.2, C(1.0, 0.0), 0.0, 0.0),
  };
  if (count <= palette.size()) {
    palette.resize(count);
    return palette;
  }
  Rng rng(mix_seed(count, 0x5eed));
  while (palette.size() < count) {
    Eigen::Matrix3cd a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = C(rng.normal(), rng.normal());
    const double power = std::exp(rng.uniform(-2.0, 2.0));
    palette.push_back(power * (a * a.adjoint()) / 3.0);
  }
  return palette;
}

/// Block-structured scene with pixelwise L-look Wishart statistics.
/// Blocks of region_size² pixels are assigned classes round-robin over a
/// seeded block permutation, so every class owns at least ⌊blocks/classes⌋
/// blocks. Each pixel averages L outer products of circular complex Gaussian
/// vectors with the class covariance.
inline std::pair<CoherencyImage, LabelMap> synth_generate(std::span<const Eigen::Matrix3cd> class_covariances,
                                                          std::size_t height, std::size_t width, std::size_t looks,
                                                          std::size_t region_size, std::uint64_t seed) {
  if (class_covariances.size() < 2) throw ArgumentError("synth_generate: need at least 2 classes");
  if (looks < 1) throw ArgumentError("synth_generate: looks must be at least 1");
  if (height == 0 || width == 0 || region_size == 0) throw ArgumentError("synth_generate: empty scene");
  if (class_covariances.size() > 65535) throw ArgumentError("synth_generate: too many classes");
  std::vector<Eigen::Matrix3cd> factors;
  for (const auto& sigma : class_covariances) factors.push_back(hermitian_sqrt(sigma));

  const std::size_t blocks_y = (height + region_size - 1) / region_size;
  const std::size_t blocks_x = (width + region_size - 1) / region_size;
  std::vector<std::size_t> order(blocks_y * blocks_x);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng layout_rng(mix_seed(seed, 0));
  layout_rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::uint16_t> block_class(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    block_class[order[i]] = static_cast<std::uint16_t>(i % class_covariances.size() + 1);

  CoherencyImage image(height, width);
  LabelMap labels(height, width);
  Rng rng(mix_seed(seed, 1));
  std::vector<ScatteringVector> samples(looks);
  const double half = std::sqrt(0.5);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const std::uint16_t cls = block_class[(y / region_size) * blocks_x + x / region_size];
      labels.at(y, x) = cls;
      const auto& a = factors[cls - 1];
      for (auto& k : samples) {
        ScatteringVector z;
        for (int i = 0; i < 3; ++i) {
          const double re = rng.normal() * half;
          const double im = rng.normal() * half;
          z(i) = {re, im};
        }
        k = a * z;
      }
      const auto t = coherency_from_scattering(samples);
      image.at(y, x, 0) = cfloat(static_cast<float>(t(0, 0).real()), 0.0f);
      image.at(y, x, 1) = cfloat(t(0, 1));
      image.at(y, x, 2) = cfloat(t(0, 2));
      image.at(y, x, 3) = cfloat(static_cast<float>(t(1, 1).real()), 0.0f);
      image.at(y, x, 4) = cfloat(t(1, 2));
      image.at(y, x, 5) = cfloat(static_cast<float>(t(2, 2).real()), 0.0f);
    }
  return {std::move(image), std::move(labels)};
}

// ---------------------------------------------------------------------------
// Patches

/// Reflects an out-of-range coordinate back into [0, n) without repeating the
/// edge sample (…, 2, 1, 0, 1, 2, …).
inline std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<std::ptrdiff_t>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

/// Writes the mirror-padded complex patch centered at (row, col) into
/// re/im, laid out [channel][u][v].
inline void copy_patch(const CoherencyImage& image, std::size_t row, std::size_t col, std::size_t patch_size,
                       float* re, float* im) {
  const auto half = static_cast<std::ptrdiff_t>(patch_size / 2);
  for (std::size_t u = 0; u < patch_size; ++u) {
    const std::size_t y = mirror_index(static_cast<std::ptrdiff_t>(row) + static_cast<std::ptrdiff_t>(u) - half,
                                       image.height);
    for (std::size_t v = 0; v < patch_size; ++v) {
      const std::size_t x = mirror_index(static_cast<std::ptrdiff_t>(col) + static_cast<std::ptrdiff_t>(v) - half,
                                         image.width);
      for (std::size_t c = 0; c < kCoherencyChannels; ++c) {
        const cfloat value = image.at(y, x, c);
        const std::size_t at = (c * patch_size + u) * patch_size + v;
        re[at] = value.real();
        im[at] = value.imag();
      }
    }
  }
}

/// One complex 6-channel patch per labeled pixel, in row-major pixel order.
/// Borders are mirror-padded so every labeled pixel yields a patch.
inline PatchDataset extract_patches(const CoherencyImage& image, const LabelMap& labels,
                                    std::size_t patch_size = 15) {
  if (patch_size % 2 == 0) throw ArgumentError("extract_patches: patch size must be odd");
  if (image.height != labels.height || image.width != labels.width) {
    throw DimensionError("extract_patches: image and label map dimensions differ");
  }
  PatchDataset out;
  out.channels = kCoherencyChannels;
  out.patch_size = patch_size;
  out.is_complex = true;
  out.class_count = labels.class_count();
  for (std::size_t y = 0; y < labels.height; ++y)
    for (std::size_t x = 0; x < labels.width; ++x)
      if (labels.at(y, x) != 0) out.centers.emplace_back(y, x);
  out.count = out.centers.size();
  const std::size_t stride = out.patch_values();
  out.re.resize(out.count * stride);
  out.im.resize(out.count * stride);
  out.labels.resize(out.count);
  out.splits.assign(out.count, Split::unassigned);
  for (std::size_t i = 0; i < out.count; ++i) {
    const auto [y, x] = out.centers[i];
    copy_patch(image, y, x, patch_size, out.re.data() + i * stride, out.im.data() + i * stride);
    out.labels[i] = labels.at(y, x) - 1u;
  }
  return out;
}

/// Complex [N, 6, P, P] -> real [N, 12, P, P]: real parts in channels 0–5,
/// imaginary parts in 6–11, same channel order.
inline PatchDataset to_real_channels(const PatchDataset& patches) {
  if (!patches.is_complex || patches.channels != kCoherencyChannels) {
    throw ArgumentError("to_real_channels: expected 6 complex channels");
  }
  PatchDataset out = patches;
  out.is_complex = false;
  out.channels = 2 * kCoherencyChannels;
  out.im.clear();
  const std::size_t in_stride = patches.patch_values();
  out.re.resize(patches.count * out.patch_values());
  for (std::size_t i = 0; i < patches.count; ++i) {
    const float* re = patches.re.data() + i * in_stride;
    const float* im = patches.im.data() + i * in_stride;
    float* dst = out.re.data() + i * out.patch_values();
    std::copy(re, re + in_stride, dst);
    std::copy(im, im + in_stride, dst + in_stride);
  }
  return out;
}

/// Real 12-channel layout without the three identically-zero imaginary
/// planes of the diagonal entries (9 channels).
inline PatchDataset drop_diagonal_imaginary(const PatchDataset& real12) {
  if (real12.is_complex || real12.channels != 2 * kCoherencyChannels) {
    throw ArgumentError("drop_diagonal_imaginary: expected 12 real channels");
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < 2 * kCoherencyChannels; ++c) {
    const bool zero_plane = c >= kCoherencyChannels &&
                            std::find(kDiagonalChannels.begin(), kDiagonalChannels.end(), c - kCoherencyChannels) !=
                                kDiagonalChannels.end();
    if (!zero_plane) keep.push_back(c);
  }
  PatchDataset out = real12;
  out.channels = keep.size();
  const std::size_t plane = real12.patch_size * real12.patch_size;
  out.re.resize(real12.count * out.patch_values());
  for (std::size_t i = 0; i < real12.count; ++i)
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const float* src = real12.re.data() + (i * real12.channels + keep[k]) * plane;
      std::copy(src, src + plane, out.re.data() + (i * out.channels + k) * plane);
    }
  return out;
}

/// Converts complex 6-channel patches to a model input layout:
/// 6 (complex), 12 (real + imaginary) or 9 (12 minus diagonal imaginaries).
inline PatchDataset to_input_layout(const PatchDataset& complex_patches, std::size_t channels) {
  switch (channels) {
    case 6:
      if (!complex_patches.is_complex) throw ArgumentError("complex layout requires complex patches");
      return complex_patches;
    case 12:
      return to_real_channels(complex_patches);
    case 9:
      return drop_diagonal_imaginary(to_real_channels(complex_patches));
    default:
      throw ArgumentError("unsupported input channel count " + std::to_string(channels) + " (use 6, 9 or 12)");
  }
}

/// Seeded per-class sampling without replacement. Unrequested samples go to
/// the test split when `per_class_test` is empty ("rest"), otherwise they stay
/// unassigned.
inline void split_dataset(PatchDataset& patches, std::size_t per_class_train, std::size_t per_class_val,
                          std::optional<std::size_t> per_class_test, std::uint64_t seed) {
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < patches.count; ++i) by_class[patches.labels[i]].push_back(i);
  patches.splits.assign(patches.count, Split::unassigned);
  for (auto& [cls, members] : by_class) {
    const std::size_t needed = per_class_train + per_class_val + per_class_test.value_or(0);
    if (members.size() < needed) {
      throw ArgumentError("class " + std::to_string(cls + 1) + " has " + std::to_string(members.size()) +
                          " samples, split needs " + std::to_string(needed));
    }
    Rng rng(mix_seed(seed, cls));
    rng.shuffle(std::span<std::size_t>(members));
    const std::size_t test_end =
        per_class_test ? per_class_train + per_class_val + *per_class_test : members.size();
    for (std::size_t k = 0; k < members.size(); ++k) {
      Split s = Split::unassigned;
      if (k < per_class_train) s = Split::train;
      else if (k < per_class_train + per_class_val) s = Split::validation;
      else if (k < test_end) s = Split::test;
      patches.splits[members[k]] = s;
    }
  }
}

// ---------------------------------------------------------------------------
// File formats (little-endian)

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  void expect_magic(const char* magic, const char* what) {
    const std::size_t n = std::strlen(magic);
    if (bytes_.size() < n || bytes_.compare(0, n, magic) != 0) {
      throw FormatError(std::string("bad magic for ") + what + " file", 0);
    }
    pos_ = n;
  }

  void require(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated ") + what + ": need " + std::to_string(n) + " bytes, have " +
                            std::to_string(bytes_.size() - pos_),
                        pos_);
    }
  }

  std::uint32_t u32() {
    require(4, "header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    require(8, "header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::uint16_t u16() {
    require(2, "payload");
    const auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes_[pos_]) |
                                              (static_cast<unsigned char>(bytes_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }

  std::uint8_t u8() {
    require(1, "header");
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string bytes(std::size_t n) {
    require(n, "payload");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("failed writing '" + path + "'");
}

inline void check_dims(std::uint64_t h, std::uint64_t w, std::uint64_t bytes_per_pixel, std::size_t available,
                       std::size_t offset, const char* what) {
  if (h == 0 || w == 0) throw FormatError(std::string("zero dimension in ") + what + " header", offset);
  const std::uint64_t limit = ~std::uint64_t{0} / bytes_per_pixel;
  if (h > limit / w) throw FormatError(std::string("dimension overflow in ") + what + " header", offset);
  if (h * w * bytes_per_pixel > available) {
    throw FormatError(std::string("truncated ") + what + " payload: header declares " +
                          std::to_string(h * w * bytes_per_pixel) + " bytes, file has " + std::to_string(available),
                      offset);
  }
}

}  // namespace detail

/// "PCT1", u32 height, u32 width, u32 channels (= 6), then per pixel and
/// channel a float32 real part followed by a float32 imaginary part.
inline std::string encode_pct(const CoherencyImage& image) {
  std::string out = "PCT1";
  detail::put_u32(out, static_cast<std::uint32_t>(image.height));
  detail::put_u32(out, static_cast<std::uint32_t>(image.width));
  detail::put_u32(out, static_cast<std::uint32_t>(kCoherencyChannels));
  out.reserve(out.size() + image.data.size() * 8);
  for (const auto& v : image.data) {
    detail::put_f32(out, v.real());
    detail::put_f32(out, v.imag());
  }
  return out;
}

inline CoherencyImage decode_pct(std::string bytes) {
  detail::ByteReader in(std::move(bytes));
  in.expect_magic("PCT1", "PCT1");
  const std::uint32_t h = in.u32(), w = in.u32();
  const std::size_t channel_offset = in.position();
  const std::uint32_t channels = in.u32();
  if (channels != kCoherencyChannels) {
    throw FormatError("expected 6 channels, header declares " + std::to_string(channels), channel_offset);
  }
  detail::check_dims(h, w, 8 * kCoherencyChannels, in.remaining(), in.position(), "PCT1");
  CoherencyImage image(h, w);
  for (auto& v : image.data) {
    const float re = in.f32();
    const float im = in.f32();
    v = {re, im};
  }
  return image;
}

/// "PLB1", u32 height, u32 width, then u16 labels row-major.
inline std::string encode_plb(const LabelMap& labels) {
  std::string out = "PLB1";
  detail::put_u32(out, static_cast<std::uint32_t>(labels.height));
  detail::put_u32(out, static_cast<std::uint32_t>(labels.width));
  for (auto v : labels.labels) detail::put_u16(out, v);
  return out;
}

inline LabelMap decode_plb(std::string bytes) {
  detail::ByteReader in(std::move(bytes));
  in.expect_magic("PLB1", "PLB1");
  const std::uint32_t h = in.u32(), w = in.u32();
  detail::check_dims(h, w, 2, in.remaining(), in.position(), "PLB1");
  LabelMap labels(h, w);
  for (auto& v : labels.labels) v = in.u16();
  return labels;
}

inline void write_pct(const std::string& path, const CoherencyImage& image) {
  detail::write_file(path, encode_pct(image));
}
inline CoherencyImage read_pct(const std::string& path) { return decode_pct(detail::read_file(path)); }
inline void write_plb(const std::string& path, const LabelMap& labels) { detail::write_file(path, encode_plb(labels)); }
inline LabelMap read_plb(const std::string& path) { return decode_plb(detail::read_file(path)); }

}  // namespace dasnas
