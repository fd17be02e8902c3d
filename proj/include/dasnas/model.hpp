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

// Concrete networks built from a derived architecture: construction,
// retraining, evaluation, whole-map classification and the model file.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dasnas/architecture.hpp"
#include "dasnas/batch.hpp"
#include "dasnas/errors.hpp"
#include "dasnas/metrics.hpp"
#include "dasnas/network.hpp"
#include "dasnas/polsar.hpp"
#include "dasnas/random.hpp"
#include "dasnas/training.hpp"

namespace dasnas {

class Model {
 public:
  /// Kernel shapes [Cout, Cin, h, w] per layer, in declaration order.
  static std::vector<Shape> kernel_shapes(const DerivedArchitecture& arch, std::size_t input_channels,
                                          std::size_t patch_size) {
    const std::size_t grid = pooled_extent(patch_size) * pooled_extent(patch_size);
    std::vector<Shape> shapes;
    std::size_t in = input_channels;
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      shapes.push_back({arch.depths[l], in, arch.kernels[l].h, arch.kernels[l].w});
      in = l + 1 == kConvLayerCount ? arch.depths[l] * grid : arch.depths[l];
    }
    return shapes;
  }

  /// Glorot-initialized network. Real models take 12 or 9 input channels,
  /// complex models 6.
  static Model build(const DerivedArchitecture& arch, std::size_t input_channels, std::uint64_t seed,
                     std::size_t patch_size = 15) {
    arch.validate();
    if (arch.class_count < 2) throw ArgumentError("architecture needs at least 2 classes");
    if (arch.complex_mode ? input_channels != kCoherencyChannels : (input_channels != 12 && input_channels != 9)) {
      throw ArgumentError("input channel count " + std::to_string(input_channels) + " does not fit a " +
                          (arch.complex_mode ? "complex" : "real") + " architecture");
    }
    if (pooled_extent(patch_size) == 0) throw ArgumentError("patch size too small for two pooling layers");
    Rng rng(seed);
    std::vector<Tensor> params;
    for (const auto& shape : kernel_shapes(arch, input_channels, patch_size)) {
      add_kernel(params, arch.complex_mode, shape, rng);
      add_bias(params, arch.complex_mode, shape[0]);
    }
    return Model(arch, input_channels, patch_size, std::move(params),
                 InputNormalizer::identity(input_channels, arch.complex_mode));
  }

  Model(DerivedArchitecture arch, std::size_t input_channels, std::size_t patch_size, std::vector<Tensor> params,
        InputNormalizer normalizer)
      : arch_(std::move(arch)),
        input_channels_(input_channels),
        patch_size_(patch_size),
        params_(std::move(params)),
        normalizer_(std::move(normalizer)) {
    const auto shapes = kernel_shapes(arch_, input_channels_, patch_size_);
    const std::size_t parts = arch_.complex_mode ? 2 : 1;
    if (params_.size() != shapes.size() * 2 * parts) throw DimensionError("model parameter list has wrong length");
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      for (std::size_t p = 0; p < parts; ++p) {
        if (params_[kernel_slot(l) + p].shape() != shapes[l] || params_[bias_slot(l) + p].shape() != Shape{shapes[l][0]}) {
          throw DimensionError("model parameter shapes do not match the architecture");
        }
      }
    }
    if (normalizer_.scale.size() != input_channels_ || normalizer_.shift.size() != input_channels_ ||
        normalizer_.complex_mode != arch_.complex_mode) {
      throw DimensionError("input normalization does not match the model input");
    }
  }

  const DerivedArchitecture& architecture() const noexcept { return arch_; }
  bool complex_mode() const noexcept { return arch_.complex_mode; }
  std::size_t class_count() const noexcept { return arch_.class_count; }
  std::size_t input_channels() const noexcept { return input_channels_; }
  std::size_t patch_size() const noexcept { return patch_size_; }

  std::vector<Tensor>& parameters() noexcept { return params_; }
  const std::vector<Tensor>& parameters() const noexcept { return params_; }

  /// Number of real scalars; complex weights count both parts.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  const InputNormalizer& normalizer() const noexcept { return normalizer_; }
  void set_normalizer(InputNormalizer n) {
    if (n.scale.size() != input_channels_ || n.complex_mode != arch_.complex_mode) {
      throw DimensionError("input normalization does not match the model input");
    }
    normalizer_ = std::move(n);
  }

  /// Scores [N, K] using `params` in place of the stored parameters, which
  /// lets training pass tape-watched copies.
  Tensor scores(const Batch& batch, std::span<const Tensor> params) const {
    if (params.size() != params_.size()) throw DimensionError("model parameter count mismatch");
    if (batch.re.rank() != 4 || batch.re.dim(1) != input_channels_ || batch.re.dim(2) != patch_size_ ||
        batch.re.dim(3) != patch_size_ || batch.is_complex() != complex_mode()) {
      throw ArgumentError("batch layout " + to_string(batch.re.shape()) + " does not match the model input");
    }
    if (complex_mode()) return run<ComplexTensor>(batch, params);
    return run<Tensor>(batch, params);
  }

  Tensor scores(const Batch& batch) const { return scores(batch, params_); }

  std::vector<std::size_t> predict(const Batch& batch) const {
    const Tensor s = scores(batch);
    const std::size_t k = s.dim(1);
    std::vector<std::size_t> out(s.dim(0));
    for (std::size_t n = 0; n < out.size(); ++n) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (s[n * k + j] > s[n * k + best]) best = j;
      out[n] = best;
    }
    return out;
  }

  /// Predictions for dataset samples, evaluated in chunks.
  std::vector<std::size_t> predict(const PatchDataset& data, std::span<const std::size_t> indices,
                                   std::size_t chunk = 256) const {
    std::vector<std::size_t> out;
    out.reserve(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
      const auto part = indices.subspan(start, std::min(chunk, indices.size() - start));
      for (auto p : predict(make_batch(data, part, normalizer_))) out.push_back(p);
    }
    return out;
  }

 private:
  std::size_t parts() const noexcept { return arch_.complex_mode ? 2 : 1; }
  std::size_t kernel_slot(std::size_t layer) const noexcept { return layer * 2 * parts(); }
  std::size_t bias_slot(std::size_t layer) const noexcept { return kernel_slot(layer) + parts(); }

  template <class Field>
  Tensor run(const Batch& batch, std::span<const Tensor> params) const {
    return topology_forward(batch_input<Field>(batch), [&](std::size_t l) {
      return std::pair{load_weight<Field>(params, kernel_slot(l)), load_weight<Field>(params, bias_slot(l))};
    });
  }

  DerivedArchitecture arch_;
  std::size_t input_channels_;
  std::size_t patch_size_;
  std::vector<Tensor> params_;
  InputNormalizer normalizer_;
};

inline Model build_model(const DerivedArchitecture& arch, std::size_t input_channels, std::uint64_t seed) {
  return Model::build(arch, input_channels, seed);
}

// ---------------------------------------------------------------------------
// Training and evaluation

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  bool select_best = true;  ///< keep the snapshot with the best validation OA
  bool normalize = true;    ///< fit input normalization on the training split
  std::ostream* log = nullptr;
  GemmPrecision precision = GemmPrecision::float32;  ///< convolution GEMM scalar

  void validate() const {
    if (batch_size == 0) throw ArgumentError("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_oa;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::optional<std::size_t> best_epoch;  ///< epoch whose snapshot was kept
  double best_validation_oa = 0.0;
};

/// Fraction of `indices` whose prediction equals the label.
inline double accuracy(const Model& model, const PatchDataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ArgumentError("accuracy of an empty split");
  const auto predicted = model.predict(data, indices);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) hits += predicted[i] == data.labels[indices[i]];
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

inline void require_model_layout(const Model& model, const PatchDataset& data) {
  if (data.channels != model.input_channels() || data.is_complex != model.complex_mode() ||
      data.patch_size != model.patch_size()) {
    throw ArgumentError("dataset layout (" + std::to_string(data.channels) + " channels, " +
                        (data.is_complex ? "complex" : "real") + ") does not match the model");
  }
  for (auto label : data.labels) {
    if (label >= model.class_count()) throw ArgumentError("dataset label exceeds the model class count");
  }
}

/// Retrains `model` from its current weights with Adam on cross-entropy.
/// Fits input normalization first when configured. With select_best and a
/// non-empty validation split, the best-validation-OA snapshot is kept.
inline TrainHistory train(Model& model, const PatchDataset& data, const TrainConfig& config) {
  config.validate();
  const ScopedGemmPrecision precision(config.precision);
  require_model_layout(model, data);
  std::vector<std::size_t> order = data.indices(Split::train);
  if (order.empty()) throw ArgumentError("training split is empty");
  const std::vector<std::size_t> validation = data.indices(Split::validation);

  TrainHistory history;
  if (config.epochs == 0) return history;
  model.set_normalizer(training_normalizer(data, config.normalize));

  Rng rng(mix_seed(config.seed, 0x7261696eULL));
  AdamState adam;
  std::optional<std::vector<Tensor>> best;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0, batch_index = 0;
    for (auto indices : shuffled_batches(order, config.batch_size, rng)) {
      ++batch_index;
      const Batch batch = make_batch(data, indices, model.normalizer());
      const double loss = gradient_step(
          model.parameters(), adam, config.learning_rate,
          [&](std::span<const Tensor> params) {
            return cross_entropy_softmax(model.scores(batch, params), batch.labels);
          },
          epoch, batch_index);
      loss_sum += loss * static_cast<double>(indices.size());
      seen += indices.size();
    }
    EpochRecord record{epoch, loss_sum / static_cast<double>(seen), std::nullopt};
    if (!validation.empty()) {
      record.validation_oa = accuracy(model, data, validation);
      if (config.select_best && (!history.best_epoch || *record.validation_oa > history.best_validation_oa)) {
        history.best_epoch = epoch;
        history.best_validation_oa = *record.validation_oa;
        best = model.parameters();
      }
    }
    if (config.log) {
      *config.log << "epoch=" << epoch << " loss=" << record.train_loss;
      if (record.validation_oa) *config.log << " val_oa=" << *record.validation_oa;
      *config.log << '\n';
    }
    history.epochs.push_back(record);
  }
  if (best) model.parameters() = std::move(*best);
  return history;
}

struct Evaluation {
  ConfusionMatrix confusion;
  Metrics metrics;
};

inline Evaluation evaluate(const Model& model, const PatchDataset& data, Split split) {
  require_model_layout(model, data);
  const auto indices = data.indices(split);
  if (indices.empty()) throw ArgumentError("evaluation split is empty");
  const auto predicted = model.predict(data, indices);
  ConfusionMatrix cm(model.class_count());
  for (std::size_t i = 0; i < indices.size(); ++i) cm.accumulate(data.labels[indices[i]], predicted[i]);
  return {cm, compute_metrics(cm)};
}

/// Labels every pixel (1..K) from its mirror-padded patch.
inline LabelMap classify_map(const Model& model, const CoherencyImage& image) {
  if (image.height == 0 || image.width == 0) throw ArgumentError("image must not be empty");
  if (image.data.size() != image.height * image.width * kCoherencyChannels) {
    throw ArgumentError("image does not carry " + std::to_string(kCoherencyChannels) + " coherency channels");
  }
  LabelMap all(image.height, image.width);
  std::fill(all.labels.begin(), all.labels.end(), std::uint16_t{1});
  PatchDataset patches = extract_patches(image, all, model.patch_size());
  patches = to_input_layout(patches, model.complex_mode() ? kCoherencyChannels : model.input_channels());
  if (patches.channels != model.input_channels()) throw ArgumentError("image channels do not match the model");
  std::vector<std::size_t> indices(patches.count);
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  const auto predicted = model.predict(patches, indices);
  LabelMap out(image.height, image.width);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto [row, col] = patches.centers[i];
    out.labels[row * image.width + col] = static_cast<std::uint16_t>(predicted[i] + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file: "DASM", u32 version, u8 complex flag, u32-length-prefixed
// architecture text, then u64-length-prefixed float64 tensors: the layer
// parameters in declaration order followed by the input shift and scale.

inline constexpr std::uint32_t kModelFormatVersion = 1;

inline std::string encode_model(const Model& model) {
  std::string out = "DASM";
  detail::put_u32(out, kModelFormatVersion);
  out.push_back(model.complex_mode() ? 1 : 0);
  const std::string text = model.architecture().to_text();
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  auto put_tensor = [&](std::span<const double> values) {
    detail::put_u64(out, values.size());
    for (double v : values) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  };
  for (const auto& p : model.parameters()) put_tensor(p.values());
  put_tensor(model.normalizer().shift);
  put_tensor(model.normalizer().scale);
  return out;
}

inline Model decode_model(const std::string& bytes) {
  detail::ByteReader in(bytes);
  in.expect_magic("DASM", "model");
  const std::size_t version_at = in.position();
  if (in.u32() != kModelFormatVersion) throw FormatError("unsupported model format version", version_at);
  const std::size_t flag_at = in.position();
  const std::uint8_t flag = in.u8();
  if (flag > 1) throw FormatError("complex flag must be 0 or 1", flag_at);
  const std::uint32_t text_size = in.u32();
  const std::size_t text_at = in.position();
  const DerivedArchitecture arch = DerivedArchitecture::parse(in.bytes(text_size));
  if (arch.complex_mode != (flag == 1)) throw FormatError("complex flag disagrees with the architecture", text_at);

  auto read_tensor = [&]() {
    const std::size_t at = in.position();
    const std::uint64_t n = in.u64();
    if (n == 0 || n > in.remaining() / 8) throw FormatError("tensor length exceeds the file", at);
    std::vector<double> values(n);
    for (auto& v : values) v = in.f64();
    return std::pair{values, at};
  };

  const std::size_t parts = arch.complex_mode ? 2 : 1;
  std::vector<std::vector<double>> raw;
  std::vector<std::size_t> offsets;
  for (std::size_t k = 0; k < kLayerCount * 2 * parts + 2; ++k) {
    auto [values, at] = read_tensor();
    raw.push_back(std::move(values));
    offsets.push_back(at);
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after model", in.position());

  // Input width from the first kernel, pooled grid from the first fully
  // connected kernel; the stored patch is the largest odd size with that grid.
  const std::size_t k0 = arch.kernels[0].h * arch.kernels[0].w * arch.depths[0];
  if (raw[0].size() % k0 != 0) throw FormatError("first kernel size does not fit the architecture", offsets[0]);
  const std::size_t input_channels = raw[0].size() / k0;
  const std::size_t fc1 = kConvLayerCount * 2 * parts;
  const std::size_t fc1_den = arch.depths[kConvLayerCount] * arch.depths[kConvLayerCount - 1];
  const std::size_t grid_area = raw[fc1].size() / fc1_den;
  std::size_t side = 1;
  while (side * side < grid_area) ++side;
  if (raw[fc1].size() % fc1_den != 0 || side * side != grid_area) {
    throw FormatError("fully connected kernel does not fit the architecture", offsets[fc1]);
  }
  const std::size_t patch_size = side * 4 + 3;

  const auto shapes = Model::kernel_shapes(arch, input_channels, patch_size);
  std::vector<Tensor> params;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    for (std::size_t p = 0; p < 2 * parts; ++p) {
      const std::size_t k = l * 2 * parts + p;
      const Shape shape = p < parts ? shapes[l] : Shape{shapes[l][0]};
      if (raw[k].size() != shape_size(shape)) throw FormatError("tensor length does not fit the architecture", offsets[k]);
      params.emplace_back(shape, std::move(raw[k]));
    }
  }
  const std::size_t norm_at = kLayerCount * 2 * parts;
  if (raw[norm_at].size() != input_channels || raw[norm_at + 1].size() != input_channels) {
    throw FormatError("input normalization length does not fit the model", offsets[norm_at]);
  }
  InputNormalizer norm{arch.complex_mode, std::move(raw[norm_at]), std::move(raw[norm_at + 1])};
  try {
    return Model(arch, input_channels, patch_size, std::move(params), std::move(norm));
  } catch (const Error& e) {
    throw FormatError(e.what(), 0);
  }
}

inline void write_model(const std::string& path, const Model& model) { detail::write_file(path, encode_model(model)); }
inline Model read_model(const std::string& path) { return decode_model(detail::read_file(path)); }

}  // namespace dasnas
