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

// Two-phase one-shot search: kernel sizes first with depths held uniform,
// then depths with the chosen kernels fixed; followed by top-1 derivation
// and best-of-several selection by retrained validation accuracy.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dasnas/architecture.hpp"
#include "dasnas/errors.hpp"
#include "dasnas/model.hpp"
#include "dasnas/polsar.hpp"
#include "dasnas/supernet.hpp"
#include "dasnas/training.hpp"

namespace dasnas {

/// Raw architecture parameters, one vector per layer.
struct ArchParams {
  std::vector<std::vector<double>> alpha;  ///< sized |kernel_sizes|
  std::vector<std::vector<double>> beta;   ///< sized |depths|

  static ArchParams zeros(const SearchSpaceSpec& spec) {
    ArchParams p;
    for (const auto& layer : spec.layers) {
      p.alpha.emplace_back(layer.kernel_sizes.size(), 0.0);
      p.beta.emplace_back(layer.depths.size(), 0.0);
    }
    return p;
  }

  void validate(const SearchSpaceSpec& spec) const {
    if (alpha.size() != spec.layers.size() || beta.size() != spec.layers.size()) {
      throw DimensionError("architecture parameters need one vector per layer");
    }
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      if (alpha[l].size() != spec.layers[l].kernel_sizes.size() || beta[l].size() != spec.layers[l].depths.size()) {
        throw DimensionError("architecture parameter length mismatch in layer " + std::to_string(l + 1));
      }
    }
  }

  friend bool operator==(const ArchParams&, const ArchParams&) = default;
};

struct SearchConfig {
  std::size_t epochs_alpha = 200;
  std::size_t epochs_beta = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  double gamma = 1e-3;
  std::uint64_t seed = 0;
  Mixing activation = Mixing::sparsemax;
  bool complex_mode = false;
  bool warm_start = false;         ///< depth phase starts from the kernel-phase weights
  bool normalize = true;           ///< fit input normalization on the training split
  std::size_t select_epochs = 50;  ///< retraining budget per run in repeat_search
  std::ostream* log = nullptr;
  GemmPrecision precision = GemmPrecision::float32;  ///< convolution GEMM scalar

  void validate() const {
    if (batch_size == 0) throw ArgumentError("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be positive");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ArgumentError("gamma must be non-negative");
  }
};

struct PhaseResult {
  std::vector<std::vector<double>> raw;  ///< searched vectors after the final epoch
  double final_loss = 0.0;               ///< mean objective of the last epoch (0 without epochs)
  std::vector<Tensor> weights;           ///< supernet weights after the final epoch
};

/// Index of the largest mixing weight; ties go to the lowest index.
inline std::size_t top_candidate(std::span<const double> raw, Mixing mixing) {
  const auto w = mixing_weights(raw, mixing);
  std::size_t best = 0;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i] > w[best]) best = i;
  return best;
}

/// `epoch=<e> phase=<a|b> loss=<f> layer<i>.weights=<w,...>` with the mixing
/// weights of the searched vectors.
inline std::string format_phase_log(std::size_t epoch, Phase phase, double loss,
                                    const std::vector<std::vector<double>>& raw, Mixing mixing) {
  std::ostringstream out;
  out << std::setprecision(9) << "epoch=" << epoch << " phase=" << to_string(phase) << " loss=" << loss;
  for (std::size_t l = 0; l < raw.size(); ++l) {
    out << " layer" << (l + 1) << ".weights=";
    const auto w = mixing_weights(raw[l], mixing);
    for (std::size_t i = 0; i < w.size(); ++i) out << (i ? "," : "") << w[i];
  }
  return out.str();
}

/// Trains one supernet phase. The kernel phase mixes depths with the fixed
/// `fixed.beta`; the depth phase uses the top-1 kernel of `fixed.alpha`. The
/// searched vectors start at zero and are updated jointly with the weights.
/// `warm_weights` (depth phase only) are kernel-phase weights to start from.
inline PhaseResult search_phase(Phase which, const SearchSpaceSpec& spec, const PatchDataset& data,
                                const SearchConfig& config, const ArchParams& fixed,
                                std::span<const Tensor> warm_weights = {}) {
  spec.validate();
  config.validate();
  fixed.validate(spec);
  const ScopedGemmPrecision precision(config.precision);
  std::vector<std::size_t> order = data.indices(Split::train);
  if (order.empty()) throw ArgumentError("search needs a non-empty training split");
  if (data.is_complex != config.complex_mode) throw ArgumentError("dataset layout does not match complex_mode");
  for (auto label : data.labels)
    if (label >= spec.class_count) throw ArgumentError("dataset label exceeds the class count");

  const std::uint64_t stream = which == Phase::alpha ? 1 : 2;
  std::vector<std::size_t> chosen;
  if (which == Phase::beta)
    for (const auto& a : fixed.alpha) chosen.push_back(top_candidate(a, config.activation));
  Supernet net(spec, which, data.channels, data.is_complex, chosen, mix_seed(config.seed, stream), data.patch_size);

  if (which == Phase::beta && !warm_weights.empty()) {
    const Supernet previous(spec, Phase::alpha, data.channels, data.is_complex, {}, 0, data.patch_size);
    if (warm_weights.size() != previous.parameters().size()) throw DimensionError("warm-start weights do not fit");
    const std::size_t parts = data.is_complex ? 2 : 1;
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      for (std::size_t p = 0; p < parts; ++p) {
        net.parameters()[net.bank_slot(l, 0) + p] = warm_weights[previous.bank_slot(l, chosen[l]) + p].detach();
        net.parameters()[net.bias_slot(l) + p] = warm_weights[previous.bias_slot(l) + p].detach();
      }
    }
  }

  // Fixed mixing weights of the other phase.
  std::vector<Tensor> fixed_weights;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const auto& v = which == Phase::alpha ? fixed.beta[l] : fixed.alpha[l];
    fixed_weights.push_back(mixing_weights(Tensor({v.size()}, v), config.activation));
  }

  const auto& searched_lists = which == Phase::alpha ? fixed.alpha : fixed.beta;
  // params = network weights followed by the searched raw vectors
  std::vector<Tensor> params = net.parameters();
  const std::size_t weight_count = params.size();
  for (const auto& v : searched_lists) params.emplace_back(Shape{v.size()}, 0.0);

  auto raw_vectors = [&]() {
    std::vector<std::vector<double>> out;
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      const auto v = params[weight_count + l].values();
      out.emplace_back(v.begin(), v.end());
    }
    return out;
  };

  const InputNormalizer norm = training_normalizer(data, config.normalize);
  const std::size_t epochs = which == Phase::alpha ? config.epochs_alpha : config.epochs_beta;
  Rng rng(mix_seed(config.seed, stream + 16));
  AdamState adam;
  PhaseResult result;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0, batch_index = 0;
    for (auto indices : shuffled_batches(order, config.batch_size, rng)) {
      ++batch_index;
      const Batch batch = make_batch(data, indices, norm);
      const double loss = gradient_step(
          params, adam, config.learning_rate,
          [&](std::span<const Tensor> p) {
            std::vector<Tensor> searched;
            for (std::size_t l = 0; l < kLayerCount; ++l) {
              searched.push_back(mixing_weights(p[weight_count + l], config.activation));
              for (double w : searched.back().values())
                if (!std::isfinite(w)) throw DivergenceError("non-finite mixing weights", epoch, batch_index);
            }
            const auto weights = p.first(weight_count);
            const auto& alpha_w = which == Phase::alpha ? searched : fixed_weights;
            const auto& beta_w = which == Phase::alpha ? fixed_weights : searched;
            Tensor loss = cross_entropy_softmax(net.scores(batch, weights, alpha_w, beta_w), batch.labels);
            if (config.gamma > 0.0) {
              Tensor reg = l1norm(p[weight_count]);
              for (std::size_t l = 1; l < kLayerCount; ++l) reg = add(reg, l1norm(p[weight_count + l]));
              loss = add(loss, scale(reg, config.gamma));
            }
            return loss;
          },
          epoch, batch_index);
      loss_sum += loss * static_cast<double>(indices.size());
      seen += indices.size();
    }
    result.final_loss = loss_sum / static_cast<double>(seen);
    if (config.log) *config.log << format_phase_log(epoch, which, result.final_loss, raw_vectors(), config.activation) << '\n';
  }
  result.raw = raw_vectors();
  result.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(weight_count));
  return result;
}

/// Top-1 candidate per layer. Only k = 1 is supported.
inline DerivedArchitecture derive_architecture(const ArchParams& arch, const SearchSpaceSpec& spec, std::size_t k = 1,
                                               Mixing mixing = Mixing::sparsemax, bool complex_mode = false) {
  if (k != 1) throw UnsupportedError("only top-1 derivation is supported, got k=" + std::to_string(k));
  spec.validate();
  arch.validate(spec);
  DerivedArchitecture out;
  out.class_count = spec.class_count;
  out.complex_mode = complex_mode;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    out.kernels.push_back(spec.layers[l].kernel_sizes[top_candidate(arch.alpha[l], mixing)]);
    out.depths.push_back(spec.layers[l].depths[top_candidate(arch.beta[l], mixing)]);
  }
  return out;
}

struct DasResult {
  ArchParams params;
  DerivedArchitecture architecture;
  double alpha_loss = 0.0;
  double beta_loss = 0.0;
};

/// Kernel phase, hard top-1 kernels, depth phase, derivation.
inline DasResult run_das(const SearchSpaceSpec& spec, const PatchDataset& data, const SearchConfig& config) {
  ArchParams params = ArchParams::zeros(spec);
  const PhaseResult a = search_phase(Phase::alpha, spec, data, config, params);
  params.alpha = a.raw;
  const PhaseResult b = search_phase(Phase::beta, spec, data, config, params,
                                     config.warm_start ? std::span<const Tensor>(a.weights) : std::span<const Tensor>{});
  params.beta = b.raw;
  DasResult result{params, derive_architecture(params, spec, 1, config.activation, config.complex_mode), a.final_loss,
                   b.final_loss};
  if (config.log) *config.log << "derived " << result.architecture.summary() << '\n';
  return result;
}

struct SearchRun {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::optional<DerivedArchitecture> architecture;  ///< empty when the run diverged
  double validation_oa = 0.0;
  std::string error;
};

struct RepeatResult {
  DerivedArchitecture best;
  std::size_t best_index = 0;
  std::vector<SearchRun> runs;
  std::optional<Model> best_model;  ///< the best run's retrained model
};

using SearchRunner = std::function<DasResult(const SearchSpaceSpec&, const PatchDataset&, const SearchConfig&)>;

/// Runs the search with seeds seed, seed+1, ..., retrains each result for
/// `select_epochs` and keeps the highest validation OA (ties: earliest run).
/// Diverged runs are logged and skipped; if every run diverges the last
/// divergence is rethrown.
inline RepeatResult repeat_search(const SearchSpaceSpec& spec, const PatchDataset& data, const SearchConfig& config,
                                  std::size_t repeats, const SearchRunner& runner = run_das) {
  if (repeats == 0) throw ArgumentError("repeats must be at least 1");
  if (data.indices(Split::validation).empty()) throw ArgumentError("repeat_search needs a validation split");
  RepeatResult result;
  std::exception_ptr last_failure;
  std::optional<double> best_oa;
  for (std::size_t r = 0; r < repeats; ++r) {
    SearchConfig run_config = config;
    run_config.seed = config.seed + r;
    SearchRun run{r, run_config.seed, std::nullopt, 0.0, {}};
    try {
      const DasResult das = runner(spec, data, run_config);
      Model model = Model::build(das.architecture, data.channels, run_config.seed, data.patch_size);
      TrainConfig retrain{config.select_epochs, config.batch_size, config.learning_rate, run_config.seed, true,
                          config.normalize, nullptr, config.precision};
      const TrainHistory history = train(model, data, retrain);
      run.architecture = das.architecture;
      run.validation_oa =
          history.best_epoch ? history.best_validation_oa : accuracy(model, data, data.indices(Split::validation));
      if (!best_oa || run.validation_oa > *best_oa) {
        best_oa = run.validation_oa;
        result.best = das.architecture;
        result.best_index = r;
        result.best_model = std::move(model);
      }
    } catch (const DivergenceError& e) {
      run.error = e.what();
      last_failure = std::current_exception();
    }
    if (config.log) {
      *config.log << "run=" << r << " seed=" << run.seed;
      if (run.architecture) {
        *config.log << " arch=" << run.architecture->summary() << " val_oa=" << std::setprecision(9)
                    << run.validation_oa << '\n';
      } else {
        *config.log << " error=" << run.error << '\n';
      }
    }
    result.runs.push_back(std::move(run));
  }
  if (!best_oa) std::rethrow_exception(last_failure);
  if (config.log) *config.log << "best run=" << result.best_index << " arch=" << result.best.summary() << '\n';
  return result;
}

}  // namespace dasnas
