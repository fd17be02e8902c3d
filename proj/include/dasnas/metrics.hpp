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

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "dasnas/errors.hpp"

namespace dasnas {

/// counts[i][j]: samples of true class i predicted as class j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw ArgumentError("confusion matrix needs at least one class");
  }

  std::size_t classes() const noexcept { return classes_; }

  void accumulate(std::size_t truth, std::size_t predicted) {
    if (truth >= classes_ || predicted >= classes_) {
      throw ArgumentError("label pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                          ") outside [0, " + std::to_string(classes_) + ")");
    }
    ++counts_[truth * classes_ + predicted];
  }

  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  void set(std::size_t truth, std::size_t predicted, std::uint64_t count) {
    counts_.at(truth * classes_ + predicted) = count;
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  /// Elementwise sum; used to combine matrices accumulated separately.
  void merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw DimensionError("cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix cm(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw DimensionError("confusion matrix rows must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) cm.set(i, j, rows[i][j]);
    }
    return cm;
  }

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

struct Metrics {
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_accuracy;
};

/// OA = trace / N; AA = mean_i H[i][i] / rowsum_i;
/// Kappa = (OA − P) / (1 − P) with P = Σ_i rowsum_i · colsum_i / N².
inline Metrics compute_metrics(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes();
  const double n = static_cast<double>(cm.total());
  if (cm.total() == 0) throw ArgumentError("metrics of an empty confusion matrix");
  Metrics m;
  double correct = 0.0, chance = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row += static_cast<double>(cm.at(i, j));
      col += static_cast<double>(cm.at(j, i));
    }
    if (row == 0.0) throw UndefinedMetricError("class " + std::to_string(i) + " has no samples; AA is undefined");
    const double diag = static_cast<double>(cm.at(i, i));
    correct += diag;
    chance += row * col;
    m.per_class_accuracy.push_back(diag / row);
  }
  m.overall_accuracy = correct / n;
  double aa = 0.0;
  for (double a : m.per_class_accuracy) aa += a;
  m.average_accuracy = aa / static_cast<double>(c);
  const double p = chance / (n * n);
  if (p == 1.0) {
    if (m.overall_accuracy != 1.0) throw UndefinedMetricError("kappa undefined: chance agreement is 1");
    m.kappa = 1.0;
  } else {
    m.kappa = (m.overall_accuracy - p) / (1.0 - p);
  }
  return m;
}

/// `OA=<f> AA=<f> Kappa=<f>` followed by one `class<i>=<f>` line per class
/// (1-based class numbers).
inline std::string format_report(const Metrics& m) {
  char line[128];
  std::snprintf(line, sizeof line, "OA=%.6f AA=%.6f Kappa=%.6f\n", m.overall_accuracy, m.average_accuracy, m.kappa);
  std::string out = line;
  for (std::size_t i = 0; i < m.per_class_accuracy.size(); ++i) {
    std::snprintf(line, sizeof line, "class%zu=%.6f\n", i + 1, m.per_class_accuracy[i]);
    out += line;
  }
  return out;
}

}  // namespace dasnas
