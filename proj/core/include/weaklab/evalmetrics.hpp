/*
 * Copyright 2026 The weaklab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Nearest-centroid validation of embeddings, multi-label F-measure, and the
// patience rule used for early stopping.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "weaklab/common.hpp"

namespace weaklab::eval {

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr double kMinImprovement = 1e-4;

struct CentroidSet {
  int dim = 0;
  std::vector<std::vector<double>> centroids;  // [class][dim]
  std::vector<long> counts;
};

// embeddings: row-major [labels.size() x dim].
CentroidSet class_centroids(std::span<const float> embeddings, std::span<const int> labels, int dim,
                            int num_classes = kNumClasses);

// Fraction of rows whose nearest centroid (squared Euclidean, ties to the
// lowest class index) is their own class.
double centroid_accuracy(std::span<const float> embeddings, std::span<const int> labels, const CentroidSet& centroids);

int nearest_centroid(std::span<const float> point, const CentroidSet& centroids);

struct TaggingResult {
  std::array<float, kNumClasses> probs{};
  std::array<bool, kNumClasses> predicted{};
  std::array<float, kNumClasses> target{};
};

std::vector<TaggingResult> make_tagging_results(std::span<const float> probs, std::span<const float> targets,
                                                double threshold = kDefaultThreshold);

struct FMeasure {
  std::array<double, kNumClasses> per_class{};  // fractions in [0, 1]
  double macro = 0.0;
  std::array<long, kNumClasses> tp{}, fp{}, fn{};
};

FMeasure f_measure(std::span<const TaggingResult> results);
// probs and targets row-major [clips x 10].
FMeasure f_measure(std::span<const float> probs, std::span<const float> targets, double threshold = kDefaultThreshold);

double f_from_counts(long tp, long fp, long fn);

struct StopDecision {
  bool stop = false;
  int stop_epoch = -1;  // epoch at which the rule fired, -1 if it did not
  int best_epoch = 0;
  double best_value = 0.0;
};

// Walks the history; an epoch improves on the best only by more than
// min_delta. Stops once `patience` epochs pass without improvement.
StopDecision early_stop(std::span<const double> history, int patience, double min_delta = kMinImprovement);

class EarlyStopper {
 public:
  explicit EarlyStopper(int patience, double min_delta = kMinImprovement);

  // Returns true when this value is the new best.
  bool update(double value);
  bool should_stop() const { return stopped_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }
  int epochs_seen() const { return epoch_; }

 private:
  int patience_;
  double min_delta_;
  int epoch_ = 0;
  int best_epoch_ = -1;
  double best_ = 0.0;
  bool stopped_ = false;
};

}  // namespace weaklab::eval
