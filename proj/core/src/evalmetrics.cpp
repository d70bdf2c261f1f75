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

#include "weaklab/evalmetrics.hpp"

#include <string>

namespace weaklab::eval {

CentroidSet class_centroids(std::span<const float> embeddings, std::span<const int> labels, int dim, int num_classes) {
  if (dim <= 0 || embeddings.size() != labels.size() * static_cast<std::size_t>(dim)) {
    throw Error("class_centroids: embeddings do not match labels x dim");
  }
  CentroidSet cs;
  cs.dim = dim;
  cs.centroids.assign(static_cast<std::size_t>(num_classes), std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  cs.counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 0 || k >= num_classes) throw Error("class_centroids: label " + std::to_string(k) + " out of range");
    auto& c = cs.centroids[static_cast<std::size_t>(k)];
    for (int q = 0; q < dim; ++q) c[q] += embeddings[i * dim + q];
    ++cs.counts[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < num_classes; ++k) {
    if (cs.counts[k] == 0) throw Error("class_centroids: class " + std::to_string(k) + " has no embeddings");
    for (double& v : cs.centroids[k]) v /= static_cast<double>(cs.counts[k]);
  }
  return cs;
}

int nearest_centroid(std::span<const float> point, const CentroidSet& centroids) {
  if (point.size() != static_cast<std::size_t>(centroids.dim)) throw Error("nearest_centroid: dimension mismatch");
  int best = 0;
  double best_d = 0.0;
  for (std::size_t k = 0; k < centroids.centroids.size(); ++k) {
    double d = 0.0;
    for (int q = 0; q < centroids.dim; ++q) {
      const double diff = point[q] - centroids.centroids[k][q];
      d += diff * diff;
    }
    // Strict comparison keeps the lowest index on ties.
    if (k == 0 || d < best_d) {
      best = static_cast<int>(k);
      best_d = d;
    }
  }
  return best;
}

double centroid_accuracy(std::span<const float> embeddings, std::span<const int> labels, const CentroidSet& centroids) {
  const auto dim = static_cast<std::size_t>(centroids.dim);
  if (dim == 0 || embeddings.size() != labels.size() * dim) throw Error("centroid_accuracy: dimension mismatch");
  if (labels.empty()) throw Error("centroid_accuracy: no embeddings");
  long hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (nearest_centroid(embeddings.subspan(i * dim, dim), centroids) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<TaggingResult> make_tagging_results(std::span<const float> probs, std::span<const float> targets, double threshold) {
  if (probs.size() != targets.size() || probs.size() % kNumClasses != 0) throw Error("make_tagging_results: shape mismatch");
  std::vector<TaggingResult> out(probs.size() / kNumClasses);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int k = 0; k < kNumClasses; ++k) {
      out[i].probs[k] = probs[i * kNumClasses + k];
      out[i].target[k] = targets[i * kNumClasses + k];
      out[i].predicted[k] = out[i].probs[k] >= threshold;
    }
  }
  return out;
}

double f_from_counts(long tp, long fp, long fn) {
  const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

FMeasure f_measure(std::span<const TaggingResult> results) {
  if (results.empty()) throw Error("f_measure: no results");
  FMeasure f;
  for (const auto& r : results) {
    for (int k = 0; k < kNumClasses; ++k) {
      const bool truth = r.target[k] >= 0.5f;
      if (r.predicted[k] && truth) ++f.tp[k];
      else if (r.predicted[k]) ++f.fp[k];
      else if (truth) ++f.fn[k];
    }
  }
  double sum = 0.0;
  for (int k = 0; k < kNumClasses; ++k) {
    f.per_class[k] = f_from_counts(f.tp[k], f.fp[k], f.fn[k]);
    sum += f.per_class[k];
  }
  f.macro = sum / kNumClasses;
  return f;
}

FMeasure f_measure(std::span<const float> probs, std::span<const float> targets, double threshold) {
  const auto results = make_tagging_results(probs, targets, threshold);
  return f_measure(results);
}

StopDecision early_stop(std::span<const double> history, int patience, double min_delta) {
  if (history.empty()) throw Error("early_stop: empty history");
  EarlyStopper s(patience, min_delta);
  StopDecision d;
  for (std::size_t e = 0; e < history.size(); ++e) {
    s.update(history[e]);
    if (s.should_stop()) {
      d.stop = true;
      d.stop_epoch = static_cast<int>(e);
      break;
    }
  }
  d.best_epoch = s.best_epoch();
  d.best_value = s.best_value();
  return d;
}

EarlyStopper::EarlyStopper(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {
  if (patience <= 0) throw Error("EarlyStopper: patience must be positive");
}

bool EarlyStopper::update(double value) {
  const int e = epoch_++;
  if (best_epoch_ < 0 || value > best_ + min_delta_) {
    best_ = value;
    best_epoch_ = e;
    return true;
  }
  if (e - best_epoch_ >= patience_) stopped_ = true;
  return false;
}

}  // namespace weaklab::eval
