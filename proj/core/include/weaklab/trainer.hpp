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

// One training run of the study and its evaluation.
//
// classifier:   E and G trained jointly on BCE, early stopping on
//               validation macro-F.
// triplet,
// prototypical: E trained alone, early stopping on validation centroid
//               accuracy; then E is frozen and G is fit on its embeddings
//               with BCE (early stopping on validation macro-F).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "weaklab/config.hpp"
#include "weaklab/dsp.hpp"
#include "weaklab/evalmetrics.hpp"
#include "weaklab/nets.hpp"

namespace weaklab::harness {

// Standardized segments of one duration cut into network blocks.
struct SplitData {
  int blocks_per_segment = 0;
  std::vector<float> blocks;  // [segments * blocks_per_segment, 20, 64]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> segment_blocks(std::size_t i) const;
  std::vector<float> gather(std::span<const int> segments) const;
  std::vector<float> targets() const;  // one-hot [segments x 10]
};

dsp::FeatureStats feature_stats(const std::vector<dsp::LogMelFeature>& features);
SplitData make_split_data(std::vector<dsp::LogMelFeature> features, std::span<const int> labels, const dsp::FeatureStats& stats);

struct RunConfig {
  Variant variant = Variant::waa;
  Method method = Method::classifier;
  SegDur train_seg = SegDur::s1;
  std::uint64_t seed = 1;
};

std::string run_id(const RunConfig& rc);

struct Model {
  Method method = Method::classifier;
  nets::EmbeddingNet<float> embed;
  nets::ClassifierHead<float> head;
  dsp::FeatureStats stats;

  // Triplet embeddings live on the unit sphere.
  bool normalized() const { return method == Method::triplet; }
  void init(std::uint64_t seed);

  std::vector<float> embeddings(const SplitData& d, int max_blocks = 512);
  std::vector<float> probabilities(const SplitData& d, int max_blocks = 512);

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  // Plain-text summary: architecture constants and standardization stats.
  std::string card() const;
};

struct EpochRecord {
  std::string phase;  // "joint", "embedding" or "head"
  int epoch = 0;
  double loss = 0.0;    // mean training loss over the epoch's steps
  double metric = 0.0;  // validation metric driving early stopping
  bool best = false;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> history;
  double valid_centroid_accuracy = 0.0;
};

// Training data for a run: train and valid segments at the run's training
// duration, standardized with the train split's statistics.
struct RunData {
  dsp::FeatureStats stats;
  SplitData train;
  SplitData valid;
};

RunData load_run_data(const std::filesystem::path& corpus_dir, SegDur train_seg);

// Adds to the parameter gradients the gradient of one training batch drawn
// with `seed` and returns its loss. Batches bigger than cfg.max_tape_blocks
// are differentiated in chunks.
double batch_gradient(Model& m, const SplitData& train, const Config& cfg, std::uint64_t seed);

// `log`, when given, receives one line per epoch.
TrainResult train_run(const RunConfig& rc, const Config& cfg, const RunData& data, std::ostream* log = nullptr);

struct EvalResult {
  eval::FMeasure f;
  std::vector<float> probs;
};

EvalResult eval_run(Model& model, const SplitData& test, double threshold, int max_blocks = 512);

// Loads eval-split segments of `test_seg`, standardized with the model's stats.
SplitData load_test_data(const std::filesystem::path& corpus_dir, SegDur test_seg, const dsp::FeatureStats& stats,
                         Split split = Split::eval);

// Centroids from `train`, accuracy on `valid`. `max_train` caps the
// training segments used (0 = all).
double validation_centroid_accuracy(Model& model, const SplitData& train, const SplitData& valid, int max_train,
                                    int max_blocks = 512);

std::string format_epoch(const EpochRecord& r);

}  // namespace weaklab::harness
