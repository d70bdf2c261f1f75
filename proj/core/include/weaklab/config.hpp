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

// Flat key = value run configuration. Every tunable of the study lives here;
// `weaklab grid --config FILE` and the acceptance suite both read this format.
//
//   # comment
//   seeds = 1,2,3
//   max_epochs = 150
//   max_epochs.10s = 20      # per training-duration override
//
// Keys taking a duration suffix: max_epochs, patience, steps_per_epoch.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "weaklab/autodiff.hpp"
#include "weaklab/common.hpp"
#include "weaklab/synthgen.hpp"

namespace weaklab {

enum class Method { classifier, triplet, prototypical };

inline constexpr std::array<Method, 3> kAllMethods = {Method::classifier, Method::triplet, Method::prototypical};

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct Budget {
  int max_epochs = 150;
  int patience = 15;
  int steps_per_epoch = 0;  // 0: one pass over the training segments
};

struct Config {
  std::uint64_t master_seed = 1;
  synth::SplitCounts counts = synth::kDeskCounts;
  std::vector<Variant> variants = {Variant::ms200, Variant::waa};
  std::vector<Method> methods = {kAllMethods.begin(), kAllMethods.end()};
  std::vector<SegDur> train_segs = {kAllSegDurs.begin(), kAllSegDurs.end()};
  std::vector<SegDur> test_segs = {kAllSegDurs.begin(), kAllSegDurs.end()};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int workers = 1;

  ad::AdamConfig adam;
  double margin = 0.5;
  int m_support = 5;
  int m_query = 5;
  int triplet_batch = 64;
  int bce_batch = 64;
  int head_batch = 64;

  // Indexed by SegDur of the training segments.
  std::array<Budget, 3> budget{};
  Budget head_budget{};
  double min_delta = 1e-4;
  double threshold = 0.5;

  // Batches touching more blocks than this are differentiated in two passes
  // (embeddings first, then per-chunk vector-Jacobian products).
  int max_tape_blocks = 512;
  // Caps the training segments used for centroids during validation; 0 = all.
  int centroid_max_segments = 0;

  const Budget& budget_for(SegDur d) const { return budget[static_cast<std::size_t>(index_of(d))]; }

  // Sets one key; throws Error on unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  // Canonical text: parse(to_text()) reproduces the config exactly.
  std::string to_text() const;

  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);
};

}  // namespace weaklab
