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

// On-disk corpus for one dataset variant:
//
//   <dir>/manifest.tsv                 one record per clip
//   <dir>/segments.tsv                 clip_id, class_id, seg, start_sample, overlap
//   <dir>/features/<split>_<seg>.wlf   one log-mel blob per clip, manifest order
//   <dir>/corpus.done                  inputs the corpus was built from
//
// Features are raw log-mel; standardization happens per run from the
// training split it trains on.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "weaklab/dsp.hpp"
#include "weaklab/synthgen.hpp"

namespace weaklab::harness {

std::filesystem::path variant_dir(const std::filesystem::path& out, Variant v);

std::vector<synth::SceneSpec> corpus_specs(Variant v, synth::SplitCounts counts, std::uint64_t master_seed);

// The one segment kept per clip and duration. A pure function of the
// manifest record, shared by both variants so they cut the same windows.
synth::Segment corpus_segment(const synth::SceneSpec& spec, SegDur d);

// Manifest (+ segments table, + optional WAV files) for a variant.
void write_synth_outputs(const std::filesystem::path& dir, std::span<const synth::SceneSpec> specs, bool export_wav,
                         int workers = 1);

// Feature cache from an existing manifest.
void write_feature_cache(const std::filesystem::path& dir, int workers = 1, std::ostream* log = nullptr);

// Both steps; a no-op when corpus.done already records these inputs.
void build_corpus(const std::filesystem::path& dir, Variant v, synth::SplitCounts counts, std::uint64_t master_seed,
                  int workers = 1, std::ostream* log = nullptr);

bool corpus_ready(const std::filesystem::path& dir, Variant v, synth::SplitCounts counts, std::uint64_t master_seed);

std::vector<synth::SceneSpec> load_split_specs(const std::filesystem::path& dir, Split split);

std::filesystem::path feature_path(const std::filesystem::path& dir, Split split, SegDur d);
std::vector<dsp::LogMelFeature> load_features(const std::filesystem::path& dir, Split split, SegDur d);

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
// rethrown on the caller after all threads finish.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn);

}  // namespace weaklab::harness

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace weaklab::harness {

template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace weaklab::harness
