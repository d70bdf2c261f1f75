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

// The method x train-duration x test-duration grid for one variant.
//
// Each (method, train_seg, seed) run lives in <out>/<variant>/runs/<run_id>/
// with model.wlck, train.log, config.txt and records.jsonl. records.jsonl is
// written last, so its presence marks a finished run and reruns skip it.

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "weaklab/config.hpp"
#include "weaklab/trainer.hpp"

namespace weaklab::harness {

struct CellRecord {
  std::string run_id;
  Variant variant = Variant::waa;
  Method method = Method::classifier;
  SegDur train_seg = SegDur::s1;
  SegDur test_seg = SegDur::s1;
  std::uint64_t seed = 0;
  std::array<double, kNumClasses> per_class_f{};  // fractions
  double macro_f = 0.0;
  double centroid_accuracy = 0.0;  // validation, at the training duration
  double threshold = 0.5;

  bool operator==(const CellRecord&) const = default;
};

std::string to_json(const CellRecord& r);
CellRecord record_from_json(const std::string& line);
void write_records(const std::filesystem::path& path, std::span<const CellRecord> records);
std::vector<CellRecord> read_records(const std::filesystem::path& path);

struct CellKey {
  Method method;
  SegDur train_seg;
  SegDur test_seg;
  auto operator<=>(const CellKey&) const = default;
};

struct CellStats {
  double mean = 0.0;  // macro-F fraction
  double std = 0.0;   // sample standard deviation over seeds
  int count = 0;
};

struct ResultGrid {
  Variant variant = Variant::waa;
  std::map<CellKey, std::vector<CellRecord>> cells;

  bool has(Method m, SegDur train, SegDur test) const;
  const std::vector<CellRecord>& runs(Method m, SegDur train, SegDur test) const;
  CellStats stats(Method m, SegDur train, SegDur test) const;
  std::vector<Method> methods() const;
  std::vector<SegDur> train_segs() const;
  std::vector<SegDur> test_segs() const;
};

// Groups records of one variant; every cell must aggregate the same seeds.
ResultGrid aggregate(Variant v, std::span<const CellRecord> records);

// Rows method x train segment, columns test segment, "mean±std" in percent.
std::string format_table(const ResultGrid& g);

// Config text that determines one run's results (grid axes and worker count
// removed), used to detect stale run directories.
std::string cell_config_text(const Config& cfg, const RunConfig& rc);

std::filesystem::path run_dir(const std::filesystem::path& out, const RunConfig& rc);

// Trains and evaluates one run from the corpus at `corpus_dir`, writing
// model.wlck, model_card.txt and train.log into `dir`. Does not consult or
// write records.jsonl.
std::vector<CellRecord> execute_cell(const Config& cfg, const RunConfig& rc, const std::filesystem::path& corpus_dir,
                                     const std::filesystem::path& dir);

// Trains and evaluates one run unless its directory already holds matching
// results. The corpus must exist.
std::vector<CellRecord> run_cell(const Config& cfg, const RunConfig& rc, const std::filesystem::path& out,
                                 std::ostream* log = nullptr);

// Builds the corpus if needed, runs every missing cell on cfg.workers
// threads and writes <out>/<variant>/results.jsonl and table.txt. A failing
// cell stops the grid; finished cells are still written before rethrowing.
ResultGrid run_grid(const Config& cfg, Variant v, const std::filesystem::path& out, std::ostream* log = nullptr);

ResultGrid load_grid(const std::filesystem::path& out, Variant v);

}  // namespace weaklab::harness
