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

// Trend checks over the two variant grids, the text report, and the event
// duration density plot.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "weaklab/grid.hpp"
#include "weaklab/synthgen.hpp"

namespace weaklab::harness {

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string detail;  // the compared cell values
};

struct TrendThresholds {
  double collapse_gap = 0.20;        // classifier minus embedding methods, 10 s training, 200 ms variant
  double collapse_seed_fraction = 2.0 / 3.0;
  double robustness_gap = 0.15;      // classifier minus triplet at 10 s / 10 s, WAA
  double mismatch_drop = 0.50;       // relative loss from 200 ms to 10 s testing
  double centroid_chance_factor = 3.0;
};

// `ms200` and `waa` are the grids of the two variants.
std::vector<TrendCheck> trend_checks(const ResultGrid& ms200, const ResultGrid& waa, const TrendThresholds& th = {});

bool grids_identical(const ResultGrid& a, const ResultGrid& b);

std::string format_report(const ResultGrid& ms200, const ResultGrid& waa, const std::vector<TrendCheck>& checks);

// Densities of event durations (log axis) for the short and long families.
std::string duration_density_svg(std::span<const synth::SceneSpec> specs);
void write_duration_density_svg(const std::filesystem::path& path, std::span<const synth::SceneSpec> specs);

}  // namespace weaklab::harness
