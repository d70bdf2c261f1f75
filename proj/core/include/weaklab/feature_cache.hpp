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

// Per-clip feature blobs. Layout (all little-endian):
//
//   offset  size  field
//   0       4     frames   (uint32)
//   4       4     mels     (uint32, always 64)
//   8       4     dtype    (uint32, 1 = float32)
//   12      4     version  (uint32, currently 1)
//   16      ...   frames * mels values, frame-major
//
// A file may hold several blobs back to back (one per segment duration).

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "weaklab/dsp.hpp"

namespace weaklab::dsp {

inline constexpr std::uint32_t kFeatureDtypeF32 = 1;
inline constexpr std::uint32_t kFeatureVersion = 1;

void write_feature(std::ostream& os, const LogMelFeature& f);
LogMelFeature read_feature(std::istream& is);

void write_features(const std::filesystem::path& path, const std::vector<LogMelFeature>& fs);
std::vector<LogMelFeature> read_features(const std::filesystem::path& path);

}  // namespace weaklab::dsp
