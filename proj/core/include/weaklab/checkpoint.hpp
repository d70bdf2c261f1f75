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

// Parameter checkpoints. Binary, little-endian:
//
//   magic    "WLCK" (4 bytes)
//   version  uint32 (1)
//   count    uint32
//   count records of:
//     name_len uint32, name bytes (UTF-8)
//     rank     uint32, rank x int32 dims
//     values   float32 x prod(dims)
//
// Records keep the order in which parameters were written.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "weaklab/autodiff.hpp"

namespace weaklab::ad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

void write_checkpoint(std::ostream& os, const std::vector<const Parameter<float>*>& params);
std::vector<TensorRecord> read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter<float>*>& params);
std::vector<TensorRecord> load_checkpoint(const std::filesystem::path& path);

// Copies records into parameters by name; every parameter must be present
// with a matching shape.
void assign(const std::vector<TensorRecord>& records, const std::vector<Parameter<float>*>& params);

}  // namespace weaklab::ad
