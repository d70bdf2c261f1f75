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

// Corpus manifest: one tab-separated record per clip, fields in this fixed
// order:
//
//   clip_id  class_id  source_event_id  onset_s  offset_s  snr_db  split  background_seed
//
// Times are written with enough digits to round-trip exactly; since they lie
// on the 16 kHz sample grid, event_duration_s is recovered as offset - onset.
// Lines starting with '#' are ignored on read.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "weaklab/synthgen.hpp"

namespace weaklab::synth {

std::string format_manifest_record(const SceneSpec& spec);
SceneSpec parse_manifest_record(const std::string& line);

void write_manifest(std::ostream& os, std::span<const SceneSpec> specs);
std::vector<SceneSpec> read_manifest(std::istream& is);

void write_manifest(const std::filesystem::path& path, std::span<const SceneSpec> specs);
std::vector<SceneSpec> read_manifest(const std::filesystem::path& path);

// 16-bit PCM, mono, little-endian RIFF/WAVE.
void write_wav(const std::filesystem::path& path, const Waveform& w);
Waveform read_wav(const std::filesystem::path& path);

}  // namespace weaklab::synth
