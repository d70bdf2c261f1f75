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

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace weaklab {

inline constexpr int kSampleRate = 16000;
inline constexpr int kNumClasses = 10;
inline constexpr double kClipSeconds = 10.0;
inline constexpr int kClipSamples = 160000;

// Thrown for violated preconditions and malformed inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { train, valid, eval };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

enum class Variant { waa, ms200 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

// The three segment durations a clip can be cut to.
enum class SegDur { ms200, s1, s10 };

inline constexpr std::array<SegDur, 3> kAllSegDurs = {SegDur::ms200, SegDur::s1, SegDur::s10};

constexpr int seg_samples(SegDur d) {
  switch (d) {
    case SegDur::ms200: return 3200;
    case SegDur::s1: return 16000;
    case SegDur::s10: return 160000;
  }
  return 0;
}

constexpr double seg_seconds(SegDur d) { return static_cast<double>(seg_samples(d)) / kSampleRate; }

// "200ms", "1s", "10s"
std::string_view to_string(SegDur d);
// Accepts "200ms"/"0.2", "1s"/"1"/"1.0", "10s"/"10"/"10.0".
SegDur parse_segdur(std::string_view s);
// Exact-match lookup from seconds; throws for anything outside {0.2, 1, 10}.
SegDur segdur_from_seconds(double seconds);

inline int index_of(SegDur d) { return static_cast<int>(d); }

}  // namespace weaklab
