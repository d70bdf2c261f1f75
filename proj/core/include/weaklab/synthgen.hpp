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

// Procedural soundscape corpus: ten event classes with distinct spectral and
// temporal signatures, colored-noise backgrounds, SNR-controlled mixing, and
// the segment cutting that turns strong annotations into weak labels.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weaklab/common.hpp"

namespace weaklab::synth {

enum class Family { short_event, long_event };

enum class Recipe {
  harmonic_ping,
  sawtooth_hum,
  am_chirp,
  impulse_train,
  noise_burst,
  hum_hiss,
  modulated_noise_bed,
  noise_sweep,
  tone_ladder,
  drone,
};

struct EventClassSpec {
  int class_id;
  std::string_view name;
  Family family;
  Recipe recipe;
  double median_s;  // log-normal duration median
  double log_std;   // log-normal sigma
};

const std::array<EventClassSpec, kNumClasses>& event_classes();

struct Waveform {
  int sample_rate = kSampleRate;
  std::vector<float> samples;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

inline constexpr double kBackgroundRms = 0.01;
inline constexpr double kMinSnrDb = 6.0;
inline constexpr double kMaxSnrDb = 30.0;

// Times are kept on the 16 kHz sample grid so that manifests round-trip
// exactly.
struct SceneSpec {
  std::string clip_id;
  int class_id = 0;
  std::int64_t source_event_id = 0;
  double event_duration_s = 0.0;
  double onset_s = 0.0;
  double snr_db = 0.0;
  std::uint64_t background_seed = 0;
  Split split = Split::train;

  std::int64_t onset_sample() const;
  std::int64_t event_samples() const;
  // Throws Error describing the first violated invariant.
  void validate() const;
};

struct Annotation {
  std::string clip_id;
  int class_id = 0;
  double onset_s = 0.0;
  double offset_s = 0.0;

  std::int64_t onset_sample() const;
  std::int64_t offset_sample() const;
};

Annotation annotate(const SceneSpec& spec);

// Deterministic in (class_id, duration_s, seed); exactly round(duration_s * 16000) samples.
Waveform synth_event(int class_id, double duration_s, std::uint64_t seed);

// Colored noise with a per-seed spectral tilt and resonance plus a slow
// amplitude drift, normalized to kBackgroundRms.
Waveform synth_background(double duration_s, std::uint64_t seed);

// Seed used for a source event's waveform.
std::uint64_t event_seed(std::int64_t source_event_id);

struct MixedScene {
  Waveform audio;
  Annotation annotation;
  double measured_snr_db = 0.0;  // over the event support, before peak normalization
  double event_gain = 0.0;
  double peak_scale = 1.0;       // < 1 when the mixture was peak-normalized
};

MixedScene mix_scene(const SceneSpec& spec);

struct SplitCounts {
  int train = 0;
  int valid = 0;
  int eval = 0;

  int of(Split s) const;
};

inline constexpr SplitCounts kDeskCounts{1000, 200, 500};
inline constexpr SplitCounts kFullCounts{2700, 300, 750};

// Balanced per split, source pools disjoint across splits, pool sizes in the
// proportions of a fixed per-class unique-source table.
std::vector<SceneSpec> draw_scene_specs(SplitCounts counts, std::uint64_t master_seed);

// Source pool size for one class and split at the given clip count.
int source_pool_size(int class_id, Split split, int clips_in_split);

std::vector<SceneSpec> make_200ms_variant(std::span<const SceneSpec> specs);

struct Segment {
  std::string clip_id;
  int class_id = 0;
  std::int64_t start_sample = 0;
  SegDur duration = SegDur::s10;

  double start_s() const { return static_cast<double>(start_sample) / kSampleRate; }
  double end_s() const { return start_s() + seg_seconds(duration); }
  std::array<float, kNumClasses> label() const;
};

// One segment per (clip, duration). Events at least as long as the segment
// contain it; shorter events are fully covered, with random slack.
Segment extract_segment(const Annotation& ann, SegDur duration, std::uint64_t seed);
Segment extract_segment(const Annotation& ann, double seg_dur_s, std::uint64_t seed);

std::span<const float> segment_view(const Waveform& clip, const Segment& seg);

// Fraction of the segment's duration covered by the annotated event.
double event_overlap_fraction(const Annotation& ann, const Segment& seg);

}  // namespace weaklab::synth
