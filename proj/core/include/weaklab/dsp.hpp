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

// Log-mel front end: 25 ms Hann windows, 10 ms hop, 512-point FFT, 64 mel
// bands over 0-8 kHz.
//
// Framing: frame t is centered on the middle of hop interval t, i.e. its
// window starts at sample 160 * t - 120. The signal is reflection-padded by
// 120 samples on the left and as needed on the right, so a signal of n
// samples yields exactly ceil(n / 160) frames. Splitting a signal at a
// multiple of 160 samples therefore gives the same frame count as the whole;
// otherwise the parts have at most one frame more than the whole.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace weaklab::dsp {

inline constexpr int kWindow = 400;
inline constexpr int kHop = 160;
inline constexpr int kFftSize = 512;
inline constexpr int kBins = kFftSize / 2 + 1;  // 257
inline constexpr int kMels = 64;
inline constexpr double kFmin = 0.0;
inline constexpr double kFmax = 8000.0;
inline constexpr double kLogFloor = 1e-10;

constexpr int num_frames(std::size_t samples) {
  return static_cast<int>((samples + kHop - 1) / kHop);
}

struct Spectrogram {
  int frames = 0;
  int bins = kBins;
  std::vector<float> magnitudes;  // frames x bins, row-major

  float at(int frame, int bin) const { return magnitudes[static_cast<std::size_t>(frame) * bins + bin]; }
};

Spectrogram stft(std::span<const float> samples);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// 64 x 257 triangular filters, each normalized to unit area in Hz.
struct MelFilterbank {
  std::vector<float> weights;             // kMels x kBins, row-major
  std::array<double, kMels> center_hz{};

  float at(int mel, int bin) const { return weights[static_cast<std::size_t>(mel) * kBins + bin]; }
};

const MelFilterbank& mel_filterbank();

struct LogMelFeature {
  int frames = 0;
  std::vector<float> values;  // frames x kMels, row-major

  float at(int frame, int mel) const { return values[static_cast<std::size_t>(frame) * kMels + mel]; }
  std::span<const float> frame(int t) const {
    return std::span<const float>(values).subspan(static_cast<std::size_t>(t) * kMels, kMels);
  }
};

// Mel projection of an existing power spectrogram (magnitudes squared).
LogMelFeature log_mel_from_spectrogram(const Spectrogram& spec);

// log(mel . |STFT|^2 + floor), before standardization.
LogMelFeature log_mel(std::span<const float> samples);

// Per-band mean/std pinned from training data.
struct FeatureStats {
  std::array<double, kMels> mean{};
  std::array<double, kMels> stddev{};
};

class FeatureStatsAccumulator {
 public:
  void add(const LogMelFeature& f);
  FeatureStats finish() const;
  long long frames() const { return count_; }

 private:
  std::array<double, kMels> sum_{};
  std::array<double, kMels> sum_sq_{};
  long long count_ = 0;
};

void standardize(LogMelFeature& f, const FeatureStats& stats);

}  // namespace weaklab::dsp
