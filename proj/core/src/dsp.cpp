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

#include "weaklab/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "weaklab/common.hpp"

namespace weaklab::dsp {
namespace {

constexpr int kLeftPad = (kWindow - kHop) / 2;  // 120

// Mirror index into [0, n) without repeating the edge sample.
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

const std::array<float, kWindow>& hann() {
  static const std::array<float, kWindow> w = [] {
    std::array<float, kWindow> out{};
    for (int i = 0; i < kWindow; ++i) {
      const double s = std::sin(std::numbers::pi * i / kWindow);
      out[i] = static_cast<float>(s * s);
    }
    return out;
  }();
  return w;
}

MelFilterbank build_filterbank() {
  MelFilterbank fb;
  fb.weights.assign(static_cast<std::size_t>(kMels) * kBins, 0.0f);
  const double mel_lo = hz_to_mel(kFmin);
  const double mel_hi = hz_to_mel(kFmax);
  std::array<double, kMels + 2> edges{};
  for (int m = 0; m < kMels + 2; ++m) edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (kMels + 1));
  const double bin_hz = static_cast<double>(kSampleRate) / kFftSize;
  for (int m = 0; m < kMels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    fb.center_hz[m] = center;
    const double area_norm = 2.0 / (right - left);
    for (int k = 0; k < kBins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb.weights[static_cast<std::size_t>(m) * kBins + k] = static_cast<float>(w * area_norm);
    }
  }
  return fb;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Spectrogram stft(std::span<const float> samples) {
  if (samples.empty()) throw Error("stft: empty waveform");
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  Spectrogram spec;
  spec.frames = num_frames(samples.size());
  spec.magnitudes.resize(static_cast<std::size_t>(spec.frames) * kBins);

  const auto& window = hann();
  Eigen::FFT<float> fft;
  std::vector<float> frame(kFftSize, 0.0f);
  std::vector<std::complex<float>> bins;
  for (int t = 0; t < spec.frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * kHop - kLeftPad;
    for (int i = 0; i < kWindow; ++i) frame[i] = samples[reflect(start + i, n)] * window[i];
    fft.fwd(bins, frame);
    float* row = spec.magnitudes.data() + static_cast<std::size_t>(t) * kBins;
    for (int k = 0; k < kBins; ++k) row[k] = std::abs(bins[k]);
  }
  return spec;
}

const MelFilterbank& mel_filterbank() {
  static const MelFilterbank fb = build_filterbank();
  return fb;
}

LogMelFeature log_mel_from_spectrogram(const Spectrogram& spec) {
  const auto& fb = mel_filterbank();
  LogMelFeature out;
  out.frames = spec.frames;
  out.values.resize(static_cast<std::size_t>(spec.frames) * kMels);
  std::array<double, kBins> power{};
  for (int t = 0; t < spec.frames; ++t) {
    for (int k = 0; k < kBins; ++k) {
      const double m = spec.at(t, k);
      power[k] = m * m;
    }
    for (int m = 0; m < kMels; ++m) {
      const float* w = fb.weights.data() + static_cast<std::size_t>(m) * kBins;
      double e = 0.0;
      for (int k = 0; k < kBins; ++k) e += w[k] * power[k];
      out.values[static_cast<std::size_t>(t) * kMels + m] = static_cast<float>(std::log(e + kLogFloor));
    }
  }
  return out;
}

LogMelFeature log_mel(std::span<const float> samples) { return log_mel_from_spectrogram(stft(samples)); }

void FeatureStatsAccumulator::add(const LogMelFeature& f) {
  for (int t = 0; t < f.frames; ++t) {
    for (int m = 0; m < kMels; ++m) {
      const double v = f.at(t, m);
      sum_[m] += v;
      sum_sq_[m] += v * v;
    }
  }
  count_ += f.frames;
}

FeatureStats FeatureStatsAccumulator::finish() const {
  if (count_ == 0) throw Error("feature statistics: no frames accumulated");
  FeatureStats s;
  for (int m = 0; m < kMels; ++m) {
    s.mean[m] = sum_[m] / static_cast<double>(count_);
    const double var = std::max(sum_sq_[m] / static_cast<double>(count_) - s.mean[m] * s.mean[m], 0.0);
    s.stddev[m] = std::max(std::sqrt(var), 1e-6);
  }
  return s;
}

void standardize(LogMelFeature& f, const FeatureStats& stats) {
  for (int t = 0; t < f.frames; ++t) {
    for (int m = 0; m < kMels; ++m) {
      float& v = f.values[static_cast<std::size_t>(t) * kMels + m];
      v = static_cast<float>((v - stats.mean[m]) / stats.stddev[m]);
    }
  }
}

}  // namespace weaklab::dsp
