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

#include "weaklab/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "weaklab/rng.hpp"

namespace weaklab::synth {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFs = kSampleRate;

constexpr std::array<EventClassSpec, kNumClasses> kClasses = {{
    {0, "alarm_bell_ringing", Family::short_event, Recipe::harmonic_ping, 1.0, 0.45},
    {1, "blender", Family::long_event, Recipe::sawtooth_hum, 5.0, 0.35},
    {2, "cat", Family::short_event, Recipe::am_chirp, 0.9, 0.40},
    {3, "dishes", Family::short_event, Recipe::impulse_train, 0.45, 0.55},
    {4, "dog", Family::short_event, Recipe::noise_burst, 0.7, 0.45},
    {5, "electric_shaver_toothbrush", Family::long_event, Recipe::hum_hiss, 4.5, 0.35},
    {6, "frying", Family::long_event, Recipe::modulated_noise_bed, 7.5, 0.30},
    {7, "running_water", Family::long_event, Recipe::noise_sweep, 6.0, 0.35},
    {8, "speech", Family::short_event, Recipe::tone_ladder, 1.2, 0.40},
    {9, "vacuum_cleaner", Family::long_event, Recipe::drone, 7.0, 0.30},
}};

// Unique source events per class and split (train, valid, eval) in the
// reference corpus, with the clip counts they were drawn for.
constexpr std::array<std::array<int, 3>, kNumClasses> kSourceTable = {{
    {177, 13, 63},
    {89, 9, 27},
    {78, 10, 26},
    {99, 10, 34},
    {121, 15, 43},
    {51, 5, 17},
    {56, 8, 17},
    {59, 9, 20},
    {117, 11, 47},
    {62, 10, 20},
}};
constexpr std::array<int, 3> kReferenceClipsPerClass = {270, 30, 75};

// RBJ biquad band-pass (constant 0 dB peak gain).
class Biquad {
 public:
  void set_bandpass(double fc, double q) {
    const double w0 = 2.0 * kPi * std::clamp(fc, 20.0, kFs / 2 - 50.0) / kFs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0_ = alpha / a0;
    b1_ = 0.0;
    b2_ = -alpha / a0;
    a1_ = -2.0 * std::cos(w0) / a0;
    a2_ = (1.0 - alpha) / a0;
  }
  double operator()(double x) {
    const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

double decay_env(double dt, double tau) { return dt < 0 ? 0.0 : std::exp(-dt / tau); }

// 10 ms attack, exponential release; dt relative to burst start.
double burst_env(double dt, double len) {
  if (dt < 0 || dt > len) return 0.0;
  const double attack = std::min(0.01, len / 4);
  if (dt < attack) return dt / attack;
  return std::exp(-3.0 * (dt - attack) / std::max(len - attack, 1e-3));
}

void ping_train(std::vector<double>& y, Rng& rng) {
  const double period = rng.uniform(0.16, 0.32);
  const double f0 = rng.uniform(1900.0, 2900.0);
  const double tau = rng.uniform(0.04, 0.09);
  const double second = rng.uniform(0.2, 0.45);
  const std::size_t n = y.size();
  for (double t0 = 0.0; t0 * kFs < static_cast<double>(n); t0 += period + rng.uniform(-0.005, 0.005)) {
    const auto start = static_cast<std::size_t>(std::max(0.0, t0) * kFs);
    const auto stop = std::min(n, start + static_cast<std::size_t>(6 * tau * kFs));
    const double phase = rng.uniform(0.0, 2 * kPi);
    for (std::size_t i = start; i < stop; ++i) {
      const double dt = (static_cast<double>(i) - static_cast<double>(start)) / kFs;
      const double env = decay_env(dt, tau);
      y[i] += env * (std::sin(2 * kPi * f0 * dt + phase) + second * std::sin(4 * kPi * f0 * dt + 2 * phase));
    }
  }
}

void sawtooth_hum(std::vector<double>& y, Rng& rng) {
  const double f0 = rng.uniform(120.0, 220.0);
  const double drift_rate = rng.uniform(0.1, 0.5);
  const double mod_rate = rng.uniform(3.0, 7.0);
  const double rolloff = rng.uniform(500.0, 900.0);
  const int harmonics = static_cast<int>(2000.0 / f0);
  std::vector<double> amp(harmonics + 1);
  std::vector<double> ph(harmonics + 1);
  for (int h = 1; h <= harmonics; ++h) {
    const double fh = h * f0 / rolloff;
    amp[h] = (1.0 / h) / (1.0 + fh * fh);
    ph[h] = rng.uniform(0.0, 2 * kPi);
  }
  double phase = 0.0;
  Biquad noise_filter;
  noise_filter.set_bandpass(rng.uniform(250.0, 450.0), 0.8);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) / kFs;
    const double f = f0 * (1.0 + 0.03 * std::sin(2 * kPi * drift_rate * t));
    phase += 2 * kPi * f / kFs;
    double s = 0.0;
    for (int h = 1; h <= harmonics; ++h) s += amp[h] * std::sin(h * phase + ph[h]);
    const double load = 1.0 + 0.2 * std::sin(2 * kPi * mod_rate * t);
    y[i] = load * s + 0.15 * noise_filter(rng.normal());
  }
}

void am_chirp(std::vector<double>& y, Rng& rng) {
  const double fa = rng.uniform(900.0, 1300.0);
  const double am_rate = rng.uniform(8.0, 14.0);
  const std::size_t n = y.size();
  double t0 = 0.0;
  while (t0 * kFs < static_cast<double>(n)) {
    const double len = rng.uniform(0.4, 0.7);
    const double rise = rng.uniform(1.25, 1.5);
    const auto start = static_cast<std::size_t>(t0 * kFs);
    const auto stop = std::min(n, start + static_cast<std::size_t>(len * kFs));
    double phase = 0.0;
    for (std::size_t i = start; i < stop; ++i) {
      const double u = (static_cast<double>(i) - static_cast<double>(start)) / (len * kFs);
      const double f = fa * (1.0 + (rise - 1.0) * std::sin(kPi * u));
      phase += 2 * kPi * f / kFs;
      const double env = std::sqrt(std::sin(kPi * u)) * (1.0 - 0.4 * (0.5 + 0.5 * std::cos(2 * kPi * am_rate * u * len)));
      y[i] += env * (std::sin(phase) + 0.4 * std::sin(2 * phase) + 0.15 * std::sin(3 * phase));
    }
    t0 += len + rng.uniform(0.1, 0.2);
  }
}

void impulse_train(std::vector<double>& y, Rng& rng) {
  std::array<double, 3> modes{};
  for (double& f : modes) f = rng.uniform(4200.0, 6500.0);
  const double tau = rng.uniform(0.01, 0.035);
  const std::size_t n = y.size();
  double t0 = 0.0;
  while (t0 * kFs < static_cast<double>(n)) {
    const double strike = rng.uniform(0.5, 1.0);
    const auto start = static_cast<std::size_t>(t0 * kFs);
    const auto stop = std::min(n, start + static_cast<std::size_t>(6 * tau * kFs));
    std::array<double, 3> ph{};
    for (double& p : ph) p = rng.uniform(0.0, 2 * kPi);
    for (std::size_t i = start; i < stop; ++i) {
      const double dt = (static_cast<double>(i) - static_cast<double>(start)) / kFs;
      double s = 0.0;
      for (std::size_t m = 0; m < modes.size(); ++m) s += std::sin(2 * kPi * modes[m] * dt + ph[m]);
      const double click = dt < 0.002 ? 0.5 * rng.normal() : 0.0;
      y[i] += strike * (decay_env(dt, tau) * s + click);
    }
    t0 += 0.03 + 0.1 * -std::log(std::max(rng.uniform(), 1e-12));
  }
}

void bark_bursts(std::vector<double>& y, Rng& rng) {
  const double f0 = rng.uniform(260.0, 380.0);
  const double formant = rng.uniform(600.0, 800.0);
  const std::size_t n = y.size();
  Biquad noise_filter;
  noise_filter.set_bandpass(formant, 1.0);
  double t0 = 0.0;
  while (t0 * kFs < static_cast<double>(n)) {
    const double len = rng.uniform(0.1, 0.18);
    const auto start = static_cast<std::size_t>(t0 * kFs);
    const auto stop = std::min(n, start + static_cast<std::size_t>(len * kFs));
    const double fb = f0 * rng.uniform(0.9, 1.1);
    for (std::size_t i = start; i < stop; ++i) {
      const double dt = (static_cast<double>(i) - static_cast<double>(start)) / kFs;
      double s = 0.0;
      for (int h = 1; h <= 12; ++h) {
        const double fh = h * fb * (1.0 - 0.15 * dt / len);
        const double w = std::exp(-std::pow((fh - formant) / 500.0, 2)) + 0.1 / h;
        s += w * std::sin(2 * kPi * fh * dt);
      }
      y[i] += burst_env(dt, len) * (s + 0.6 * noise_filter(rng.normal()));
    }
    t0 += len + rng.uniform(0.08, 0.25);
  }
}

void hum_hiss(std::vector<double>& y, Rng& rng) {
  const double f0 = rng.uniform(90.0, 140.0);
  const double lo = rng.uniform(2200.0, 3000.0);
  const double hi = rng.uniform(4000.0, 5000.0);
  const double tremor = rng.uniform(0.5, 2.0);
  std::vector<int> hs;
  for (int h = 1; h * f0 < hi; ++h) {
    if (h * f0 >= lo) hs.push_back(h);
  }
  std::vector<double> ph(hs.size());
  for (double& p : ph) p = rng.uniform(0.0, 2 * kPi);
  Biquad hiss;
  hiss.set_bandpass(0.5 * (lo + hi), 1.5);
  const double norm = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(hs.size(), 1)));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) / kFs;
    double s = 0.0;
    for (std::size_t k = 0; k < hs.size(); ++k) s += std::sin(2 * kPi * hs[k] * f0 * t + ph[k]);
    y[i] = (1.0 + 0.15 * std::sin(2 * kPi * tremor * t)) * (norm * s + 0.5 * hiss(rng.normal()));
  }
}

void crackle_bed(std::vector<double>& y, Rng& rng) {
  Biquad bed;
  bed.set_bandpass(rng.uniform(4800.0, 5600.0), 0.9);
  Biquad crackle;
  crackle.set_bandpass(rng.uniform(4500.0, 6000.0), 2.0);
  const double rate = rng.uniform(20.0, 45.0);
  std::int64_t remaining = 0;
  double strength = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (remaining <= 0 && rng.uniform() < rate / kFs) {
      remaining = static_cast<std::int64_t>(rng.uniform(0.001, 0.004) * kFs);
      strength = rng.uniform(1.5, 4.0);
    }
    const double c = remaining-- > 0 ? strength * crackle(rng.normal()) : crackle(0.0);
    y[i] = 0.4 * bed(rng.normal()) + c;
  }
}

void water_sweep(std::vector<double>& y, Rng& rng) {
  const double c0 = rng.uniform(1400.0, 2200.0);
  const double rate = rng.uniform(0.3, 1.0);
  const double phase0 = rng.uniform(0.0, 2 * kPi);
  Biquad band;
  double blip_f = 0.0;
  std::int64_t blip_left = 0;
  double blip_phase = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) / kFs;
    if (i % 64 == 0) band.set_bandpass(c0 * (1.0 + 0.25 * std::sin(2 * kPi * rate * t + phase0)), 2.0);
    double s = band(rng.normal());
    if (blip_left <= 0 && rng.uniform() < 15.0 / kFs) {
      blip_f = rng.uniform(1000.0, 3000.0);
      blip_left = static_cast<std::int64_t>(0.02 * kFs);
      blip_phase = 0.0;
    }
    if (blip_left > 0) {
      blip_phase += 2 * kPi * blip_f * (1.0 + 0.5 * (1.0 - blip_left / (0.02 * kFs))) / kFs;
      s += 0.4 * std::sin(blip_phase);
      --blip_left;
    }
    y[i] = s;
  }
}

void vowel_ladder(std::vector<double>& y, Rng& rng) {
  const std::size_t n = y.size();
  double t0 = 0.0;
  while (t0 * kFs < static_cast<double>(n)) {
    const double len = rng.uniform(0.12, 0.25);
    const double f0 = rng.uniform(110.0, 230.0);
    const double glide = rng.uniform(-0.1, 0.1);
    const double f1 = rng.uniform(400.0, 800.0);
    const double f2 = rng.uniform(1100.0, 2200.0);
    const auto start = static_cast<std::size_t>(t0 * kFs);
    const auto stop = std::min(n, start + static_cast<std::size_t>(len * kFs));
    double phase = 0.0;
    for (std::size_t i = start; i < stop; ++i) {
      const double u = (static_cast<double>(i) - static_cast<double>(start)) / (len * kFs);
      const double f = f0 * (1.0 + glide * u);
      phase += 2 * kPi * f / kFs;
      double s = 0.0;
      for (int h = 1; h * f < 4000.0; ++h) {
        const double fh = h * f;
        const double w = std::exp(-std::pow((fh - f1) / 200.0, 2)) + 0.6 * std::exp(-std::pow((fh - f2) / 300.0, 2)) + 0.02;
        s += w * std::sin(h * phase);
      }
      y[i] += std::sin(kPi * u) * s;
    }
    t0 += len + rng.uniform(0.03, 0.12);
  }
}

void drone(std::vector<double>& y, Rng& rng) {
  const double f1 = rng.uniform(250.0, 330.0);
  Biquad noise_filter;
  noise_filter.set_bandpass(rng.uniform(220.0, 320.0), 0.7);
  const double p1 = rng.uniform(0.0, 2 * kPi);
  const double p2 = rng.uniform(0.0, 2 * kPi);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) / kFs;
    const double spin = std::min(1.0, 0.3 + t / 0.3);
    const double tone = std::sin(2 * kPi * f1 * spin * t + p1) + 0.3 * std::sin(4 * kPi * f1 * spin * t + p2);
    y[i] = 0.6 * tone + noise_filter(rng.normal());
  }
}

// 5 ms raised-cosine fades so events start and stop without clicks.
void apply_fades(std::vector<double>& y) {
  const std::size_t fade = std::min<std::size_t>(80, y.size() / 2);
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = 0.5 - 0.5 * std::cos(kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(fade));
    y[i] *= g;
    y[y.size() - 1 - i] *= g;
  }
}

std::int64_t to_samples(double seconds) { return std::llround(seconds * kFs); }

}  // namespace

const std::array<EventClassSpec, kNumClasses>& event_classes() { return kClasses; }

std::int64_t SceneSpec::onset_sample() const { return to_samples(onset_s); }
std::int64_t SceneSpec::event_samples() const { return to_samples(event_duration_s); }

void SceneSpec::validate() const {
  if (class_id < 0 || class_id >= kNumClasses) throw Error(clip_id + ": class_id out of range");
  if (!(snr_db >= kMinSnrDb && snr_db <= kMaxSnrDb)) throw Error(clip_id + ": snr_db outside [6, 30]");
  if (!(onset_s >= 0.0 && onset_s < kClipSeconds)) throw Error(clip_id + ": onset must lie in [0, 10) s");
  if (event_samples() <= 0) throw Error(clip_id + ": event duration must be positive");
}

std::int64_t Annotation::onset_sample() const { return to_samples(onset_s); }
std::int64_t Annotation::offset_sample() const { return to_samples(offset_s); }

Annotation annotate(const SceneSpec& spec) {
  const std::int64_t on = spec.onset_sample();
  const std::int64_t off = std::min<std::int64_t>(on + spec.event_samples(), kClipSamples);
  return {spec.clip_id, spec.class_id, static_cast<double>(on) / kFs, static_cast<double>(off) / kFs};
}

Waveform synth_event(int class_id, double duration_s, std::uint64_t seed) {
  if (class_id < 0 || class_id >= kNumClasses) throw Error("synth_event: unknown class_id " + std::to_string(class_id));
  if (!(duration_s > 0.0)) throw Error("synth_event: duration must be positive");
  const std::int64_t n = to_samples(duration_s);
  if (n <= 0) throw Error("synth_event: duration shorter than one sample");

  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  Rng rng(derive_seed(seed, 0xE7E7, static_cast<std::uint64_t>(class_id)));
  switch (kClasses[class_id].recipe) {
    case Recipe::harmonic_ping: ping_train(y, rng); break;
    case Recipe::sawtooth_hum: sawtooth_hum(y, rng); break;
    case Recipe::am_chirp: am_chirp(y, rng); break;
    case Recipe::impulse_train: impulse_train(y, rng); break;
    case Recipe::noise_burst: bark_bursts(y, rng); break;
    case Recipe::hum_hiss: hum_hiss(y, rng); break;
    case Recipe::modulated_noise_bed: crackle_bed(y, rng); break;
    case Recipe::noise_sweep: water_sweep(y, rng); break;
    case Recipe::tone_ladder: vowel_ladder(y, rng); break;
    case Recipe::drone: drone(y, rng); break;
  }
  apply_fades(y);

  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  Waveform w;
  w.samples.resize(y.size());
  const double scale = peak > 0.0 ? 0.5 / peak : 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) w.samples[i] = static_cast<float>(y[i] * scale);
  return w;
}

Waveform synth_background(double duration_s, std::uint64_t seed) {
  if (!(duration_s > 0.0)) throw Error("synth_background: duration must be positive");
  const std::int64_t n = to_samples(duration_s);
  if (n <= 0) throw Error("synth_background: duration shorter than one sample");

  Rng rng(derive_seed(seed, 0xBACC));
  const double tilt = rng.uniform(0.7, 1.5);
  const double bump_fc = std::exp(rng.uniform(std::log(150.0), std::log(3000.0)));
  const double bump_gain = rng.uniform(0.0, 2.0);
  const double drift_depth = rng.uniform(0.1, 0.35);
  const double drift_rate = rng.uniform(0.03, 0.3);
  const double drift_phase = rng.uniform(0.0, 2 * kPi);

  std::size_t nfft = 1;
  while (nfft < static_cast<std::size_t>(n)) nfft <<= 1;
  std::vector<double> white(nfft);
  for (double& v : white) v = rng.normal();

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const std::size_t kk = std::min(k, nfft - k);
    const double f = std::max(20.0, static_cast<double>(kk) * kFs / static_cast<double>(nfft));
    const double lf = std::log(f / bump_fc);
    const double shape = std::pow(f / 1000.0, -tilt / 2.0) * (1.0 + bump_gain * std::exp(-lf * lf / (2 * 0.3 * 0.3)));
    spec[k] *= shape;
  }
  std::vector<double> colored;
  fft.inv(colored, spec);

  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) / kFs;
    y[i] = colored[i] * (1.0 + drift_depth * std::sin(2 * kPi * drift_rate * t + drift_phase));
  }
  double energy = 0.0;
  for (double v : y) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(y.size()));
  Waveform w;
  w.samples.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w.samples[i] = static_cast<float>(y[i] * kBackgroundRms / rms);
  return w;
}

std::uint64_t event_seed(std::int64_t source_event_id) {
  return derive_seed(0x50EC, static_cast<std::uint64_t>(source_event_id));
}

MixedScene mix_scene(const SceneSpec& spec) {
  spec.validate();
  MixedScene out;
  out.annotation = annotate(spec);
  const Waveform bg = synth_background(kClipSeconds, spec.background_seed);
  const Waveform ev = synth_event(spec.class_id, spec.event_duration_s, event_seed(spec.source_event_id));

  const std::size_t on = static_cast<std::size_t>(out.annotation.onset_sample());
  const std::size_t len = static_cast<std::size_t>(out.annotation.offset_sample()) - on;

  double p_bg = 0.0;
  double p_ev = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    p_bg += static_cast<double>(bg.samples[on + i]) * bg.samples[on + i];
    p_ev += static_cast<double>(ev.samples[i]) * ev.samples[i];
  }
  if (p_ev <= 0.0 || p_bg <= 0.0) throw Error(spec.clip_id + ": degenerate event or background energy");
  out.event_gain = std::sqrt(std::pow(10.0, spec.snr_db / 10.0) * p_bg / p_ev);

  std::vector<double> mix(bg.samples.begin(), bg.samples.end());
  double p_scaled = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const float e = static_cast<float>(out.event_gain * ev.samples[i]);
    p_scaled += static_cast<double>(e) * e;
    mix[on + i] += e;
  }
  out.measured_snr_db = 10.0 * std::log10(p_scaled / p_bg);

  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  out.peak_scale = peak > 1.0 ? 1.0 / peak : 1.0;
  out.audio.samples.resize(mix.size());
  for (std::size_t i = 0; i < mix.size(); ++i) {
    out.audio.samples[i] = static_cast<float>(std::clamp(mix[i] * out.peak_scale, -1.0, 1.0));
  }
  return out;
}

int SplitCounts::of(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::valid: return valid;
    case Split::eval: return eval;
  }
  return 0;
}

int source_pool_size(int class_id, Split split, int clips_in_split) {
  const int per_class = clips_in_split / kNumClasses;
  const int s = static_cast<int>(split);
  const double scaled = static_cast<double>(kSourceTable[class_id][s]) * per_class / kReferenceClipsPerClass[s];
  return std::clamp(static_cast<int>(std::lround(scaled)), 1, std::max(per_class, 1));
}

std::vector<SceneSpec> draw_scene_specs(SplitCounts counts, std::uint64_t master_seed) {
  for (Split s : {Split::train, Split::valid, Split::eval}) {
    if (counts.of(s) < 0 || counts.of(s) % kNumClasses != 0) {
      throw Error("draw_scene_specs: " + std::string(to_string(s)) + " count " + std::to_string(counts.of(s)) +
                  " is not divisible by " + std::to_string(kNumClasses));
    }
  }

  std::vector<SceneSpec> specs;
  std::int64_t next_source = 0;
  for (Split split : {Split::train, Split::valid, Split::eval}) {
    const int n = counts.of(split);
    const auto split_tag = static_cast<std::uint64_t>(split);

    // Pools are contiguous id ranges; each source keeps one natural duration.
    std::array<std::int64_t, kNumClasses> pool_start{};
    std::array<std::vector<std::int64_t>, kNumClasses> pool_samples;
    for (int k = 0; k < kNumClasses; ++k) {
      const int size = source_pool_size(k, split, n);
      pool_start[k] = next_source;
      next_source += size;
      const auto& cls = kClasses[k];
      for (int j = 0; j < size; ++j) {
        Rng rng(derive_seed(master_seed, 0xD0, static_cast<std::uint64_t>(pool_start[k] + j)));
        const double d = std::clamp(cls.median_s * std::exp(cls.log_std * rng.normal()), 0.05, kClipSeconds);
        pool_samples[k].push_back(to_samples(d));
      }
    }

    for (int i = 0; i < n; ++i) {
      const int k = i % kNumClasses;
      Rng rng(derive_seed(master_seed, 0xC1 + split_tag, static_cast<std::uint64_t>(i)));
      SceneSpec spec;
      char id[32];
      std::snprintf(id, sizeof id, "%s_%05d", std::string(to_string(split)).c_str(), i);
      spec.clip_id = id;
      spec.class_id = k;
      spec.split = split;
      const auto pick = rng.below(pool_samples[k].size());
      spec.source_event_id = pool_start[k] + static_cast<std::int64_t>(pick);
      const std::int64_t natural = pool_samples[k][pick];
      const std::int64_t latest = kClipSamples - std::min<std::int64_t>(natural, 4000);
      const std::int64_t onset = rng.between(0, latest);
      const std::int64_t len = std::min(natural, kClipSamples - onset);
      spec.onset_s = static_cast<double>(onset) / kFs;
      spec.event_duration_s = static_cast<double>(len) / kFs;
      spec.snr_db = rng.uniform(kMinSnrDb, kMaxSnrDb);
      spec.background_seed = derive_seed(master_seed, 0xB6 + split_tag, static_cast<std::uint64_t>(i));
      specs.push_back(std::move(spec));
    }
  }
  return specs;
}

std::vector<SceneSpec> make_200ms_variant(std::span<const SceneSpec> specs) {
  std::vector<SceneSpec> out(specs.begin(), specs.end());
  for (SceneSpec& s : out) {
    const std::int64_t len = std::min<std::int64_t>(s.event_samples(), seg_samples(SegDur::ms200));
    s.event_duration_s = static_cast<double>(len) / kFs;
  }
  return out;
}

std::array<float, kNumClasses> Segment::label() const {
  std::array<float, kNumClasses> y{};
  y[class_id] = 1.0f;
  return y;
}

Segment extract_segment(const Annotation& ann, SegDur duration, std::uint64_t seed) {
  const std::int64_t on = ann.onset_sample();
  const std::int64_t off = ann.offset_sample();
  if (!(on >= 0 && on < off && off <= kClipSamples)) throw Error(ann.clip_id + ": invalid annotation");
  const std::int64_t len = seg_samples(duration);
  Rng rng(derive_seed(seed, 0x5E6, static_cast<std::uint64_t>(duration)));

  std::int64_t lo = 0;
  std::int64_t hi = 0;
  if (off - on >= len) {
    lo = on;
    hi = off - len;
  } else {
    lo = std::max<std::int64_t>(off - len, 0);
    hi = std::min<std::int64_t>(on, kClipSamples - len);
  }
  return {ann.clip_id, ann.class_id, rng.between(lo, hi), duration};
}

Segment extract_segment(const Annotation& ann, double seg_dur_s, std::uint64_t seed) {
  return extract_segment(ann, segdur_from_seconds(seg_dur_s), seed);
}

std::span<const float> segment_view(const Waveform& clip, const Segment& seg) {
  const auto len = static_cast<std::size_t>(seg_samples(seg.duration));
  const auto start = static_cast<std::size_t>(seg.start_sample);
  if (start + len > clip.samples.size()) throw Error(seg.clip_id + ": segment exceeds clip bounds");
  return std::span<const float>(clip.samples).subspan(start, len);
}

double event_overlap_fraction(const Annotation& ann, const Segment& seg) {
  const std::int64_t s0 = seg.start_sample;
  const std::int64_t s1 = s0 + seg_samples(seg.duration);
  const std::int64_t overlap = std::max<std::int64_t>(0, std::min(s1, ann.offset_sample()) - std::max(s0, ann.onset_sample()));
  return static_cast<double>(overlap) / static_cast<double>(s1 - s0);
}

}  // namespace weaklab::synth
