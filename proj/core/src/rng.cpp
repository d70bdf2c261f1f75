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

#include "weaklab/rng.hpp"

#include <cmath>
#include <numbers>

#include "weaklab/common.hpp"

namespace weaklab {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(seed ^ mix64(a + 0x632BE59BD9B4E019ULL)) ^ mix64(b + 0x85157AF5ULL));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error("Rng::below: empty range");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw Error("Rng::between: empty range");
  return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::eval: return "eval";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "eval") return Split::eval;
  throw Error("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(Variant v) { return v == Variant::waa ? "waa" : "200ms"; }

Variant parse_variant(std::string_view s) {
  if (s == "waa") return Variant::waa;
  if (s == "200ms" || s == "ms200") return Variant::ms200;
  throw Error("unknown variant '" + std::string(s) + "'");
}

std::string_view to_string(SegDur d) {
  switch (d) {
    case SegDur::ms200: return "200ms";
    case SegDur::s1: return "1s";
    case SegDur::s10: return "10s";
  }
  return "?";
}

SegDur parse_segdur(std::string_view s) {
  if (s == "200ms" || s == "0.2") return SegDur::ms200;
  if (s == "1s" || s == "1" || s == "1.0") return SegDur::s1;
  if (s == "10s" || s == "10" || s == "10.0") return SegDur::s10;
  throw Error("segment duration must be one of 200ms, 1s, 10s (got '" + std::string(s) + "')");
}

SegDur segdur_from_seconds(double seconds) {
  for (SegDur d : kAllSegDurs) {
    if (std::abs(seconds - seg_seconds(d)) < 1e-9) return d;
  }
  throw Error("segment duration must be one of 0.2, 1, 10 seconds (got " + std::to_string(seconds) + ")");
}

}  // namespace weaklab
