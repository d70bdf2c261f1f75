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

#include "weaklab/feature_cache.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "weaklab/common.hpp"

namespace weaklab::dsp {
namespace {

static_assert(std::endian::native == std::endian::little, "feature cache I/O assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw Error("feature cache: truncated header");
  return v;
}

}  // namespace

void write_feature(std::ostream& os, const LogMelFeature& f) {
  put_u32(os, static_cast<std::uint32_t>(f.frames));
  put_u32(os, static_cast<std::uint32_t>(kMels));
  put_u32(os, kFeatureDtypeF32);
  put_u32(os, kFeatureVersion);
  os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(float)));
}

LogMelFeature read_feature(std::istream& is) {
  LogMelFeature f;
  f.frames = static_cast<int>(get_u32(is));
  const std::uint32_t mels = get_u32(is);
  const std::uint32_t dtype = get_u32(is);
  const std::uint32_t version = get_u32(is);
  if (mels != static_cast<std::uint32_t>(kMels)) throw Error("feature cache: expected 64 mels");
  if (dtype != kFeatureDtypeF32) throw Error("feature cache: unsupported dtype tag");
  if (version != kFeatureVersion) throw Error("feature cache: unsupported version");
  f.values.resize(static_cast<std::size_t>(f.frames) * kMels);
  is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(float)));
  if (!is) throw Error("feature cache: truncated payload");
  return f;
}

void write_features(const std::filesystem::path& path, const std::vector<LogMelFeature>& fs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  for (const auto& f : fs) write_feature(os, f);
}

std::vector<LogMelFeature> read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::vector<LogMelFeature> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_feature(is));
  return out;
}

}  // namespace weaklab::dsp
