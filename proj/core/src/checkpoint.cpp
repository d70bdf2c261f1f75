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

#include "weaklab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace weaklab::ad {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& is) {
  U v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!is) throw Error("checkpoint: truncated file");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const std::vector<const Parameter<float>*>& params) {
  os.write("WLCK", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p->shape.size()));
    for (int d : p->shape) put<std::int32_t>(os, d);
    os.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
}

std::vector<TensorRecord> read_checkpoint(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "WLCK", 4) != 0) throw Error("checkpoint: bad magic");
  if (get<std::uint32_t>(is) != kCheckpointVersion) throw Error("checkpoint: unsupported version");
  const auto count = get<std::uint32_t>(is);
  std::vector<TensorRecord> out(count);
  for (auto& r : out) {
    r.name.resize(get<std::uint32_t>(is));
    is.read(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    const auto rank = get<std::uint32_t>(is);
    for (std::uint32_t d = 0; d < rank; ++d) r.shape.push_back(get<std::int32_t>(is));
    r.values.resize(numel(r.shape));
    is.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(r.values.size() * sizeof(float)));
    if (!is) throw Error("checkpoint: truncated tensor '" + r.name + "'");
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter<float>*>& params) {
  // Write-then-rename so an interrupted run never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write " + tmp.string());
    write_checkpoint(os, params);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<TensorRecord> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  return read_checkpoint(is);
}

void assign(const std::vector<TensorRecord>& records, const std::vector<Parameter<float>*>& params) {
  for (auto* p : params) {
    const TensorRecord* found = nullptr;
    for (const auto& r : records) {
      if (r.name == p->name) found = &r;
    }
    if (found == nullptr) throw Error("checkpoint: missing tensor '" + p->name + "'");
    if (found->shape != p->shape) shape_error("checkpoint", p->shape, found->shape);
    p->value = found->values;
  }
}

}  // namespace weaklab::ad
