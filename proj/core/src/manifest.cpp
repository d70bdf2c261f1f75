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

#include "weaklab/manifest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace weaklab::synth {
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& field, const char* what) {
  T value{};
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw Error(std::string("manifest: bad ") + what + " '" + field + "'");
  return value;
}

double parse_double(const std::string& field, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw Error("");
    return v;
  } catch (...) {
    throw Error(std::string("manifest: bad ") + what + " '" + field + "'");
  }
}

}  // namespace

std::string format_manifest_record(const SceneSpec& spec) {
  const Annotation ann = annotate(spec);
  std::ostringstream os;
  os << spec.clip_id << '\t' << spec.class_id << '\t' << spec.source_event_id << '\t' << fmt_double(ann.onset_s) << '\t'
     << fmt_double(ann.offset_s) << '\t' << fmt_double(spec.snr_db) << '\t' << to_string(spec.split) << '\t'
     << spec.background_seed;
  return os.str();
}

SceneSpec parse_manifest_record(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    fields.push_back(line.substr(pos, tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  if (fields.size() != 8) throw Error("manifest: expected 8 fields, got " + std::to_string(fields.size()));

  SceneSpec s;
  s.clip_id = fields[0];
  s.class_id = parse_number<int>(fields[1], "class_id");
  s.source_event_id = parse_number<std::int64_t>(fields[2], "source_event_id");
  const double onset = parse_double(fields[3], "onset_s");
  const double offset = parse_double(fields[4], "offset_s");
  s.snr_db = parse_double(fields[5], "snr_db");
  s.split = parse_split(fields[6]);
  s.background_seed = parse_number<std::uint64_t>(fields[7], "background_seed");
  const std::int64_t on = std::llround(onset * kSampleRate);
  const std::int64_t off = std::llround(offset * kSampleRate);
  s.onset_s = static_cast<double>(on) / kSampleRate;
  s.event_duration_s = static_cast<double>(off - on) / kSampleRate;
  s.validate();
  return s;
}

void write_manifest(std::ostream& os, std::span<const SceneSpec> specs) {
  for (const SceneSpec& s : specs) os << format_manifest_record(s) << '\n';
}

std::vector<SceneSpec> read_manifest(std::istream& is) {
  std::vector<SceneSpec> specs;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    specs.push_back(parse_manifest_record(line));
  }
  return specs;
}

void write_manifest(const std::filesystem::path& path, std::span<const SceneSpec> specs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  write_manifest(os, specs);
}

std::vector<SceneSpec> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  return read_manifest(is);
}

}  // namespace weaklab::synth
