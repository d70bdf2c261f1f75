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

#include "weaklab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace weaklab {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::classifier: return "classifier";
    case Method::triplet: return "triplet";
    case Method::prototypical: return "prototypical";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "classifier") return Method::classifier;
  if (s == "triplet") return Method::triplet;
  if (s == "prototypical" || s == "proto") return Method::prototypical;
  throw Error("unknown method '" + std::string(s) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto c = s.find(',');
    const auto item = trim(s.substr(0, c));
    if (!item.empty()) out.push_back(item);
    if (c == std::string_view::npos) break;
    s.remove_prefix(c + 1);
  }
  return out;
}

template <typename I>
I parse_int(std::string_view key, std::string_view v) {
  I x{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw Error("config: '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  }
  return x;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error("config: '" + std::string(key) + "' expects a number, got '" + s + "'");
  }
  return x;
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += f(xs[i]);
  }
  return out;
}

}  // namespace

void Config::set(std::string_view key, std::string_view value) {
  value = trim(value);
  // Budget keys may carry a training-duration suffix.
  const auto dot = key.find('.');
  if (dot != std::string_view::npos) {
    const auto base = key.substr(0, dot);
    Budget& b = budget[static_cast<std::size_t>(index_of(parse_segdur(key.substr(dot + 1))))];
    if (base == "max_epochs") b.max_epochs = parse_int<int>(key, value);
    else if (base == "patience") b.patience = parse_int<int>(key, value);
    else if (base == "steps_per_epoch") b.steps_per_epoch = parse_int<int>(key, value);
    else throw Error("config: key '" + std::string(base) + "' does not take a duration suffix");
    return;
  }
  if (key == "master_seed") master_seed = parse_int<std::uint64_t>(key, value);
  else if (key == "counts") {
    const auto parts = split_list(value);
    if (parts.size() != 3) throw Error("config: counts expects TRAIN,VALID,EVAL");
    counts = {parse_int<int>(key, parts[0]), parse_int<int>(key, parts[1]), parse_int<int>(key, parts[2])};
  } else if (key == "variants") {
    variants.clear();
    for (auto p : split_list(value)) variants.push_back(parse_variant(p));
  } else if (key == "methods") {
    methods.clear();
    for (auto p : split_list(value)) methods.push_back(parse_method(p));
  } else if (key == "train_segs") {
    train_segs.clear();
    for (auto p : split_list(value)) train_segs.push_back(parse_segdur(p));
  } else if (key == "test_segs") {
    test_segs.clear();
    for (auto p : split_list(value)) test_segs.push_back(parse_segdur(p));
  } else if (key == "seeds") {
    seeds.clear();
    for (auto p : split_list(value)) seeds.push_back(parse_int<std::uint64_t>(key, p));
  } else if (key == "workers") workers = parse_int<int>(key, value);
  else if (key == "lr") adam.lr = parse_double(key, value);
  else if (key == "beta1") adam.beta1 = parse_double(key, value);
  else if (key == "beta2") adam.beta2 = parse_double(key, value);
  else if (key == "adam_eps") adam.eps = parse_double(key, value);
  else if (key == "margin") margin = parse_double(key, value);
  else if (key == "m_support") m_support = parse_int<int>(key, value);
  else if (key == "m_query") m_query = parse_int<int>(key, value);
  else if (key == "triplet_batch") triplet_batch = parse_int<int>(key, value);
  else if (key == "bce_batch") bce_batch = parse_int<int>(key, value);
  else if (key == "head_batch") head_batch = parse_int<int>(key, value);
  else if (key == "max_epochs") for (auto& b : budget) b.max_epochs = parse_int<int>(key, value);
  else if (key == "patience") for (auto& b : budget) b.patience = parse_int<int>(key, value);
  else if (key == "steps_per_epoch") for (auto& b : budget) b.steps_per_epoch = parse_int<int>(key, value);
  else if (key == "head_max_epochs") head_budget.max_epochs = parse_int<int>(key, value);
  else if (key == "head_patience") head_budget.patience = parse_int<int>(key, value);
  else if (key == "min_delta") min_delta = parse_double(key, value);
  else if (key == "threshold") threshold = parse_double(key, value);
  else if (key == "max_tape_blocks") max_tape_blocks = parse_int<int>(key, value);
  else if (key == "centroid_max_segments") centroid_max_segments = parse_int<int>(key, value);
  else throw Error("config: unknown key '" + std::string(key) + "'");
}

void Config::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("config: ") + what);
  };
  require(counts.train > 0 && counts.valid > 0 && counts.eval > 0, "counts must be positive");
  require(counts.train % kNumClasses == 0 && counts.valid % kNumClasses == 0 && counts.eval % kNumClasses == 0,
          "counts must be multiples of 10 for balanced classes");
  require(!variants.empty() && !methods.empty() && !train_segs.empty() && !test_segs.empty(), "empty grid axis");
  require(!seeds.empty(), "no seeds");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = i + 1; j < seeds.size(); ++j) require(seeds[i] != seeds[j], "seeds must be distinct");
  }
  require(workers >= 1, "workers must be >= 1");
  require(adam.lr > 0 && adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 && adam.eps > 0,
          "invalid Adam settings");
  require(margin > 0, "margin must be positive");
  require(m_support >= 1 && m_query >= 1, "m_support and m_query must be >= 1");
  require(triplet_batch >= 1 && bce_batch >= 1 && head_batch >= 1, "batch sizes must be >= 1");
  for (const auto& b : budget) {
    require(b.max_epochs >= 0 && b.patience >= 1 && b.steps_per_epoch >= 0, "invalid epoch budget");
  }
  require(head_budget.max_epochs >= 0 && head_budget.patience >= 1, "invalid head budget");
  require(min_delta >= 0, "min_delta must be >= 0");
  require(threshold > 0 && threshold < 1, "threshold must be in (0, 1)");
  require(max_tape_blocks >= 1, "max_tape_blocks must be >= 1");
  require(centroid_max_segments >= 0, "centroid_max_segments must be >= 0");
}

std::string Config::to_text() const {
  std::ostringstream os;
  os << "master_seed = " << master_seed << "\n";
  os << "counts = " << counts.train << "," << counts.valid << "," << counts.eval << "\n";
  os << "variants = " << join(variants, [](Variant v) { return std::string(to_string(v)); }) << "\n";
  os << "methods = " << join(methods, [](Method m) { return std::string(to_string(m)); }) << "\n";
  os << "train_segs = " << join(train_segs, [](SegDur d) { return std::string(to_string(d)); }) << "\n";
  os << "test_segs = " << join(test_segs, [](SegDur d) { return std::string(to_string(d)); }) << "\n";
  os << "seeds = " << join(seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n";
  os << "workers = " << workers << "\n";
  os << "lr = " << fmt_double(adam.lr) << "\n";
  os << "beta1 = " << fmt_double(adam.beta1) << "\n";
  os << "beta2 = " << fmt_double(adam.beta2) << "\n";
  os << "adam_eps = " << fmt_double(adam.eps) << "\n";
  os << "margin = " << fmt_double(margin) << "\n";
  os << "m_support = " << m_support << "\n";
  os << "m_query = " << m_query << "\n";
  os << "triplet_batch = " << triplet_batch << "\n";
  os << "bce_batch = " << bce_batch << "\n";
  os << "head_batch = " << head_batch << "\n";
  for (SegDur d : kAllSegDurs) {
    const Budget& b = budget_for(d);
    os << "max_epochs." << to_string(d) << " = " << b.max_epochs << "\n";
    os << "patience." << to_string(d) << " = " << b.patience << "\n";
    os << "steps_per_epoch." << to_string(d) << " = " << b.steps_per_epoch << "\n";
  }
  os << "head_max_epochs = " << head_budget.max_epochs << "\n";
  os << "head_patience = " << head_budget.patience << "\n";
  os << "min_delta = " << fmt_double(min_delta) << "\n";
  os << "threshold = " << fmt_double(threshold) << "\n";
  os << "max_tape_blocks = " << max_tape_blocks << "\n";
  os << "centroid_max_segments = " << centroid_max_segments << "\n";
  return os.str();
}

Config Config::parse(std::string_view text) {
  Config c;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace weaklab
