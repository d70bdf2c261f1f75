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

#include "weaklab/grid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "weaklab/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace weaklab::harness {

std::string to_json(const CellRecord& r) {
  json j;
  j["run_id"] = r.run_id;
  j["variant"] = std::string(to_string(r.variant));
  j["method"] = std::string(to_string(r.method));
  j["train_seg"] = std::string(to_string(r.train_seg));
  j["test_seg"] = std::string(to_string(r.test_seg));
  j["seed"] = r.seed;
  j["per_class_f"] = r.per_class_f;
  j["macro_f"] = r.macro_f;
  j["centroid_accuracy"] = r.centroid_accuracy;
  j["threshold"] = r.threshold;
  j["averaging"] = "macro";
  return j.dump();
}

CellRecord record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    CellRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.variant = parse_variant(j.at("variant").get<std::string>());
    r.method = parse_method(j.at("method").get<std::string>());
    r.train_seg = parse_segdur(j.at("train_seg").get<std::string>());
    r.test_seg = parse_segdur(j.at("test_seg").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto f = j.at("per_class_f").get<std::vector<double>>();
    if (f.size() != kNumClasses) throw Error("per_class_f must have 10 entries");
    std::copy(f.begin(), f.end(), r.per_class_f.begin());
    r.macro_f = j.at("macro_f").get<double>();
    r.centroid_accuracy = j.at("centroid_accuracy").get<double>();
    r.threshold = j.value("threshold", 0.5);
    return r;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed result record: ") + e.what());
  }
}

void write_records(const fs::path& path, std::span<const CellRecord> records) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error("cannot write " + tmp.string());
    for (const auto& r : records) os << to_json(r) << '\n';
    if (!os) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<CellRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<CellRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(record_from_json(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

bool ResultGrid::has(Method m, SegDur train, SegDur test) const { return cells.count({m, train, test}) > 0; }

const std::vector<CellRecord>& ResultGrid::runs(Method m, SegDur train, SegDur test) const {
  const auto it = cells.find({m, train, test});
  if (it == cells.end()) {
    throw Error("grid " + std::string(to_string(variant)) + " has no cell " + std::string(to_string(m)) + " " +
                std::string(to_string(train)) + "->" + std::string(to_string(test)));
  }
  return it->second;
}

CellStats ResultGrid::stats(Method m, SegDur train, SegDur test) const {
  const auto& rs = runs(m, train, test);
  CellStats s;
  s.count = static_cast<int>(rs.size());
  for (const auto& r : rs) s.mean += r.macro_f;
  s.mean /= s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (const auto& r : rs) ss += (r.macro_f - s.mean) * (r.macro_f - s.mean);
    s.std = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

std::vector<Method> ResultGrid::methods() const {
  std::set<Method> s;
  for (const auto& [k, v] : cells) s.insert(k.method);
  return {s.begin(), s.end()};
}

std::vector<SegDur> ResultGrid::train_segs() const {
  std::set<SegDur> s;
  for (const auto& [k, v] : cells) s.insert(k.train_seg);
  return {s.begin(), s.end()};
}

std::vector<SegDur> ResultGrid::test_segs() const {
  std::set<SegDur> s;
  for (const auto& [k, v] : cells) s.insert(k.test_seg);
  return {s.begin(), s.end()};
}

ResultGrid aggregate(Variant v, std::span<const CellRecord> records) {
  ResultGrid g;
  g.variant = v;
  for (const auto& r : records) {
    if (r.variant != v) continue;
    g.cells[{r.method, r.train_seg, r.test_seg}].push_back(r);
  }
  std::optional<std::set<std::uint64_t>> seeds;
  for (auto& [key, rs] : g.cells) {
    std::sort(rs.begin(), rs.end(), [](const CellRecord& a, const CellRecord& b) { return a.seed < b.seed; });
    std::set<std::uint64_t> s;
    for (const auto& r : rs) {
      if (!s.insert(r.seed).second) throw Error("aggregate: duplicate seed " + std::to_string(r.seed) + " in " + r.run_id);
    }
    if (!seeds) seeds = s;
    else if (*seeds != s) throw Error("aggregate: cells of the " + std::string(to_string(v)) + " grid cover different seeds");
  }
  return g;
}

std::string format_table(const ResultGrid& g) {
  std::ostringstream os;
  const auto tests = g.test_segs();
  int seeds = g.cells.empty() ? 0 : static_cast<int>(g.cells.begin()->second.size());
  os << "F-measure (%) on the " << to_string(g.variant) << " variant, mean+-std over " << seeds << " seed(s)\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-14s%-8s", "method", "train");
  os << buf;
  for (SegDur t : tests) {
    std::snprintf(buf, sizeof buf, "%14s", std::string(to_string(t)).c_str());
    os << buf;
  }
  os << "\n";
  for (Method m : g.methods()) {
    for (SegDur tr : g.train_segs()) {
      bool any = false;
      for (SegDur t : tests) any = any || g.has(m, tr, t);
      if (!any) continue;
      std::snprintf(buf, sizeof buf, "%-14s%-8s", std::string(to_string(m)).c_str(), std::string(to_string(tr)).c_str());
      os << buf;
      for (SegDur t : tests) {
        if (g.has(m, tr, t)) {
          const auto s = g.stats(m, tr, t);
          std::snprintf(buf, sizeof buf, "%.1f+-%.1f", 100.0 * s.mean, 100.0 * s.std);
        } else {
          std::snprintf(buf, sizeof buf, "-");
        }
        char cell[64];
        std::snprintf(cell, sizeof cell, "%14s", buf);
        os << cell;
      }
      os << "\n";
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Running

std::string cell_config_text(const Config& cfg, const RunConfig& rc) {
  Config c = cfg;
  c.workers = 1;
  c.variants = {rc.variant};
  c.methods = {rc.method};
  c.train_segs = {rc.train_seg};
  c.seeds = {rc.seed};
  for (auto& b : c.budget) b = cfg.budget_for(rc.train_seg);
  return c.to_text();
}

fs::path run_dir(const fs::path& out, const RunConfig& rc) { return variant_dir(out, rc.variant) / "runs" / run_id(rc); }

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<CellRecord> execute_cell(const Config& cfg, const RunConfig& rc, const fs::path& corpus_dir, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream train_log(dir / "train.log");
  train_log << "run " << run_id(rc) << "\n";
  TrainResult tr;
  {
    const RunData data = load_run_data(corpus_dir, rc.train_seg);
    tr = train_run(rc, cfg, data, &train_log);
  }
  tr.model.save(dir / "model.wlck");
  std::ofstream(dir / "model_card.txt") << tr.model.card();

  std::vector<CellRecord> records;
  for (SegDur test : cfg.test_segs) {
    const SplitData td = load_test_data(corpus_dir, test, tr.model.stats);
    const EvalResult ev = eval_run(tr.model, td, cfg.threshold, cfg.max_tape_blocks);
    CellRecord r;
    r.run_id = run_id(rc);
    r.variant = rc.variant;
    r.method = rc.method;
    r.train_seg = rc.train_seg;
    r.test_seg = test;
    r.seed = rc.seed;
    r.per_class_f = ev.f.per_class;
    r.macro_f = ev.f.macro;
    r.centroid_accuracy = tr.valid_centroid_accuracy;
    r.threshold = cfg.threshold;
    records.push_back(r);
    train_log << "eval test_seg=" << to_string(test) << " macro_f=" << r.macro_f << "\n";
  }
  return records;
}

std::vector<CellRecord> run_cell(const Config& cfg, const RunConfig& rc, const fs::path& out, std::ostream* log) {
  const fs::path dir = run_dir(out, rc);
  const std::string cfg_text = cell_config_text(cfg, rc);
  if (fs::exists(dir / "records.jsonl") && slurp(dir / "config.txt") == cfg_text) return read_records(dir / "records.jsonl");
  fs::create_directories(dir);
  fs::remove(dir / "records.jsonl");
  { std::ofstream(dir / "config.txt", std::ios::binary) << cfg_text; }

  const auto records = execute_cell(cfg, rc, variant_dir(out, rc.variant), dir);
  write_records(dir / "records.jsonl", records);
  if (log) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " valid_centroid_acc=%.3f", records.front().centroid_accuracy);
    *log << "done " << run_id(rc) << buf << " macro_f:";
    for (const auto& r : records) {
      std::snprintf(buf, sizeof buf, " %s=%.3f", std::string(to_string(r.test_seg)).c_str(), r.macro_f);
      *log << buf;
    }
    *log << "\n" << std::flush;
  }
  return records;
}

ResultGrid run_grid(const Config& cfg, Variant v, const fs::path& out, std::ostream* log) {
  cfg.validate();
  const fs::path vdir = variant_dir(out, v);
  build_corpus(vdir, v, cfg.counts, cfg.master_seed, cfg.workers, log);

  std::vector<RunConfig> jobs;
  for (Method m : cfg.methods) {
    for (SegDur tr : cfg.train_segs) {
      for (auto seed : cfg.seeds) jobs.push_back({v, m, tr, seed});
    }
  }
  std::vector<std::vector<CellRecord>> results(jobs.size());
  std::mutex log_mu;
  std::exception_ptr failure;
  try {
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
      std::ostringstream local;
      try {
        results[i] = run_cell(cfg, jobs[i], out, log ? &local : nullptr);
      } catch (...) {
        if (log) {
          std::lock_guard lock(log_mu);
          *log << "FAILED " << run_id(jobs[i]) << "\n" << std::flush;
        }
        throw;
      }
      if (log) {
        std::lock_guard lock(log_mu);
        *log << local.str() << std::flush;
      }
    });
  } catch (...) {
    failure = std::current_exception();
  }

  std::vector<CellRecord> all;
  for (const auto& rs : results) all.insert(all.end(), rs.begin(), rs.end());
  if (failure) {
    write_records(vdir / "results.partial.jsonl", all);
    std::rethrow_exception(failure);
  }
  write_records(vdir / "results.jsonl", all);
  const ResultGrid g = aggregate(v, all);
  std::ofstream(vdir / "table.txt") << format_table(g);
  return g;
}

ResultGrid load_grid(const fs::path& out, Variant v) {
  const fs::path p = variant_dir(out, v) / "results.jsonl";
  if (!fs::exists(p)) throw Error("missing grid results " + p.string() + " (run `weaklab grid` first)");
  const auto records = read_records(p);
  return aggregate(v, records);
}

}  // namespace weaklab::harness
