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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   acceptance --config configs/acceptance.cfg --out build/acceptance-out
//
// Trained cells are cached under --out (same layout as `weaklab grid`), so a
// rerun with an unchanged config only re-checks them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradient_suite.hpp"
#include "oracle_suite.hpp"
#include "weaklab/config.hpp"
#include "weaklab/corpus.hpp"
#include "weaklab/dsp.hpp"
#include "weaklab/evalmetrics.hpp"
#include "weaklab/grid.hpp"
#include "weaklab/manifest.hpp"
#include "weaklab/nets.hpp"
#include "weaklab/synthgen.hpp"

namespace fs = std::filesystem;
using namespace weaklab;
using namespace weaklab::harness;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pct(double v) { return fmt("%.1f", 100.0 * v); }

// ---------------------------------------------------------------------------
// 1-2

Outcome gradient_criterion() {
  const auto t0 = Clock::now();
  const auto checks = wltest::run_gradient_suite(20, 2024);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = secs < 60.0 && !checks.empty();
  double worst = 0.0;
  std::string worst_name;
  int min_instances = 1 << 30;
  for (const auto& c : checks) {
    min_instances = std::min(min_instances, c.instances);
    if (c.worst > worst) {
      worst = c.worst;
      worst_name = c.name;
    }
    if (c.worst > wltest::kGradTolerance || c.instances < 20) {
      o.pass = false;
      o.detail += c.name + " worst " + fmt("%.2e", c.worst) + "; ";
    }
  }
  o.detail += std::to_string(checks.size()) + " checks, >= " + std::to_string(min_instances) + " instances each, worst rel err " +
              fmt("%.2e", worst) + " (" + worst_name + "), h = 1e-5, " + fmt("%.1f", secs) + " s";
  return o;
}

Outcome oracle_criterion() {
  const auto t0 = Clock::now();
  const auto checks = wltest::run_oracle_suite(50, 4048);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = secs < 60.0 && !checks.empty();
  for (const auto& c : checks) {
    const bool ok = c.worst <= c.tolerance && c.instances >= 50;
    o.pass = o.pass && ok;
    o.detail += c.name + " " + fmt("%.1e", c.worst) + (ok ? "" : " FAIL") + "; ";
  }
  o.detail += fmt("%.1f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 3

double oracle_snr_db(const synth::MixedScene& m, const synth::Waveform& bg) {
  const auto on = static_cast<std::size_t>(m.annotation.onset_sample());
  const auto off = static_cast<std::size_t>(m.annotation.offset_sample());
  double pe = 0.0, pb = 0.0;
  for (std::size_t i = on; i < off; ++i) {
    const double e = static_cast<double>(m.audio.samples[i]) / m.peak_scale - bg.samples[i];
    pe += e * e;
    pb += static_cast<double>(bg.samples[i]) * bg.samples[i];
  }
  return 10.0 * std::log10(pe / pb);
}

Outcome dataset_criterion(const Config& cfg, const fs::path& out) {
  const auto t0 = Clock::now();
  Outcome o;
  std::ostringstream bad;
  long failures = 0;
  auto fail = [&](const std::string& what) {
    if (failures++ < 5) bad << what << "; ";
  };

  std::map<Variant, std::vector<synth::SceneSpec>> specs;
  for (Variant v : {Variant::ms200, Variant::waa}) {
    specs[v] = corpus_specs(v, cfg.counts, cfg.master_seed);
    // Determinism of the scene draw, against the manifest a separate process wrote.
    const auto on_disk = synth::read_manifest(variant_dir(out, v) / "manifest.tsv");
    if (on_disk.size() != specs[v].size()) fail(std::string(to_string(v)) + ": manifest size differs");
    for (std::size_t i = 0; i < std::min(on_disk.size(), specs[v].size()); ++i) {
      if (synth::format_manifest_record(on_disk[i]) != synth::format_manifest_record(specs[v][i])) {
        fail(std::string(to_string(v)) + ": manifest differs at " + specs[v][i].clip_id);
      }
    }
    if (corpus_specs(v, cfg.counts, cfg.master_seed).size() != specs[v].size()) fail("redraw differs");

    // Balance and disjointness.
    std::map<Split, std::map<int, int>> per_class;
    std::map<Split, std::set<std::int64_t>> sources;
    for (const auto& s : specs[v]) {
      ++per_class[s.split][s.class_id];
      sources[s.split].insert(s.source_event_id);
    }
    for (Split sp : {Split::train, Split::valid, Split::eval}) {
      for (int k = 0; k < kNumClasses; ++k) {
        if (per_class[sp][k] * kNumClasses != cfg.counts.of(sp)) {
          fail(std::string(to_string(v)) + " " + std::string(to_string(sp)) + " unbalanced at class " + std::to_string(k));
        }
      }
    }
    for (Split a : {Split::train, Split::valid, Split::eval}) {
      for (Split b : {Split::train, Split::valid, Split::eval}) {
        if (a >= b) continue;
        for (auto id : sources[a]) {
          if (sources[b].count(id)) fail("source " + std::to_string(id) + " shared between splits");
        }
      }
    }
  }

  // Per clip: SNR through an independent background, segment containment and
  // cross-process determinism of the audio (fresh features of the 1 s segment
  // must equal the cached ones bit for bit).
  double worst_snr = 0.0;
  long clips = 0;
  const auto& base = specs[Variant::waa];
  std::map<Variant, std::map<Split, std::vector<dsp::LogMelFeature>>> cached;
  std::map<Variant, std::map<Split, std::size_t>> cursor;
  for (Variant v : {Variant::ms200, Variant::waa}) {
    for (Split sp : {Split::train, Split::valid, Split::eval}) cached[v][sp] = load_features(variant_dir(out, v), sp, SegDur::s1);
  }
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto bg = synth::synth_background(kClipSeconds, base[i].background_seed);
    for (Variant v : {Variant::ms200, Variant::waa}) {
      const auto& spec = specs[v][i];
      if (spec.background_seed != base[i].background_seed) fail(spec.clip_id + " background differs between variants");
      const auto mix = synth::mix_scene(spec);
      ++clips;
      const double err = std::abs(oracle_snr_db(mix, bg) - spec.snr_db);
      worst_snr = std::max(worst_snr, err);
      if (err > 0.1) fail(std::string(to_string(v)) + "/" + spec.clip_id + " SNR off by " + fmt("%.3f", err) + " dB");

      const auto ann = synth::annotate(spec);
      for (SegDur d : kAllSegDurs) {
        const auto seg = corpus_segment(spec, d);
        const std::int64_t s0 = seg.start_sample;
        const std::int64_t s1 = s0 + static_cast<std::int64_t>(std::llround(seg_seconds(d) * kSampleRate));
        const std::int64_t e0 = ann.onset_sample(), e1 = ann.offset_sample();
        const bool inside_clip = s0 >= 0 && s1 <= static_cast<std::int64_t>(kClipSamples);
        const bool contained = (e1 - e0 >= s1 - s0) ? (e0 <= s0 && s1 <= e1) : (s0 <= e0 && e1 <= s1);
        if (!inside_clip || !contained) fail(std::string(to_string(v)) + "/" + spec.clip_id + " " + std::string(to_string(d)) + " segment containment");
      }
      const std::size_t k = cursor[v][spec.split]++;
      const auto& feats = cached[v][spec.split];
      const auto fresh = dsp::log_mel(synth::segment_view(mix.audio, corpus_segment(spec, SegDur::s1)));
      if (k >= feats.size() || feats[k].values != fresh.values) fail(std::string(to_string(v)) + "/" + spec.clip_id + " audio differs from the cached corpus");
    }
  }
  const double secs = seconds_since(t0);
  o.pass = failures == 0 && secs < 300.0;
  o.detail = bad.str() + std::to_string(clips) + " clips in both variants, worst SNR error " + fmt("%.4f", worst_snr) +
             " dB, " + std::to_string(failures) + " violations, " + fmt("%.0f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 4-9

std::vector<RunConfig> needed_runs(const Config& cfg) {
  using enum SegDur;
  std::vector<std::pair<Variant, std::pair<Method, SegDur>>> cells;
  for (Method m : kAllMethods) {
    for (SegDur d : {ms200, s10}) cells.push_back({Variant::ms200, {m, d}});
  }
  for (SegDur d : kAllSegDurs) cells.push_back({Variant::waa, {Method::classifier, d}});
  cells.push_back({Variant::waa, {Method::triplet, s10}});
  std::vector<RunConfig> runs;
  for (const auto& [v, mt] : cells) {
    for (auto seed : cfg.seeds) runs.push_back({v, mt.first, mt.second, seed});
  }
  return runs;
}

struct Records {
  std::map<std::tuple<Variant, Method, SegDur, SegDur>, std::map<std::uint64_t, CellRecord>> by_cell;

  double value(Variant v, Method m, SegDur tr, SegDur te, std::uint64_t seed) const {
    return by_cell.at({v, m, tr, te}).at(seed).macro_f;
  }
  std::pair<double, double> mean_std(Variant v, Method m, SegDur tr, SegDur te) const {
    const auto& rs = by_cell.at({v, m, tr, te});
    double mean = 0.0;
    for (const auto& [s, r] : rs) mean += r.macro_f;
    mean /= static_cast<double>(rs.size());
    double ss = 0.0;
    for (const auto& [s, r] : rs) ss += (r.macro_f - mean) * (r.macro_f - mean);
    const double sd = rs.size() > 1 ? std::sqrt(ss / static_cast<double>(rs.size() - 1)) : 0.0;
    return {mean, sd};
  }
};

Outcome collapse_criterion(const Records& r, const Config& cfg) {
  using enum SegDur;
  Outcome o;
  int ok_seeds = 0;
  std::ostringstream d;
  for (auto seed : cfg.seeds) {
    bool ok = true;
    double min_gap = 1.0;
    for (SegDur te : kAllSegDurs) {
      const double cls = r.value(Variant::ms200, Method::classifier, s10, te, seed);
      for (Method m : {Method::triplet, Method::prototypical}) {
        const double gap = cls - r.value(Variant::ms200, m, s10, te, seed);
        min_gap = std::min(min_gap, gap);
        ok = ok && gap >= 0.20;
      }
    }
    ok_seeds += ok ? 1 : 0;
    d << "seed " << seed << " min gap " << pct(min_gap) << (ok ? "" : " (short)") << "; ";
  }
  for (SegDur te : kAllSegDurs) {
    d << to_string(te) << ": cls " << pct(r.mean_std(Variant::ms200, Method::classifier, s10, te).first) << " trip "
      << pct(r.mean_std(Variant::ms200, Method::triplet, s10, te).first) << " proto "
      << pct(r.mean_std(Variant::ms200, Method::prototypical, s10, te).first) << "; ";
  }
  const int need = static_cast<int>(std::ceil(2.0 * static_cast<double>(cfg.seeds.size()) / 3.0 - 1e-9));
  o.pass = ok_seeds >= need;
  o.detail = d.str() + std::to_string(ok_seeds) + "/" + std::to_string(cfg.seeds.size()) + " seeds with gap >= 20 points";
  return o;
}

Outcome robustness_criterion(const Records& r) {
  using enum SegDur;
  const auto cls = r.mean_std(Variant::waa, Method::classifier, s10, s10);
  const auto tri = r.mean_std(Variant::waa, Method::triplet, s10, s10);
  return {cls.first - tri.first >= 0.15, "classifier 10s/10s " + pct(cls.first) + "+-" + pct(cls.second) + " vs triplet " +
                                             pct(tri.first) + "+-" + pct(tri.second) + ", gap " + pct(cls.first - tri.first) +
                                             " (need >= 15.0)"};
}

Outcome mismatch_criterion(const Records& r) {
  using enum SegDur;
  Outcome o{true, ""};
  for (Method m : kAllMethods) {
    const double near = r.mean_std(Variant::ms200, m, ms200, ms200).first;
    const double far = r.mean_std(Variant::ms200, m, ms200, s10).first;
    const bool ok = near > 0.0 && far <= 0.5 * near;
    o.pass = o.pass && ok;
    o.detail += std::string(to_string(m)) + " 200ms->200ms " + pct(near) + " 200ms->10s " + pct(far) +
                (near > 0.0 ? " (drop " + pct(1.0 - far / near) + "%)" : "") + (ok ? "; " : " FAIL; ");
  }
  return o;
}

Outcome diagonal_criterion(const Records& r) {
  Outcome o{true, ""};
  const auto diag = r.mean_std(Variant::waa, Method::classifier, SegDur::s1, SegDur::s1);
  o.detail = "1s/1s " + pct(diag.first) + "+-" + pct(diag.second) + " vs";
  for (SegDur tr : kAllSegDurs) {
    for (SegDur te : kAllSegDurs) {
      if (tr == SegDur::s1 && te == SegDur::s1) continue;
      const auto c = r.mean_std(Variant::waa, Method::classifier, tr, te);
      const bool above = c.first > diag.first;
      const bool tie = above && c.first - diag.first <= std::max(diag.second, c.second);
      o.pass = o.pass && (!above || tie);
      o.detail += " " + std::string(to_string(tr)) + "/" + std::string(to_string(te)) + " " + pct(c.first) + "+-" +
                  pct(c.second) + (above ? (tie ? " (tie)" : " (exceeds)") : "") + ";";
    }
  }
  return o;
}

Outcome centroid_criterion(const Records& r, const Config& cfg) {
  Outcome o{true, ""};
  for (Method m : {Method::triplet, Method::prototypical}) {
    for (auto seed : cfg.seeds) {
      const double acc = r.by_cell.at({Variant::ms200, m, SegDur::ms200, SegDur::ms200}).at(seed).centroid_accuracy;
      o.pass = o.pass && acc >= 0.3;
      o.detail += std::string(to_string(m)) + " s" + std::to_string(seed) + " " + fmt("%.3f", acc) + "; ";
    }
  }
  // Perfectly clustered fixture: ten tight, well separated clusters in 130-d.
  std::vector<float> emb;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    const int k = i % kNumClasses;
    for (int q = 0; q < nets::kEmbeddingDim; ++q) {
      const float jitter = static_cast<float>(((i * 7 + q * 13) % 11) - 5) * 1e-3f;
      emb.push_back((q == k ? 5.0f : 0.0f) + jitter);
    }
    labels.push_back(k);
  }
  const auto cs = eval::class_centroids(emb, labels, nets::kEmbeddingDim);
  const double fixture = eval::centroid_accuracy(emb, labels, cs);
  o.pass = o.pass && fixture == 1.0;
  o.detail += "fixture " + fmt("%.3f", fixture) + " (need runs >= 0.300, fixture exactly 1)";
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism_criterion(const Config& cfg, const fs::path& out, const RunConfig& rc) {
  const auto t0 = Clock::now();
  const fs::path cached = run_dir(out, rc);
  const fs::path again = out / "determinism" / run_id(rc);
  fs::remove_all(again);
  const auto fresh = execute_cell(cfg, rc, variant_dir(out, rc.variant), again);
  const auto stored = read_records(cached / "records.jsonl");
  const bool same_records = fresh == stored;
  std::ostringstream lines_a, lines_b;
  for (const auto& r : fresh) lines_a << to_json(r) << "\n";
  const bool same_bytes = lines_a.str() == slurp(cached / "records.jsonl");
  const bool same_model = slurp(again / "model.wlck") == slurp(cached / "model.wlck");
  return {same_records && same_bytes && same_model,
          run_id(rc) + " re-executed: records " + (same_records && same_bytes ? "bit-identical" : "DIFFER") + ", checkpoint " +
              (same_model ? "identical" : "DIFFERS") + ", " + fmt("%.0f", seconds_since(t0)) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weaklab acceptance suite"};
  std::string config_path, out_dir = "acceptance-out";
  int workers = 1;
  app.add_option("--config", config_path, "flat key = value configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "cache directory for the corpus and trained cells");
  app.add_option("--workers", workers, "concurrent grid cells")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  int failed = 0;
  std::ostringstream summary;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::ostringstream line;
    line << "criterion " << id << " [" << (o.pass ? "PASS" : "FAIL") << "] " << name << ": " << o.detail;
    std::cout << line.str() << std::endl;
    summary << line.str() << "\n";
    failed += o.pass ? 0 : 1;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("error: ") + e.what()};
    }
  };

  try {
    Config cfg = Config::load(config_path);
    cfg.workers = workers;
    cfg.validate();
    const fs::path out = out_dir;

    report(1, "gradient correctness", guarded(gradient_criterion));
    report(2, "oracle equivalence", guarded(oracle_criterion));

    for (Variant v : {Variant::ms200, Variant::waa}) build_corpus(variant_dir(out, v), v, cfg.counts, cfg.master_seed, workers, &std::cerr);
    report(3, "dataset contract", guarded([&] { return dataset_criterion(cfg, out); }));

    const auto runs = needed_runs(cfg);
    Records records;
    const auto t0 = Clock::now();
    parallel_for(runs.size(), workers, [&](std::size_t i) {
      const auto t = Clock::now();
      std::ostringstream log;
      run_cell(cfg, runs[i], out, &log);
      if (!log.str().empty()) std::cerr << "[" << fmt("%.0f", seconds_since(t)) << " s] " << log.str() << std::flush;
    });
    for (const auto& rc : runs) {
      for (const auto& r : read_records(run_dir(out, rc) / "records.jsonl")) {
        records.by_cell[{r.variant, r.method, r.train_seg, r.test_seg}][r.seed] = r;
      }
    }
    std::cerr << runs.size() << " cells ready in " << fmt("%.0f", seconds_since(t0)) << " s\n";

    report(4, "weak-label collapse (200ms variant)", guarded([&] { return collapse_criterion(records, cfg); }));
    report(5, "classifier robustness (WAA)", guarded([&] { return robustness_criterion(records); }));
    report(6, "duration-mismatch degradation (200ms variant)", guarded([&] { return mismatch_criterion(records); }));
    report(7, "diagonal advantage (WAA classifier)", guarded([&] { return diagonal_criterion(records); }));
    report(8, "centroid metric validity", guarded([&] { return centroid_criterion(records, cfg); }));
    const RunConfig probe{Variant::ms200, Method::prototypical, SegDur::ms200, cfg.seeds.front()};
    report(9, "determinism", guarded([&] { return determinism_criterion(cfg, out, probe); }));

    std::ofstream(out / "acceptance.txt") << summary.str();
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
