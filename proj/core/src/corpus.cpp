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

#include "weaklab/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "weaklab/feature_cache.hpp"
#include "weaklab/manifest.hpp"
#include "weaklab/rng.hpp"

namespace fs = std::filesystem;

namespace weaklab::harness {
namespace {

constexpr int kCorpusFormat = 1;

std::string marker_text(Variant v, synth::SplitCounts counts, std::uint64_t master_seed) {
  std::ostringstream os;
  os << "format = " << kCorpusFormat << "\nvariant = " << to_string(v) << "\nmaster_seed = " << master_seed
     << "\ncounts = " << counts.train << "," << counts.valid << "," << counts.eval << "\n";
  return os.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

fs::path variant_dir(const fs::path& out, Variant v) { return out / std::string(to_string(v)); }

std::vector<synth::SceneSpec> corpus_specs(Variant v, synth::SplitCounts counts, std::uint64_t master_seed) {
  auto specs = synth::draw_scene_specs(counts, master_seed);
  if (v == Variant::ms200) return synth::make_200ms_variant(specs);
  return specs;
}

synth::Segment corpus_segment(const synth::SceneSpec& spec, SegDur d) {
  return synth::extract_segment(synth::annotate(spec), d, derive_seed(spec.background_seed, 0x5E9));
}

void write_synth_outputs(const fs::path& dir, std::span<const synth::SceneSpec> specs, bool export_wav, int workers) {
  fs::create_directories(dir);
  synth::write_manifest(dir / "manifest.tsv", specs);
  {
    std::ofstream os(dir / "segments.tsv");
    if (!os) throw Error("cannot write " + (dir / "segments.tsv").string());
    os << "# clip_id\tclass_id\tseg\tstart_sample\tevent_overlap\n";
    for (const auto& spec : specs) {
      const auto ann = synth::annotate(spec);
      for (SegDur d : kAllSegDurs) {
        const auto seg = corpus_segment(spec, d);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", synth::event_overlap_fraction(ann, seg));
        os << spec.clip_id << '\t' << spec.class_id << '\t' << to_string(d) << '\t' << seg.start_sample << '\t' << buf << '\n';
      }
    }
  }
  if (export_wav) {
    fs::create_directories(dir / "wav");
    parallel_for(specs.size(), workers, [&](std::size_t i) {
      synth::write_wav(dir / "wav" / (specs[i].clip_id + ".wav"), synth::mix_scene(specs[i]).audio);
    });
  }
}

fs::path feature_path(const fs::path& dir, Split split, SegDur d) {
  return dir / "features" / (std::string(to_string(split)) + "_" + std::string(to_string(d)) + ".wlf");
}

std::vector<synth::SceneSpec> load_split_specs(const fs::path& dir, Split split) {
  std::vector<synth::SceneSpec> out;
  for (auto& s : synth::read_manifest(dir / "manifest.tsv")) {
    if (s.split == split) out.push_back(std::move(s));
  }
  return out;
}

void write_feature_cache(const fs::path& dir, int workers, std::ostream* log) {
  fs::create_directories(dir / "features");
  for (Split split : {Split::train, Split::valid, Split::eval}) {
    const auto specs = load_split_specs(dir, split);
    std::array<std::vector<dsp::LogMelFeature>, 3> feats;
    for (auto& f : feats) f.resize(specs.size());
    parallel_for(specs.size(), workers, [&](std::size_t i) {
      const auto mix = synth::mix_scene(specs[i]);
      for (SegDur d : kAllSegDurs) {
        const auto seg = corpus_segment(specs[i], d);
        feats[static_cast<std::size_t>(index_of(d))][i] = dsp::log_mel(synth::segment_view(mix.audio, seg));
      }
    });
    for (SegDur d : kAllSegDurs) dsp::write_features(feature_path(dir, split, d), feats[static_cast<std::size_t>(index_of(d))]);
    if (log) *log << "features: " << to_string(split) << " " << specs.size() << " clips\n" << std::flush;
  }
}

bool corpus_ready(const fs::path& dir, Variant v, synth::SplitCounts counts, std::uint64_t master_seed) {
  return read_file(dir / "corpus.done") == marker_text(v, counts, master_seed);
}

void build_corpus(const fs::path& dir, Variant v, synth::SplitCounts counts, std::uint64_t master_seed, int workers,
                  std::ostream* log) {
  if (corpus_ready(dir, v, counts, master_seed)) return;
  fs::create_directories(dir);
  fs::remove(dir / "corpus.done");
  const auto specs = corpus_specs(v, counts, master_seed);
  write_synth_outputs(dir, specs, false, workers);
  if (log) *log << "synth: " << to_string(v) << " " << specs.size() << " clips -> " << dir.string() << "\n" << std::flush;
  write_feature_cache(dir, workers, log);
  std::ofstream(dir / "corpus.done") << marker_text(v, counts, master_seed);
}

std::vector<dsp::LogMelFeature> load_features(const fs::path& dir, Split split, SegDur d) {
  const auto p = feature_path(dir, split, d);
  if (!fs::exists(p)) throw Error("missing feature cache " + p.string() + " (run `weaklab features` first)");
  return dsp::read_features(p);
}

}  // namespace weaklab::harness
