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

// weaklab: corpus synthesis, feature extraction, training, evaluation, the
// experiment grid and its report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "weaklab/config.hpp"
#include "weaklab/corpus.hpp"
#include "weaklab/grid.hpp"
#include "weaklab/report.hpp"
#include "weaklab/trainer.hpp"

namespace fs = std::filesystem;
using namespace weaklab;
using namespace weaklab::harness;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out = "weaklab-out";
};

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) app->add_option("--config", c.config, "flat key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "seed (master seed for corpus and grid, run seed for train)");
  app->add_option("--workers", c.workers, "concurrent clips or grid cells")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory");
}

Config load_config(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : Config::load(c.config);
  if (c.workers) cfg.workers = *c.workers;
  cfg.validate();
  return cfg;
}

synth::SplitCounts parse_counts(const std::string& s) {
  Config tmp;
  tmp.set("counts", s);
  return tmp.counts;
}

void print_eval(const RunConfig* rc, SegDur test, const EvalResult& ev) {
  nlohmann::json j;
  if (rc) j["run_id"] = run_id(*rc);
  j["test_seg"] = std::string(to_string(test));
  j["per_class_f"] = ev.f.per_class;
  j["macro_f"] = ev.f.macro;
  std::cout << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weaklab: weak-label study of embedding learning versus end-to-end tagging"};
  app.require_subcommand(1);

  Common c;

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a corpus manifest (and optionally WAV files)");
  std::string counts_text = "1000,200,500";
  std::string variant_text = "waa";
  bool export_wav = false;
  add_common(synth_cmd, c, false);
  synth_cmd->add_option("--counts", counts_text, "clips per split: TRAIN,VALID,EVAL");
  synth_cmd->add_option("--variant", variant_text, "waa or 200ms");
  synth_cmd->add_flag("--export-wav", export_wav, "write 16-bit PCM WAV files under OUT/wav");

  // features
  auto* feat_cmd = app.add_subcommand("features", "compute the log-mel feature cache");
  std::string corpus_dir;
  add_common(feat_cmd, c);
  feat_cmd->add_option("--corpus", corpus_dir, "existing synth output directory (default: build every configured variant under OUT)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one run and save its checkpoint");
  std::string method_text = "classifier", train_seg_text = "1s";
  add_common(train_cmd, c);
  train_cmd->add_option("--method", method_text, "classifier, triplet or prototypical");
  train_cmd->add_option("--train-seg", train_seg_text, "200ms, 1s or 10s");
  train_cmd->add_option("--variant", variant_text, "waa or 200ms");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one test duration");
  std::string checkpoint, test_seg_text = "1s", split_text = "eval";
  add_common(eval_cmd, c);
  eval_cmd->add_option("--checkpoint", checkpoint, "model.wlck")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", corpus_dir, "variant corpus directory")->required();
  eval_cmd->add_option("--test-seg", test_seg_text, "200ms, 1s or 10s");
  eval_cmd->add_option("--split", split_text, "valid or eval");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "run (or resume) the full grid for every configured variant");
  add_common(grid_cmd, c);

  // report
  auto* report_cmd = app.add_subcommand("report", "tables and trend checks from finished grids");
  std::string plot_path;
  add_common(report_cmd, c);
  report_cmd->add_option("--plot", plot_path, "write the event-duration density plot (SVG)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      const auto specs = corpus_specs(parse_variant(variant_text), parse_counts(counts_text), c.seed.value_or(1));
      write_synth_outputs(c.out, specs, export_wav, c.workers.value_or(1));
      std::cerr << "wrote " << specs.size() << " clips to " << c.out << "\n";
    } else if (feat_cmd->parsed()) {
      Config cfg = load_config(c);
      if (c.seed) cfg.master_seed = *c.seed;
      if (!corpus_dir.empty()) {
        write_feature_cache(corpus_dir, cfg.workers, &std::cerr);
      } else {
        for (Variant v : cfg.variants) build_corpus(variant_dir(c.out, v), v, cfg.counts, cfg.master_seed, cfg.workers, &std::cerr);
      }
    } else if (train_cmd->parsed()) {
      const Config cfg = load_config(c);
      const RunConfig rc{parse_variant(variant_text), parse_method(method_text), parse_segdur(train_seg_text), c.seed.value_or(1)};
      const fs::path corpus = variant_dir(c.out, rc.variant);
      if (!corpus_ready(corpus, rc.variant, cfg.counts, cfg.master_seed)) {
        throw Error("no corpus for this config under " + corpus.string() + " (run `weaklab features` first)");
      }
      const fs::path dir = run_dir(c.out, rc);
      fs::create_directories(dir);
      std::ofstream log(dir / "train.log");
      const RunData data = load_run_data(corpus, rc.train_seg);
      const TrainResult tr = train_run(rc, cfg, data, &log);
      tr.model.save(dir / "model.wlck");
      for (const auto& r : tr.history) std::cerr << format_epoch(r) << "\n";
      std::cerr << "checkpoint " << (dir / "model.wlck").string() << "\n";
    } else if (eval_cmd->parsed()) {
      const Config cfg = load_config(c);
      Model model = Model::load(checkpoint);
      const SegDur test = parse_segdur(test_seg_text);
      const SplitData td = load_test_data(corpus_dir, test, model.stats, parse_split(split_text));
      print_eval(nullptr, test, eval_run(model, td, cfg.threshold, cfg.max_tape_blocks));
    } else if (grid_cmd->parsed()) {
      Config cfg = load_config(c);
      if (c.seed) cfg.master_seed = *c.seed;
      for (Variant v : cfg.variants) {
        const ResultGrid g = run_grid(cfg, v, c.out, &std::cerr);
        std::cout << format_table(g) << "\n";
      }
    } else if (report_cmd->parsed()) {
      const ResultGrid g200 = load_grid(c.out, Variant::ms200);
      const ResultGrid gwaa = load_grid(c.out, Variant::waa);
      const auto checks = trend_checks(g200, gwaa);
      const std::string text = format_report(g200, gwaa, checks);
      std::ofstream(fs::path(c.out) / "report.txt") << text;
      std::cout << text;
      if (!plot_path.empty()) {
        Config cfg = load_config(c);
        if (c.seed) cfg.master_seed = *c.seed;
        const auto specs = corpus_specs(Variant::waa, cfg.counts, cfg.master_seed);
        write_duration_density_svg(plot_path, specs);
        std::cerr << "plot " << plot_path << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
