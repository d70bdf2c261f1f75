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

#include "weaklab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "weaklab/checkpoint.hpp"
#include "weaklab/corpus.hpp"
#include "weaklab/losses.hpp"
#include "weaklab/rng.hpp"

namespace fs = std::filesystem;

namespace weaklab::harness {

using nets::kBlockValues;
using nets::kEmbeddingDim;
using nets::Mode;
using Tape = ad::Tape<float>;
using Var = ad::Var<float>;

std::span<const float> SplitData::segment_blocks(std::size_t i) const {
  const auto len = static_cast<std::size_t>(blocks_per_segment) * kBlockValues;
  return std::span<const float>(blocks).subspan(i * len, len);
}

std::vector<float> SplitData::gather(std::span<const int> segments) const {
  std::vector<float> out;
  out.reserve(segments.size() * static_cast<std::size_t>(blocks_per_segment) * kBlockValues);
  for (int s : segments) {
    const auto b = segment_blocks(static_cast<std::size_t>(s));
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

std::vector<float> SplitData::targets() const {
  std::vector<float> t(labels.size() * kNumClasses, 0.0f);
  for (std::size_t i = 0; i < labels.size(); ++i) t[i * kNumClasses + static_cast<std::size_t>(labels[i])] = 1.0f;
  return t;
}

dsp::FeatureStats feature_stats(const std::vector<dsp::LogMelFeature>& features) {
  dsp::FeatureStatsAccumulator acc;
  for (const auto& f : features) acc.add(f);
  return acc.finish();
}

SplitData make_split_data(std::vector<dsp::LogMelFeature> features, std::span<const int> labels, const dsp::FeatureStats& stats) {
  if (features.size() != labels.size()) throw Error("make_split_data: feature and label counts differ");
  SplitData d;
  d.labels.assign(labels.begin(), labels.end());
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& f = features[i];
    const int bps = nets::num_blocks(f.frames);
    if (i == 0) d.blocks_per_segment = bps;
    if (bps != d.blocks_per_segment || bps == 0) throw Error("make_split_data: segments of unequal length");
    dsp::standardize(f, stats);
    nets::append_blocks(f, d.blocks);
    f = {};
  }
  return d;
}

std::string run_id(const RunConfig& rc) {
  return std::string(to_string(rc.variant)) + "-" + std::string(to_string(rc.method)) + "-" + std::string(to_string(rc.train_seg)) +
         "-s" + std::to_string(rc.seed);
}

// ---------------------------------------------------------------------------
// Model

void Model::init(std::uint64_t seed) {
  embed.init(derive_seed(seed, 0xE));
  head.init(derive_seed(seed, 0x6));
}

std::vector<float> Model::embeddings(const SplitData& d, int max_blocks) {
  return nets::embed_many(embed, d.blocks, d.blocks_per_segment, normalized(), max_blocks);
}

std::vector<float> Model::probabilities(const SplitData& d, int max_blocks) {
  return nets::classify_many(head, embeddings(d, max_blocks));
}

namespace {

ad::Parameter<float> stats_tensor(const char* name, const std::array<double, dsp::kMels>& v) {
  ad::Parameter<float> p(name, {dsp::kMels});
  std::copy(v.begin(), v.end(), p.value.begin());
  return p;
}

}  // namespace

void Model::save(const fs::path& path) const {
  auto params = embed.parameters();
  const auto hp = head.parameters();
  params.insert(params.end(), hp.begin(), hp.end());
  const auto mean = stats_tensor("norm.mean", stats.mean);
  const auto sd = stats_tensor("norm.std", stats.stddev);
  ad::Parameter<float> meta("meta.method", {1});
  meta.value[0] = static_cast<float>(static_cast<int>(method));
  params.push_back(&mean);
  params.push_back(&sd);
  params.push_back(&meta);
  ad::save_checkpoint(path, params);
}

Model Model::load(const fs::path& path) {
  const auto records = ad::load_checkpoint(path);
  Model m;
  auto params = m.embed.parameters();
  const auto hp = m.head.parameters();
  params.insert(params.end(), hp.begin(), hp.end());
  auto mean = stats_tensor("norm.mean", {});
  auto sd = stats_tensor("norm.std", {});
  ad::Parameter<float> meta("meta.method", {1});
  params.push_back(&mean);
  params.push_back(&sd);
  params.push_back(&meta);
  ad::assign(records, params);
  std::copy(mean.value.begin(), mean.value.end(), m.stats.mean.begin());
  std::copy(sd.value.begin(), sd.value.end(), m.stats.stddev.begin());
  const int method = static_cast<int>(meta.value[0]);
  if (method < 0 || method > 2) throw Error(path.string() + ": bad method tag");
  m.method = static_cast<Method>(method);
  return m;
}

std::string Model::card() const {
  std::ostringstream os;
  os << "method " << to_string(method) << "\n";
  os << "input block " << nets::kBlockFrames << " frames x " << dsp::kMels << " mels\n";
  os << "conv channels";
  for (int c : nets::kConvChannels) os << ' ' << c;
  os << " (kernel " << nets::kKernel << "x" << nets::kKernel << ", leaky relu " << nets::kLeakySlope << ")\n";
  os << "embedding dim " << nets::kEmbeddingDim << (normalized() ? " (unit L2 norm)" : " (raw)") << "\n";
  os << "head " << nets::kEmbeddingDim << " -> " << nets::kHiddenDim << " -> " << kNumClasses << " sigmoid\n";
  os << "segment aggregation: mean over blocks\n";
  os << "standardization (per mel band, train split)\n";
  char buf[96];
  for (int m = 0; m < dsp::kMels; ++m) {
    std::snprintf(buf, sizeof buf, "  band %2d mean %.6f std %.6f\n", m, stats.mean[m], stats.stddev[m]);
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Data

namespace {

std::vector<int> labels_of(const std::vector<synth::SceneSpec>& specs) {
  std::vector<int> out;
  for (const auto& s : specs) out.push_back(s.class_id);
  return out;
}

}  // namespace

RunData load_run_data(const fs::path& corpus_dir, SegDur train_seg) {
  RunData rd;
  auto train = load_features(corpus_dir, Split::train, train_seg);
  rd.stats = feature_stats(train);
  rd.train = make_split_data(std::move(train), labels_of(load_split_specs(corpus_dir, Split::train)), rd.stats);
  rd.valid = make_split_data(load_features(corpus_dir, Split::valid, train_seg), labels_of(load_split_specs(corpus_dir, Split::valid)),
                             rd.stats);
  return rd;
}

SplitData load_test_data(const fs::path& corpus_dir, SegDur test_seg, const dsp::FeatureStats& stats, Split split) {
  return make_split_data(load_features(corpus_dir, split, test_seg), labels_of(load_split_specs(corpus_dir, split)), stats);
}

// ---------------------------------------------------------------------------
// Training

namespace {

class BatchStream {
 public:
  BatchStream(std::size_t n, std::uint64_t seed) : rng_(seed), perm_(n) {
    for (std::size_t i = 0; i < n; ++i) perm_[i] = static_cast<int>(i);
    shuffle();
  }

  std::vector<int> next(std::size_t count) {
    std::vector<int> out;
    while (out.size() < count) {
      if (pos_ == perm_.size()) shuffle();
      out.push_back(perm_[pos_++]);
    }
    return out;
  }

 private:
  void shuffle() {
    for (std::size_t i = perm_.size(); i > 1; --i) std::swap(perm_[i - 1], perm_[rng_.below(i)]);
    pos_ = 0;
  }

  Rng rng_;
  std::vector<int> perm_;
  std::size_t pos_ = 0;
};

using Snapshot = std::vector<std::vector<float>>;

template <typename Params>
Snapshot snapshot(const Params& ps) {
  Snapshot s;
  for (const auto* p : ps) s.push_back(p->value);
  return s;
}

template <typename Params>
void restore(const Params& ps, const Snapshot& s) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s[i];
}

void check_finite(double loss, const RunConfig& rc, const char* phase, int epoch, long step) {
  if (!std::isfinite(loss)) {
    throw Error(run_id(rc) + ": non-finite loss in " + phase + " phase (epoch " + std::to_string(epoch) + ", step " +
                std::to_string(step) + ")");
  }
}

std::vector<float> gather_targets(const SplitData& d, std::span<const int> segs) {
  std::vector<float> t(segs.size() * kNumClasses, 0.0f);
  for (std::size_t i = 0; i < segs.size(); ++i) t[i * kNumClasses + static_cast<std::size_t>(d.labels[segs[i]])] = 1.0f;
  return t;
}

Var block_input(Tape& tape, std::vector<float> blocks) {
  const int n = static_cast<int>(blocks.size() / kBlockValues);
  return tape.constant({n, nets::kBlockFrames, dsp::kMels, 1}, std::move(blocks));
}

// Joint E+G step on BCE. The batch mean decomposes over segments, so large
// batches are split into micro-batches whose gradients add up exactly.
double classifier_step(Model& m, const SplitData& d, std::span<const int> batch, int max_blocks) {
  const std::size_t per = std::max<std::size_t>(1, static_cast<std::size_t>(max_blocks / d.blocks_per_segment));
  double total = 0.0;
  for (std::size_t s0 = 0; s0 < batch.size(); s0 += per) {
    const auto chunk = batch.subspan(s0, std::min(per, batch.size() - s0));
    Tape tape;
    auto e = m.embed.embed_segments(tape, block_input(tape, d.gather(chunk)), d.blocks_per_segment, Mode::train);
    auto p = m.head.probabilities(tape, e, Mode::train);
    const int n = static_cast<int>(chunk.size());
    auto loss = losses::bce_loss(p, tape.constant({n, kNumClasses}, gather_targets(d, chunk)));
    loss = ad::scale(loss, static_cast<float>(chunk.size()) / static_cast<float>(batch.size()));
    total += loss.item();
    tape.backward(loss);
  }
  return total;
}

// Gradient of loss_fn(E(segments)) with respect to E's parameters. Small
// batches use one tape. Larger ones are done in two passes: embeddings
// without a tape, the loss gradient w.r.t. the embeddings, then one
// vector-Jacobian product per chunk of segments.
template <typename LossFn>
double embedding_step(Model& m, const SplitData& d, const std::vector<int>& segs, int max_blocks, LossFn&& loss_fn) {
  const int bps = d.blocks_per_segment;
  const int n = static_cast<int>(segs.size());
  if (static_cast<long>(n) * bps <= max_blocks) {
    Tape tape;
    auto e = m.embed.embed_segments(tape, block_input(tape, d.gather(segs)), bps, Mode::train);
    if (m.normalized()) e = ad::l2_normalize(e, 1);
    auto loss = loss_fn(tape, e);
    const double value = loss.item();
    if (std::isfinite(value)) tape.backward(loss);
    return value;
  }
  std::vector<float> emb = nets::embed_many(m.embed, d.gather(segs), bps, false, max_blocks);
  std::vector<float> upstream;
  double value = 0.0;
  {
    Tape tape;
    auto e = tape.leaf({n, kEmbeddingDim}, std::move(emb));
    auto loss = loss_fn(tape, m.normalized() ? ad::l2_normalize(e, 1) : e);
    value = loss.item();
    if (!std::isfinite(value)) return value;
    tape.backward(loss);
    upstream.assign(e.grad().begin(), e.grad().end());
    if (upstream.empty()) upstream.assign(static_cast<std::size_t>(n) * kEmbeddingDim, 0.0f);
  }
  const std::size_t per = std::max<std::size_t>(1, static_cast<std::size_t>(max_blocks / bps));
  for (std::size_t s0 = 0; s0 < segs.size(); s0 += per) {
    const std::size_t s1 = std::min(segs.size(), s0 + per);
    Tape tape;
    auto e = m.embed.embed_segments(tape, block_input(tape, d.gather(std::span(segs).subspan(s0, s1 - s0))), bps, Mode::train);
    tape.backward(e, std::span<const float>(upstream).subspan(s0 * kEmbeddingDim, (s1 - s0) * kEmbeddingDim));
  }
  return value;
}

double triplet_step(Model& m, const SplitData& d, const Config& cfg, std::uint64_t seed) {
  const auto triplets = losses::sample_triplets(d.labels, cfg.triplet_batch, seed);
  std::map<int, int> pos;
  std::vector<int> segs;
  auto slot = [&](int s) {
    auto [it, inserted] = pos.try_emplace(s, static_cast<int>(segs.size()));
    if (inserted) segs.push_back(s);
    return it->second;
  };
  std::vector<int> ia, ip, in;
  for (const auto& t : triplets) {
    ia.push_back(slot(t.anchor));
    ip.push_back(slot(t.positive));
    in.push_back(slot(t.negative));
  }
  return embedding_step(m, d, segs, cfg.max_tape_blocks, [&](Tape&, Var e) {
    return losses::triplet_loss(ad::gather_rows(e, ia), ad::gather_rows(e, ip), ad::gather_rows(e, in), static_cast<float>(cfg.margin));
  });
}

double proto_step(Model& m, const SplitData& d, const Config& cfg, std::uint64_t seed) {
  const auto ep = losses::sample_episode(d.labels, cfg.m_support, cfg.m_query, seed);
  auto segs = ep.support_rows();
  const auto q = ep.query_rows();
  segs.insert(segs.end(), q.begin(), q.end());
  const int ns = ep.classes * ep.m_support;
  std::vector<int> is(static_cast<std::size_t>(ns)), iq(q.size());
  for (int i = 0; i < ns; ++i) is[i] = i;
  for (std::size_t i = 0; i < q.size(); ++i) iq[i] = ns + static_cast<int>(i);
  return embedding_step(m, d, segs, cfg.max_tape_blocks, [&](Tape&, Var e) {
    return losses::proto_loss(ad::gather_rows(e, is), ad::gather_rows(e, iq), ep.classes, ep.m_support, ep.m_query);
  });
}

void emit(std::vector<EpochRecord>& history, std::ostream* log, EpochRecord r) {
  if (log) *log << format_epoch(r) << "\n" << std::flush;
  history.push_back(std::move(r));
}

double macro_f(const std::vector<float>& probs, const SplitData& d, double threshold) {
  return eval::f_measure(probs, d.targets(), threshold).macro;
}

// Fits G on fixed embeddings with BCE; keeps the best validation macro-F.
void train_head(Model& m, const std::vector<float>& e_train, const SplitData& train, const std::vector<float>& e_valid,
                const SplitData& valid, const RunConfig& rc, const Config& cfg, std::vector<EpochRecord>& history,
                std::ostream* log) {
  if (cfg.head_budget.max_epochs == 0) return;
  auto params = m.head.parameters();
  ad::Adam<float> opt(params, cfg.adam);
  eval::EarlyStopper stopper(cfg.head_budget.patience, cfg.min_delta);
  BatchStream stream(train.size(), derive_seed(rc.seed, 0x4EAD, 1));
  const int steps = static_cast<int>((train.size() + cfg.head_batch - 1) / cfg.head_batch);
  Snapshot best = snapshot(params);
  long step = 0;
  for (int epoch = 0; epoch < cfg.head_budget.max_epochs; ++epoch) {
    double sum = 0.0;
    for (int s = 0; s < steps; ++s, ++step) {
      const auto batch = stream.next(static_cast<std::size_t>(cfg.head_batch));
      std::vector<float> rows;
      for (int i : batch) {
        rows.insert(rows.end(), e_train.begin() + static_cast<std::ptrdiff_t>(i) * kEmbeddingDim,
                    e_train.begin() + static_cast<std::ptrdiff_t>(i + 1) * kEmbeddingDim);
      }
      opt.zero_grad();
      Tape tape;
      const int n = static_cast<int>(batch.size());
      auto p = m.head.probabilities(tape, tape.constant({n, kEmbeddingDim}, std::move(rows)), Mode::train);
      auto loss = losses::bce_loss(p, tape.constant({n, kNumClasses}, gather_targets(train, batch)));
      const double v = loss.item();
      check_finite(v, rc, "head", epoch, step);
      tape.backward(loss);
      opt.step();
      sum += v;
    }
    const double metric = macro_f(nets::classify_many(m.head, e_valid), valid, cfg.threshold);
    const bool improved = stopper.update(metric);
    if (improved) best = snapshot(params);
    emit(history, log, {"head", epoch, sum / steps, metric, improved});
    if (stopper.should_stop()) break;
  }
  restore(params, best);
}

int default_steps(Method method, std::size_t n, const Config& cfg) {
  std::size_t per_step = 1;
  switch (method) {
    case Method::classifier: per_step = static_cast<std::size_t>(cfg.bce_batch); break;
    case Method::triplet: per_step = static_cast<std::size_t>(cfg.triplet_batch); break;
    case Method::prototypical: per_step = static_cast<std::size_t>(kNumClasses * (cfg.m_support + cfg.m_query)); break;
  }
  return static_cast<int>(std::max<std::size_t>(1, (n + per_step - 1) / per_step));
}

}  // namespace

double batch_gradient(Model& m, const SplitData& train, const Config& cfg, std::uint64_t seed) {
  switch (m.method) {
    case Method::classifier: {
      BatchStream stream(train.size(), seed);
      return classifier_step(m, train, stream.next(static_cast<std::size_t>(cfg.bce_batch)), cfg.max_tape_blocks);
    }
    case Method::triplet: return triplet_step(m, train, cfg, seed);
    case Method::prototypical: return proto_step(m, train, cfg, seed);
  }
  return 0.0;
}

double validation_centroid_accuracy(Model& model, const SplitData& train, const SplitData& valid, int max_train, int max_blocks) {
  SplitData capped;
  const SplitData* tr = &train;
  if (max_train > 0 && static_cast<std::size_t>(max_train) < train.size()) {
    // Manifest order cycles through the classes, so a prefix stays balanced.
    capped.blocks_per_segment = train.blocks_per_segment;
    capped.labels.assign(train.labels.begin(), train.labels.begin() + max_train);
    const auto len = static_cast<std::size_t>(max_train) * train.blocks_per_segment * kBlockValues;
    capped.blocks.assign(train.blocks.begin(), train.blocks.begin() + static_cast<std::ptrdiff_t>(len));
    tr = &capped;
  }
  const auto centroids = eval::class_centroids(model.embeddings(*tr, max_blocks), tr->labels, kEmbeddingDim);
  return eval::centroid_accuracy(model.embeddings(valid, max_blocks), valid.labels, centroids);
}

TrainResult train_run(const RunConfig& rc, const Config& cfg, const RunData& data, std::ostream* log) {
  if (data.train.size() == 0 || data.valid.size() == 0) throw Error(run_id(rc) + ": empty training or validation data");
  TrainResult result;
  Model& m = result.model;
  m.method = rc.method;
  m.stats = data.stats;
  m.init(rc.seed);
  const Budget& budget = cfg.budget_for(rc.train_seg);
  const int steps = budget.steps_per_epoch > 0 ? budget.steps_per_epoch : default_steps(rc.method, data.train.size(), cfg);
  std::optional<double> centroid_acc;

  if (rc.method == Method::classifier) {
    auto params = m.embed.parameters();
    const auto hp = m.head.parameters();
    params.insert(params.end(), hp.begin(), hp.end());
    ad::Adam<float> opt(params, cfg.adam);
    eval::EarlyStopper stopper(budget.patience, cfg.min_delta);
    BatchStream stream(data.train.size(), derive_seed(rc.seed, 0xBA7C));
    Snapshot best = snapshot(params);
    long step = 0;
    for (int epoch = 0; epoch < budget.max_epochs; ++epoch) {
      double sum = 0.0;
      for (int s = 0; s < steps; ++s, ++step) {
        const auto batch = stream.next(static_cast<std::size_t>(cfg.bce_batch));
        opt.zero_grad();
        const double v = classifier_step(m, data.train, batch, cfg.max_tape_blocks);
        check_finite(v, rc, "joint", epoch, step);
        opt.step();
        sum += v;
      }
      const double metric = macro_f(m.probabilities(data.valid, cfg.max_tape_blocks), data.valid, cfg.threshold);
      const bool improved = stopper.update(metric);
      if (improved) best = snapshot(params);
      emit(result.history, log, {"joint", epoch, sum / steps, metric, improved});
      if (stopper.should_stop()) break;
    }
    restore(params, best);
  } else {
    auto params = m.embed.parameters();
    ad::Adam<float> opt(params, cfg.adam);
    eval::EarlyStopper stopper(budget.patience, cfg.min_delta);
    Snapshot best = snapshot(params);
    long step = 0;
    for (int epoch = 0; epoch < budget.max_epochs; ++epoch) {
      double sum = 0.0;
      for (int s = 0; s < steps; ++s, ++step) {
        const auto seed = derive_seed(rc.seed, 0x57E9, static_cast<std::uint64_t>(step));
        opt.zero_grad();
        const double v = rc.method == Method::triplet ? triplet_step(m, data.train, cfg, seed) : proto_step(m, data.train, cfg, seed);
        check_finite(v, rc, "embedding", epoch, step);
        opt.step();
        sum += v;
      }
      const double metric = validation_centroid_accuracy(m, data.train, data.valid, cfg.centroid_max_segments, cfg.max_tape_blocks);
      const bool improved = stopper.update(metric);
      if (improved) {
        best = snapshot(params);
        centroid_acc = metric;
      }
      emit(result.history, log, {"embedding", epoch, sum / steps, metric, improved});
      if (stopper.should_stop()) break;
    }
    restore(params, best);
    if (budget.max_epochs > 0) {
      const auto e_train = m.embeddings(data.train, cfg.max_tape_blocks);
      const auto e_valid = m.embeddings(data.valid, cfg.max_tape_blocks);
      train_head(m, e_train, data.train, e_valid, data.valid, rc, cfg, result.history, log);
    }
  }
  result.valid_centroid_accuracy =
      centroid_acc ? *centroid_acc
                   : validation_centroid_accuracy(m, data.train, data.valid, cfg.centroid_max_segments, cfg.max_tape_blocks);
  return result;
}

EvalResult eval_run(Model& model, const SplitData& test, double threshold, int max_blocks) {
  if (test.size() == 0) throw Error("eval_run: no test segments");
  EvalResult r;
  r.probs = model.probabilities(test, max_blocks);
  r.f = eval::f_measure(r.probs, test.targets(), threshold);
  return r;
}

std::string format_epoch(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "phase=%s epoch=%d loss=%.6f metric=%.6f%s", r.phase.c_str(), r.epoch, r.loss, r.metric,
                r.best ? " best" : "");
  return buf;
}

}  // namespace weaklab::harness
