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

#include <cmath>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "weaklab/nets.hpp"
#include "weaklab/rng.hpp"

using namespace weaklab;
using namespace weaklab::nets;

namespace {

dsp::LogMelFeature random_feature(int frames, std::uint64_t seed) {
  Rng rng(seed);
  dsp::LogMelFeature f;
  f.frames = frames;
  f.values.resize(static_cast<std::size_t>(frames) * dsp::kMels);
  for (float& v : f.values) v = static_cast<float>(rng.normal());
  return f;
}

dsp::LogMelFeature concat_frames(const std::vector<dsp::LogMelFeature>& parts) {
  dsp::LogMelFeature f;
  for (const auto& p : parts) {
    f.frames += p.frames;
    f.values.insert(f.values.end(), p.values.begin(), p.values.end());
  }
  return f;
}

void check_close(const Embedding& a, const Embedding& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO("index " << i << " diff " << (a[i] - b[i]));
    if (tol == 0.0) REQUIRE(a[i] == b[i]);
    else REQUIRE(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
  }
}

EmbeddingNet<float> make_net(std::uint64_t seed) {
  EmbeddingNet<float> net;
  net.init(seed);
  return net;
}

}  // namespace

TEST_CASE("embed_block: 130 outputs, deterministic, rejects wrong shapes") {
  auto net = make_net(1);
  const auto x = random_feature(20, 2);
  const auto e = embed_block(net, x);
  CHECK(e.size() == 130u);
  CHECK(embed_block(net, x) == e);
  for (float v : e) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(embed_block(net, random_feature(19, 2)), Error);
  CHECK_THROWS_AS(embed_segment(net, dsp::LogMelFeature{}), Error);
}

TEST_CASE("embed_segment: one block, repeated blocks and permuted blocks") {
  auto net = make_net(3);
  const auto b0 = random_feature(20, 10), b1 = random_feature(20, 11), b2 = random_feature(20, 12);
  check_close(embed_segment(net, b0), embed_block(net, b0), 0.0);
  check_close(embed_segment(net, concat_frames({b0, b0, b0, b0, b0})), embed_block(net, b0), 1e-6);
  check_close(embed_segment(net, concat_frames({b0, b1, b2})), embed_segment(net, concat_frames({b2, b0, b1})), 1e-6);

  // Mean of block embeddings.
  const auto e0 = embed_block(net, b0), e1 = embed_block(net, b1), e2 = embed_block(net, b2);
  Embedding avg(130);
  for (int i = 0; i < 130; ++i) avg[i] = (e0[i] + e1[i] + e2[i]) / 3.0f;
  check_close(embed_segment(net, concat_frames({b0, b1, b2})), avg, 1e-5);
}

TEST_CASE("output shapes do not depend on segment duration") {
  auto net = make_net(4);
  ClassifierHead<float> head;
  head.init(4);
  for (int frames : {20, 100, 1000, 37}) {
    const auto e = embed_segment(net, random_feature(frames, frames));
    CHECK(e.size() == 130u);
    CHECK(classify(head, e).size() == 10u);
  }
}

TEST_CASE("the last block is reflection padded") {
  const auto f = random_feature(25, 5);
  const auto blocks = blocks_of(f);
  REQUIRE(blocks.size() == 2u * kBlockValues);
  auto frame = [&](int t) { return std::vector<float>(blocks.begin() + t * 64, blocks.begin() + (t + 1) * 64); };
  auto source = [&](int t) { return std::vector<float>(f.frame(t).begin(), f.frame(t).end()); };
  for (int t = 0; t < 25; ++t) CHECK(frame(t) == source(t));
  for (int t = 25; t < 40; ++t) CHECK(frame(t) == source(48 - t));
  CHECK(num_blocks(1000) == 50);
  CHECK(num_blocks(100) == 5);
  CHECK(num_blocks(21) == 2);
}

TEST_CASE("normalized embeddings have unit norm") {
  auto net = make_net(6);
  for (int frames : {20, 100, 1000}) {
    const auto e = embed_segment(net, random_feature(frames, 100 + frames), true);
    double n = 0.0;
    for (float v : e) n += static_cast<double>(v) * v;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("batched inference matches single-segment inference") {
  auto net = make_net(7);
  std::vector<float> blocks;
  std::vector<Embedding> singles;
  for (int s = 0; s < 7; ++s) {
    const auto f = random_feature(100, 200 + s);
    append_blocks(f, blocks);
    singles.push_back(embed_segment(net, f));
  }
  for (int chunk : {5, 10, 512}) {
    const auto many = embed_many(net, blocks, 5, false, chunk);
    for (int s = 0; s < 7; ++s) check_close(Embedding(many.begin() + s * 130, many.begin() + (s + 1) * 130), singles[s], 1e-5);
  }
  CHECK_THROWS_AS(embed_many(net, blocks, 3, false), Error);
}

TEST_CASE("classify: zero weights give 0.5, classes independent, bias monotone") {
  ClassifierHead<float> head;
  const Embedding e(130, 0.3f);
  for (float p : classify(head, e)) CHECK(p == 0.5f);
  CHECK_THROWS_AS(classify(head, Embedding(129)), Error);

  head.init(8);
  const auto base = classify(head, e);
  for (float p : base) CHECK((p > 0.0f && p < 1.0f));
  head.output_bias().value[3] += 0.5f;
  const auto raised = classify(head, e);
  CHECK(raised[3] > base[3]);
  for (int k = 0; k < 10; ++k) {
    if (k != 3) CHECK(raised[k] == base[k]);
  }
}

TEST_CASE("gradient of a probe loss through the embedding network") {
  EmbeddingNet<double> net;
  net.init(9);
  Rng rng(10);
  std::vector<double> block(kBlockValues);
  for (double& v : block) v = rng.normal();

  // With respect to the input block.
  const double input_err = wltest::grad_check(
      [&net](wltest::TapeD& t, const std::vector<wltest::VarD>& v) {
        return net.embed_blocks(t, v[0], Mode::frozen);
      },
      {{{1, kBlockFrames, dsp::kMels, 1}, block}}, 11);
  CHECK(input_err <= wltest::kGradTolerance);

  // With respect to sampled parameter coordinates.
  std::vector<double> probe(kEmbeddingDim);
  for (double& v : probe) v = rng.normal();
  auto loss = [&](bool backward) {
    ad::Tape<double> t;
    auto e = net.embed_blocks(t, t.constant({1, kBlockFrames, dsp::kMels, 1}, block), Mode::train);
    auto l = ad::sum_all(ad::mul(e, t.constant({1, kEmbeddingDim}, probe)));
    if (backward) t.backward(l);
    return l.item();
  };
  for (auto* p : net.parameters()) p->zero_grad();
  loss(true);
  const double h = 1e-5;
  for (auto* p : net.parameters()) {
    for (int k = 0; k < 4; ++k) {
      const std::size_t i = rng.below(p->size());
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = loss(false);
      p->value[i] = orig - h;
      const double down = loss(false);
      p->value[i] = orig;
      const double numeric = (up - down) / (2 * h);
      INFO(p->name << "[" << i << "]");
      CHECK(std::abs(numeric - p->grad[i]) <= 1e-4 * std::max({std::abs(numeric), std::abs(p->grad[i]), 1e-6}));
    }
  }
}
