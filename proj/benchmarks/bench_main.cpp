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

// Microbenchmarks for the hot paths of a training run.

#include <benchmark/benchmark.h>

#include "weaklab/autodiff.hpp"
#include "weaklab/dsp.hpp"
#include "weaklab/nets.hpp"
#include "weaklab/rng.hpp"
#include "weaklab/synthgen.hpp"

using namespace weaklab;

namespace {

std::vector<float> gaussian(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return v;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  ad::Parameter<float> w("w", {3, 3, 16, 32}), b("b", {32});
  w.value = gaussian(w.value.size(), 1);
  const auto x = gaussian(static_cast<std::size_t>(n) * 10 * 32 * 16, 2);
  for (auto _ : state) {
    ad::Tape<float> t;
    auto y = ad::conv2d(t.constant({n, 10, 32, 16}, x), t.param(w), t.param(b));
    t.backward(ad::mean_all(y));
    benchmark::DoNotOptimize(w.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(8)->Arg(64);

void BM_LogMel(benchmark::State& state) {
  const auto x = gaussian(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::log_mel(x).values.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogMel)->Arg(3200)->Arg(160000);

void BM_SynthScene(benchmark::State& state) {
  const auto specs = synth::draw_scene_specs({100, 10, 10}, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto m = synth::mix_scene(specs[i++ % specs.size()]);
    benchmark::DoNotOptimize(m.audio.samples.data());
  }
}
BENCHMARK(BM_SynthScene)->Unit(benchmark::kMillisecond);

void BM_EmbedBlocks(benchmark::State& state) {
  const int blocks = static_cast<int>(state.range(0));
  nets::EmbeddingNet<float> net;
  net.init(1);
  const auto x = gaussian(static_cast<std::size_t>(blocks) * nets::kBlockValues, 4);
  for (auto _ : state) benchmark::DoNotOptimize(nets::embed_many(net, x, blocks, false).data());
  state.SetItemsProcessed(state.iterations() * blocks);
}
BENCHMARK(BM_EmbedBlocks)->Arg(1)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const int blocks = static_cast<int>(state.range(0));
  nets::EmbeddingNet<float> net;
  net.init(1);
  nets::ClassifierHead<float> head;
  head.init(1);
  const auto x = gaussian(static_cast<std::size_t>(blocks) * nets::kBlockValues, 5);
  for (auto _ : state) {
    ad::Tape<float> t;
    auto e = net.embed_segments(t, t.constant({blocks, nets::kBlockFrames, dsp::kMels, 1}, x), 1, nets::Mode::train);
    t.backward(ad::mean_all(head.probabilities(t, e, nets::Mode::train)));
  }
  state.SetItemsProcessed(state.iterations() * blocks);
}
BENCHMARK(BM_TrainStep)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
