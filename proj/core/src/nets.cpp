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

#include "weaklab/nets.hpp"

#include <algorithm>

namespace weaklab::nets {
namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

void append_blocks(const dsp::LogMelFeature& f, std::vector<float>& out) {
  if (f.frames <= 0) throw Error("segment has no frames");
  const int blocks = num_blocks(f.frames);
  const std::size_t base = out.size();
  out.resize(base + static_cast<std::size_t>(blocks) * kBlockValues);
  float* dst = out.data() + base;
  for (int t = 0; t < blocks * kBlockFrames; ++t) {
    const auto src = f.frame(t < f.frames ? t : reflect(t, f.frames));
    std::copy(src.begin(), src.end(), dst + static_cast<std::size_t>(t) * dsp::kMels);
  }
}

std::vector<float> blocks_of(const dsp::LogMelFeature& f) {
  std::vector<float> out;
  append_blocks(f, out);
  return out;
}

Embedding embed_block(EmbeddingNet<float>& net, const dsp::LogMelFeature& block, bool normalize) {
  if (block.frames != kBlockFrames) throw Error("embed_block: expected exactly 20 frames, got " + std::to_string(block.frames));
  return embed_segment(net, block, normalize);
}

Embedding embed_segment(EmbeddingNet<float>& net, const dsp::LogMelFeature& segment, bool normalize) {
  const auto blocks = blocks_of(segment);
  return embed_many(net, blocks, num_blocks(segment.frames), normalize, 1 << 20);
}

std::vector<float> embed_many(EmbeddingNet<float>& net, std::span<const float> blocks, int blocks_per_segment,
                              bool normalize, int max_blocks) {
  const std::size_t total_blocks = blocks.size() / kBlockValues;
  if (blocks.size() % kBlockValues != 0 || blocks_per_segment <= 0 || total_blocks % blocks_per_segment != 0) {
    throw Error("embed_many: block buffer does not divide into segments");
  }
  const std::size_t segments = total_blocks / static_cast<std::size_t>(blocks_per_segment);
  const std::size_t per_chunk = std::max<std::size_t>(1, static_cast<std::size_t>(max_blocks) / blocks_per_segment);
  std::vector<float> out(segments * kEmbeddingDim);
  for (std::size_t s0 = 0; s0 < segments; s0 += per_chunk) {
    const std::size_t s1 = std::min(segments, s0 + per_chunk);
    const std::size_t nb = (s1 - s0) * blocks_per_segment;
    ad::Tape<float> tape;
    auto x = tape.constant({static_cast<int>(nb), kBlockFrames, dsp::kMels, 1},
                           std::vector<float>(blocks.begin() + static_cast<std::ptrdiff_t>(s0 * blocks_per_segment * kBlockValues),
                                              blocks.begin() + static_cast<std::ptrdiff_t>(s1 * blocks_per_segment * kBlockValues)));
    auto e = net.embed_segments(tape, x, blocks_per_segment, Mode::frozen);
    if (normalize) e = ad::l2_normalize(e, 1);
    std::copy(e.value().begin(), e.value().end(), out.begin() + static_cast<std::ptrdiff_t>(s0 * kEmbeddingDim));
  }
  return out;
}

std::array<float, kNumClasses> classify(ClassifierHead<float>& head, std::span<const float> embedding) {
  if (embedding.size() != static_cast<std::size_t>(kEmbeddingDim)) {
    throw Error("classify: expected a 130-dim embedding, got " + std::to_string(embedding.size()));
  }
  const auto probs = classify_many(head, embedding);
  std::array<float, kNumClasses> out{};
  std::copy(probs.begin(), probs.end(), out.begin());
  return out;
}

std::vector<float> classify_many(ClassifierHead<float>& head, std::span<const float> embeddings) {
  if (embeddings.size() % kEmbeddingDim != 0) throw Error("classify_many: embedding buffer not a multiple of 130");
  const int n = static_cast<int>(embeddings.size() / kEmbeddingDim);
  ad::Tape<float> tape;
  auto e = tape.constant({n, kEmbeddingDim}, std::vector<float>(embeddings.begin(), embeddings.end()));
  auto p = head.probabilities(tape, e, Mode::frozen);
  return {p.value().begin(), p.value().end()};
}

}  // namespace weaklab::nets
