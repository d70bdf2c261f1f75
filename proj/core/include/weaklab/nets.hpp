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

#pragma once

// Embedding network E and tagging head G.
//
// E runs on 200 ms blocks (20 frames x 64 mels, NHWC with one channel):
//
//   conv3x3(16) lrelu pool2x2 -> [10, 32, 16]
//   conv3x3(32) lrelu pool2x2 -> [ 5, 16, 32]
//   conv3x3(64) lrelu pool2x2 -> [ 2,  8, 64]
//   conv3x3(64) lrelu         -> [ 2,  8, 64]
//   per time step: dense 512 -> 130, then mean over the 2 steps
//
// Longer segments are cut into ceil(frames / 20) blocks (the last one
// reflection-padded) and the block embeddings are averaged.
//
// G: dense 130 -> 32, leaky ReLU, dense 32 -> 10, sigmoid.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "weaklab/autodiff.hpp"
#include "weaklab/dsp.hpp"
#include "weaklab/rng.hpp"

namespace weaklab::nets {

inline constexpr int kBlockFrames = 20;
inline constexpr int kEmbeddingDim = 130;
inline constexpr int kHiddenDim = 32;
inline constexpr int kKernel = 3;
inline constexpr std::array<int, 4> kConvChannels = {16, 32, 64, 64};
inline constexpr double kLeakySlope = 0.01;
inline constexpr int kBlockValues = kBlockFrames * dsp::kMels;

using Embedding = std::vector<float>;

constexpr int num_blocks(int frames) { return (frames + kBlockFrames - 1) / kBlockFrames; }

// Appends the blocks of `f` ([num_blocks, 20, 64] values) to `out`.
void append_blocks(const dsp::LogMelFeature& f, std::vector<float>& out);
std::vector<float> blocks_of(const dsp::LogMelFeature& f);

// Whether parameters are recorded as trainable on a tape.
enum class Mode { train, frozen };

template <typename T>
class EmbeddingNet {
 public:
  EmbeddingNet() {
    int in = 1;
    for (std::size_t l = 0; l < kConvChannels.size(); ++l) {
      const int out = kConvChannels[l];
      conv_w_[l] = ad::Parameter<T>("embed.conv" + std::to_string(l + 1) + ".w", {kKernel, kKernel, in, out});
      conv_b_[l] = ad::Parameter<T>("embed.conv" + std::to_string(l + 1) + ".b", {out});
      in = out;
    }
    proj_w_ = ad::Parameter<T>("embed.proj.w", {kConvChannels.back() * 8, kEmbeddingDim});
    proj_b_ = ad::Parameter<T>("embed.proj.b", {kEmbeddingDim});
  }

  void init(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xE4B));
    for (std::size_t l = 0; l < conv_w_.size(); ++l) {
      const double fan_in = kKernel * kKernel * conv_w_[l].shape[2];
      fill_normal(conv_w_[l], rng, std::sqrt(2.0 / fan_in));
      std::fill(conv_b_[l].value.begin(), conv_b_[l].value.end(), T(0));
    }
    fill_normal(proj_w_, rng, std::sqrt(1.0 / proj_w_.shape[0]));
    std::fill(proj_b_.value.begin(), proj_b_.value.end(), T(0));
  }

  // blocks [N, 20, 64, 1] -> [N, 130]
  ad::Var<T> embed_blocks(ad::Tape<T>& tape, ad::Var<T> blocks, Mode mode) {
    const auto& s = blocks.shape();
    if (s.size() != 4 || s[1] != kBlockFrames || s[2] != dsp::kMels || s[3] != 1) {
      ad::shape_error("embed_blocks", s, "expected [N, 20, 64, 1]");
    }
    const int n = s[0];
    const T slope = static_cast<T>(kLeakySlope);
    ad::Var<T> h = blocks;
    for (std::size_t l = 0; l < conv_w_.size(); ++l) {
      h = ad::leaky_relu(ad::conv2d(h, use(tape, conv_w_[l], mode), use(tape, conv_b_[l], mode)), slope);
      if (l + 1 < conv_w_.size()) h = ad::avg_pool2d(h);
    }
    const int steps = h.dim(1);
    const int width = h.dim(2) * h.dim(3);
    h = ad::reshape(h, {n * steps, width});
    h = ad::add_bias(ad::matmul(h, use(tape, proj_w_, mode)), use(tape, proj_b_, mode));
    return ad::mean(ad::reshape(h, {n, steps, kEmbeddingDim}), 1);
  }

  // blocks [segments * blocks_per_segment, 20, 64, 1] -> [segments, 130]
  ad::Var<T> embed_segments(ad::Tape<T>& tape, ad::Var<T> blocks, int blocks_per_segment, Mode mode) {
    const int total = blocks.dim(0);
    if (blocks_per_segment <= 0 || total % blocks_per_segment != 0) {
      ad::shape_error("embed_segments", blocks.shape(), "block count not divisible by blocks per segment");
    }
    ad::Var<T> e = embed_blocks(tape, blocks, mode);
    if (blocks_per_segment == 1) return e;
    return ad::mean(ad::reshape(e, {total / blocks_per_segment, blocks_per_segment, kEmbeddingDim}), 1);
  }

  std::vector<ad::Parameter<T>*> parameters() {
    std::vector<ad::Parameter<T>*> out;
    for (std::size_t l = 0; l < conv_w_.size(); ++l) {
      out.push_back(&conv_w_[l]);
      out.push_back(&conv_b_[l]);
    }
    out.push_back(&proj_w_);
    out.push_back(&proj_b_);
    return out;
  }

  std::vector<const ad::Parameter<T>*> parameters() const {
    auto ps = const_cast<EmbeddingNet*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

 private:
  static void fill_normal(ad::Parameter<T>& p, Rng& rng, double stddev) {
    for (T& v : p.value) v = static_cast<T>(stddev * rng.normal());
  }

  static ad::Var<T> use(ad::Tape<T>& tape, ad::Parameter<T>& p, Mode mode) {
    return mode == Mode::train ? tape.param(p) : tape.frozen(p);
  }

  std::array<ad::Parameter<T>, 4> conv_w_;
  std::array<ad::Parameter<T>, 4> conv_b_;
  ad::Parameter<T> proj_w_;
  ad::Parameter<T> proj_b_;
};

template <typename T>
class ClassifierHead {
 public:
  ClassifierHead()
      : w1_("head.fc1.w", {kEmbeddingDim, kHiddenDim}),
        b1_("head.fc1.b", {kHiddenDim}),
        w2_("head.out.w", {kHiddenDim, kNumClasses}),
        b2_("head.out.b", {kNumClasses}) {}

  void init(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x4EAD));
    for (T& v : w1_.value) v = static_cast<T>(std::sqrt(2.0 / kEmbeddingDim) * rng.normal());
    for (T& v : w2_.value) v = static_cast<T>(std::sqrt(1.0 / kHiddenDim) * rng.normal());
    std::fill(b1_.value.begin(), b1_.value.end(), T(0));
    std::fill(b2_.value.begin(), b2_.value.end(), T(0));
  }

  // [S, 130] -> [S, 10] pre-sigmoid scores
  ad::Var<T> logits(ad::Tape<T>& tape, ad::Var<T> emb, Mode mode) {
    if (emb.shape().size() != 2 || emb.dim(1) != kEmbeddingDim) ad::shape_error("classify", emb.shape(), "expected [S, 130]");
    auto h = ad::add_bias(ad::matmul(emb, use(tape, w1_, mode)), use(tape, b1_, mode));
    h = ad::leaky_relu(h, static_cast<T>(kLeakySlope));
    return ad::add_bias(ad::matmul(h, use(tape, w2_, mode)), use(tape, b2_, mode));
  }

  // [S, 130] -> [S, 10] probabilities, independent per class
  ad::Var<T> probabilities(ad::Tape<T>& tape, ad::Var<T> emb, Mode mode) { return ad::sigmoid(logits(tape, emb, mode)); }

  std::vector<ad::Parameter<T>*> parameters() { return {&w1_, &b1_, &w2_, &b2_}; }
  std::vector<const ad::Parameter<T>*> parameters() const { return {&w1_, &b1_, &w2_, &b2_}; }

  ad::Parameter<T>& output_bias() { return b2_; }

 private:
  static ad::Var<T> use(ad::Tape<T>& tape, ad::Parameter<T>& p, Mode mode) {
    return mode == Mode::train ? tape.param(p) : tape.frozen(p);
  }

  ad::Parameter<T> w1_, b1_, w2_, b2_;
};

// Inference helpers on single inputs. `normalize` applies unit L2 norm.

Embedding embed_block(EmbeddingNet<float>& net, const dsp::LogMelFeature& block, bool normalize = false);
Embedding embed_segment(EmbeddingNet<float>& net, const dsp::LogMelFeature& segment, bool normalize = false);
std::array<float, kNumClasses> classify(ClassifierHead<float>& head, std::span<const float> embedding);

// Batched inference over many equally long segments; blocks are processed in
// chunks of at most `max_blocks` to bound memory. Returns [segments x 130].
std::vector<float> embed_many(EmbeddingNet<float>& net, std::span<const float> blocks, int blocks_per_segment,
                              bool normalize, int max_blocks = 512);
std::vector<float> classify_many(ClassifierHead<float>& head, std::span<const float> embeddings);

}  // namespace weaklab::nets
