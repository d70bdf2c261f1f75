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

// Training objectives (binary cross-entropy, triplet hinge, prototypical
// episode loss) and the samplers that build their batches.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "weaklab/autodiff.hpp"

namespace weaklab::losses {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kUnitNormTolerance = 1e-4;

// probs, targets: [S, K]. Mean over samples of the per-class sum of
// -y log p - (1 - y) log(1 - p), with p clamped to [1e-7, 1 - 1e-7].
template <typename T>
ad::Var<T> bce_loss(ad::Var<T> probs, ad::Var<T> targets) {
  if (probs.shape() != targets.shape() || probs.shape().size() != 2) ad::shape_error("bce_loss", probs.shape(), targets.shape());
  const T eps = static_cast<T>(kProbClamp);
  auto p = ad::clamp(probs, eps, T(1) - eps);
  auto log_p = ad::log(p);
  auto log_q = ad::log(ad::add_scalar(ad::scale(p, T(-1)), T(1)));
  auto not_y = ad::add_scalar(ad::scale(targets, T(-1)), T(1));
  auto ll = ad::add(ad::mul(targets, log_p), ad::mul(not_y, log_q));
  return ad::scale(ad::sum_all(ll), T(-1) / static_cast<T>(probs.dim(0)));
}

// a, p, n: [B, D] unit-norm rows. Mean over rows of
// hinge(|a - p|^2 - |a - n|^2 + margin).
template <typename T>
ad::Var<T> triplet_loss(ad::Var<T> a, ad::Var<T> p, ad::Var<T> n, T margin) {
  if (a.shape() != p.shape() || a.shape() != n.shape() || a.shape().size() != 2) ad::shape_error("triplet_loss", a.shape(), p.shape());
  if (!(margin > T(0))) throw Error("triplet_loss: margin must be positive");
  const int d = a.dim(1);
  for (const auto* v : {&a, &p, &n}) {
    const auto vals = v->value();
    for (int r = 0; r < v->dim(0); ++r) {
      double ss = 0.0;
      for (int q = 0; q < d; ++q) ss += static_cast<double>(vals[static_cast<std::size_t>(r) * d + q]) * vals[static_cast<std::size_t>(r) * d + q];
      if (std::abs(std::sqrt(ss) - 1.0) > kUnitNormTolerance) throw Error("triplet_loss: inputs must be L2-normalized");
    }
  }
  auto d_ap = ad::sum(ad::square(ad::sub(a, p)), 1);
  auto d_an = ad::sum(ad::square(ad::sub(a, n)), 1);
  return ad::mean(ad::hinge(ad::add_scalar(ad::sub(d_ap, d_an), margin)), 0);
}

// support: [J * m_s, D] grouped by class (rows j*m_s .. j*m_s + m_s - 1 are
// class j); query: [J * m_q, D] grouped the same way. Prototypes are support
// means; each query is scored by a softmax over negative squared distances
// to all prototypes. Returns the mean cross-entropy over queries.
template <typename T>
ad::Var<T> proto_loss(ad::Var<T> support, ad::Var<T> query, int classes, int m_support, int m_query) {
  if (classes <= 0) throw Error("proto_loss: no classes");
  if (m_support <= 0) throw Error("proto_loss: every class needs at least one support point");
  if (m_query <= 0) throw Error("proto_loss: every class needs at least one query point");
  if (support.shape().size() != 2 || support.dim(0) != classes * m_support) ad::shape_error("proto_loss support", support.shape(), "expected [J*m_s, D]");
  if (query.shape().size() != 2 || query.dim(0) != classes * m_query || query.dim(1) != support.dim(1)) {
    ad::shape_error("proto_loss query", query.shape(), support.shape());
  }
  const int d = support.dim(1);
  auto protos = ad::mean(ad::reshape(support, {classes, m_support, d}), 1);
  auto logp = ad::log_softmax(ad::scale(ad::pairwise_sqdist(query, protos), T(-1)), 1);
  const int nq = classes * m_query;
  std::vector<T> onehot(static_cast<std::size_t>(nq) * classes, T(0));
  for (int r = 0; r < nq; ++r) onehot[static_cast<std::size_t>(r) * classes + r / m_query] = T(1);
  auto picked = ad::mul(logp, query.tape()->constant({nq, classes}, std::move(onehot)));
  return ad::scale(ad::sum_all(picked), T(-1) / static_cast<T>(nq));
}

struct Triplet {
  int anchor = 0;
  int positive = 0;
  int negative = 0;
};

// Anchors uniform over the dataset, positives uniform over the anchor's class
// minus the anchor, negatives uniform over all other-class items.
std::vector<Triplet> sample_triplets(std::span<const int> labels, int batch_size, std::uint64_t seed, int num_classes = 10);

struct Episode {
  int classes = 0;
  int m_support = 0;
  int m_query = 0;
  std::vector<std::vector<int>> support;  // [class][m_support] dataset indices
  std::vector<std::vector<int>> query;    // [class][m_query]

  // Dataset indices flattened class-major: all support, then all query.
  std::vector<int> support_rows() const;
  std::vector<int> query_rows() const;
};

Episode sample_episode(std::span<const int> labels, int m_support, int m_query, std::uint64_t seed, int num_classes = 10);

struct Prototype {
  int class_id = 0;
  std::vector<double> centroid;
};

// Prototypes of an episode from a [dataset x dim] embedding table.
std::vector<Prototype> prototypes(std::span<const float> embeddings, int dim, const Episode& episode);

}  // namespace weaklab::losses
