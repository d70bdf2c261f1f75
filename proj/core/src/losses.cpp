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

#include "weaklab/losses.hpp"

#include <algorithm>
#include <string>

#include "weaklab/rng.hpp"

namespace weaklab::losses {
namespace {

std::vector<std::vector<int>> by_class(std::span<const int> labels, int num_classes) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int k = labels[i];
    if (k < 0 || k >= num_classes) throw Error("sampler: label " + std::to_string(k) + " out of range");
    out[static_cast<std::size_t>(k)].push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

std::vector<Triplet> sample_triplets(std::span<const int> labels, int batch_size, std::uint64_t seed, int num_classes) {
  const auto classes = by_class(labels, num_classes);
  for (int k = 0; k < num_classes; ++k) {
    if (classes[k].size() < 2) throw Error("sample_triplets: class " + std::to_string(k) + " has fewer than 2 segments");
  }
  Rng rng(derive_seed(seed, 0x7819));
  const auto n = static_cast<std::uint64_t>(labels.size());
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    Triplet t;
    t.anchor = static_cast<int>(rng.below(n));
    const auto& same = classes[static_cast<std::size_t>(labels[t.anchor])];
    // Uniform over the class without the anchor: draw from size-1 and skip it.
    const auto pick = static_cast<std::size_t>(rng.below(same.size() - 1));
    const auto anchor_pos = static_cast<std::size_t>(std::find(same.begin(), same.end(), t.anchor) - same.begin());
    t.positive = same[pick < anchor_pos ? pick : pick + 1];
    const auto others = n - same.size();
    auto neg = static_cast<std::size_t>(rng.below(others));
    // Walk the other classes in order to find the neg-th item.
    for (int k = 0; k < num_classes; ++k) {
      if (k == labels[t.anchor]) continue;
      if (neg < classes[k].size()) {
        t.negative = classes[k][neg];
        break;
      }
      neg -= classes[k].size();
    }
    out.push_back(t);
  }
  return out;
}

std::vector<int> Episode::support_rows() const {
  std::vector<int> rows;
  for (const auto& c : support) rows.insert(rows.end(), c.begin(), c.end());
  return rows;
}

std::vector<int> Episode::query_rows() const {
  std::vector<int> rows;
  for (const auto& c : query) rows.insert(rows.end(), c.begin(), c.end());
  return rows;
}

Episode sample_episode(std::span<const int> labels, int m_support, int m_query, std::uint64_t seed, int num_classes) {
  if (m_support <= 0 || m_query <= 0) throw Error("sample_episode: m_support and m_query must be positive");
  auto classes = by_class(labels, num_classes);
  Episode ep;
  ep.classes = num_classes;
  ep.m_support = m_support;
  ep.m_query = m_query;
  Rng rng(derive_seed(seed, 0xE915));
  for (int k = 0; k < num_classes; ++k) {
    auto& pool = classes[static_cast<std::size_t>(k)];
    const auto need = static_cast<std::size_t>(m_support + m_query);
    if (pool.size() < need) {
      throw Error("sample_episode: class " + std::to_string(k) + " has " + std::to_string(pool.size()) + " segments, needs " +
                  std::to_string(need));
    }
    // Partial Fisher-Yates: the first `need` entries become a uniform sample.
    for (std::size_t i = 0; i < need; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    ep.support.emplace_back(pool.begin(), pool.begin() + m_support);
    ep.query.emplace_back(pool.begin() + m_support, pool.begin() + static_cast<std::ptrdiff_t>(need));
  }
  return ep;
}

std::vector<Prototype> prototypes(std::span<const float> embeddings, int dim, const Episode& episode) {
  std::vector<Prototype> out;
  for (int k = 0; k < episode.classes; ++k) {
    const auto& rows = episode.support[static_cast<std::size_t>(k)];
    if (rows.empty()) throw Error("prototypes: class " + std::to_string(k) + " has no support points");
    Prototype p{k, std::vector<double>(static_cast<std::size_t>(dim), 0.0)};
    for (int r : rows) {
      for (int q = 0; q < dim; ++q) p.centroid[q] += embeddings[static_cast<std::size_t>(r) * dim + q];
    }
    for (double& v : p.centroid) v /= static_cast<double>(rows.size());
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace weaklab::losses
