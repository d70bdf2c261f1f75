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

#include "oracle_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "weaklab/evalmetrics.hpp"
#include "weaklab/losses.hpp"
#include "weaklab/rng.hpp"

namespace wltest {

namespace ad = weaklab::ad;
using weaklab::Rng;

double oracle_proto_loss(const std::vector<double>& support, const std::vector<double>& query, int classes, int m_support,
                         int m_query, int dim) {
  std::vector<std::vector<long double>> protos(classes, std::vector<long double>(dim, 0.0L));
  for (int j = 0; j < classes; ++j) {
    for (int s = 0; s < m_support; ++s) {
      for (int q = 0; q < dim; ++q) protos[j][q] += support[(j * m_support + s) * dim + q];
    }
    for (int q = 0; q < dim; ++q) protos[j][q] /= m_support;
  }
  long double total = 0.0L;
  for (int r = 0; r < classes * m_query; ++r) {
    const int target = r / m_query;
    std::vector<long double> d(classes, 0.0L);
    for (int j = 0; j < classes; ++j) {
      for (int q = 0; q < dim; ++q) {
        const long double diff = query[r * dim + q] - protos[j][q];
        d[j] += diff * diff;
      }
    }
    long double denom = 0.0L;
    for (int j = 0; j < classes; ++j) denom += std::exp(-d[j]);
    total += -std::log(std::exp(-d[target]) / denom);
  }
  return static_cast<double>(total / (classes * m_query));
}

double oracle_triplet_loss(const std::vector<double>& a, const std::vector<double>& p, const std::vector<double>& n, int dim,
                           double margin) {
  const int b = static_cast<int>(a.size()) / dim;
  long double total = 0.0L;
  for (int i = 0; i < b; ++i) {
    long double dp = 0.0L, dn = 0.0L;
    for (int q = 0; q < dim; ++q) {
      dp += (static_cast<long double>(a[i * dim + q]) - p[i * dim + q]) * (static_cast<long double>(a[i * dim + q]) - p[i * dim + q]);
      dn += (static_cast<long double>(a[i * dim + q]) - n[i * dim + q]) * (static_cast<long double>(a[i * dim + q]) - n[i * dim + q]);
    }
    total += std::max(0.0L, dp - dn + margin);
  }
  return static_cast<double>(total / b);
}

double oracle_bce(const std::vector<double>& probs, const std::vector<double>& labels, int classes) {
  const int s = static_cast<int>(probs.size()) / classes;
  long double total = 0.0L;
  for (int i = 0; i < s; ++i) {
    for (int k = 0; k < classes; ++k) {
      const long double p = std::clamp<long double>(probs[i * classes + k], 1e-7L, 1.0L - 1e-7L);
      const long double y = labels[i * classes + k];
      total -= y * std::log(p) + (1.0L - y) * std::log(1.0L - p);
    }
  }
  return static_cast<double>(total / s);
}

OracleF oracle_f_measure(const std::vector<float>& probs, const std::vector<float>& labels, int classes, double threshold) {
  OracleF out;
  const int n = static_cast<int>(probs.size()) / classes;
  for (int k = 0; k < classes; ++k) {
    long tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      const bool pred = !(probs[i * classes + k] < threshold);
      const bool truth = labels[i * classes + k] > 0.5f;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    out.per_class.push_back(tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn));
  }
  for (double f : out.per_class) out.macro += f;
  out.macro /= classes;
  return out;
}

double oracle_centroid_accuracy(const std::vector<float>& train, const std::vector<int>& train_labels, const std::vector<float>& test,
                                const std::vector<int>& test_labels, int classes, int dim) {
  std::vector<std::vector<long double>> c(classes, std::vector<long double>(dim, 0.0L));
  std::vector<int> counts(classes, 0);
  for (std::size_t i = 0; i < train_labels.size(); ++i) {
    ++counts[train_labels[i]];
    for (int q = 0; q < dim; ++q) c[train_labels[i]][q] += train[i * dim + q];
  }
  for (int k = 0; k < classes; ++k) {
    for (int q = 0; q < dim; ++q) c[k][q] /= counts[k];
  }
  int hits = 0;
  for (std::size_t i = 0; i < test_labels.size(); ++i) {
    int best = -1;
    long double best_d = std::numeric_limits<long double>::infinity();
    for (int k = 0; k < classes; ++k) {
      long double d = 0.0L;
      for (int q = 0; q < dim; ++q) d += (test[i * dim + q] - c[k][q]) * (test[i * dim + q] - c[k][q]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    hits += best == test_labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(test_labels.size());
}

namespace {

std::vector<double> normals(Rng& rng, std::size_t n, double s = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = s * rng.normal();
  return v;
}

std::vector<double> unit_rows(Rng& rng, int rows, int dim) {
  auto v = normals(rng, static_cast<std::size_t>(rows) * dim);
  for (int r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (int q = 0; q < dim; ++q) ss += v[r * dim + q] * v[r * dim + q];
    for (int q = 0; q < dim; ++q) v[r * dim + q] /= std::sqrt(ss);
  }
  return v;
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

template <typename T>
double lib_proto(const std::vector<double>& s, const std::vector<double>& q, int j, int ms, int mq, int d) {
  ad::Tape<T> t;
  auto sv = t.constant({j * ms, d}, std::vector<T>(s.begin(), s.end()));
  auto qv = t.constant({j * mq, d}, std::vector<T>(q.begin(), q.end()));
  return weaklab::losses::proto_loss(sv, qv, j, ms, mq).item();
}

template <typename T>
double lib_triplet(const std::vector<double>& a, const std::vector<double>& p, const std::vector<double>& n, int b, int d, double m) {
  ad::Tape<T> t;
  auto av = t.constant({b, d}, std::vector<T>(a.begin(), a.end()));
  auto pv = t.constant({b, d}, std::vector<T>(p.begin(), p.end()));
  auto nv = t.constant({b, d}, std::vector<T>(n.begin(), n.end()));
  return weaklab::losses::triplet_loss(av, pv, nv, static_cast<T>(m)).item();
}

template <typename T>
double lib_bce(const std::vector<double>& p, const std::vector<double>& y, int s) {
  ad::Tape<T> t;
  return weaklab::losses::bce_loss(t.constant({s, 10}, std::vector<T>(p.begin(), p.end())), t.constant({s, 10}, std::vector<T>(y.begin(), y.end())))
      .item();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

std::vector<OracleSummary> run_oracle_suite(int instances, std::uint64_t seed) {
  OracleSummary proto{"proto_loss", 0, 0.0, 1e-10}, proto_f{"proto_loss (float path)", 0, 0.0, 1e-6};
  OracleSummary trip{"triplet_loss", 0, 0.0, 1e-10}, trip_f{"triplet_loss (float path)", 0, 0.0, 1e-6};
  OracleSummary bce{"bce_loss", 0, 0.0, 1e-10}, bce_f{"bce_loss (float path)", 0, 0.0, 1e-6};
  OracleSummary fm{"f_measure", 0, 0.0, 1e-10}, ca{"centroid_accuracy", 0, 0.0, 1e-10};
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    {
      const int j = static_cast<int>(rng.between(2, 3)), ms = static_cast<int>(rng.between(1, 4)), mq = static_cast<int>(rng.between(1, 4));
      const int d = static_cast<int>(rng.between(1, 6));
      const auto s = normals(rng, static_cast<std::size_t>(j * ms * d));
      const auto q = normals(rng, static_cast<std::size_t>(j * mq * d));
      const double ref = oracle_proto_loss(s, q, j, ms, mq, d);
      proto.worst = std::max(proto.worst, std::abs(lib_proto<double>(s, q, j, ms, mq, d) - ref));
      proto_f.worst = std::max(proto_f.worst, rel(lib_proto<float>(s, q, j, ms, mq, d), ref));
      ++proto.instances;
      ++proto_f.instances;
    }
    {
      const int b = static_cast<int>(rng.between(1, 6)), d = static_cast<int>(rng.between(2, 8));
      const auto a = unit_rows(rng, b, d), p = unit_rows(rng, b, d), n = unit_rows(rng, b, d);
      const double m = rng.uniform(0.1, 1.0);
      const double ref = oracle_triplet_loss(a, p, n, d, m);
      trip.worst = std::max(trip.worst, std::abs(lib_triplet<double>(a, p, n, b, d, m) - ref));
      trip_f.worst = std::max(trip_f.worst, rel(lib_triplet<float>(a, p, n, b, d, m), oracle_triplet_loss(a, p, n, d, static_cast<float>(m))));
      ++trip.instances;
      ++trip_f.instances;
    }
    {
      const int s = static_cast<int>(rng.between(1, 8));
      std::vector<double> p(static_cast<std::size_t>(s) * 10), y(p.size(), 0.0);
      for (double& v : p) v = rng.uniform();
      if (rng.below(4) == 0) p[0] = 0.0;  // exercises the clamp
      for (int r = 0; r < s; ++r) y[static_cast<std::size_t>(r) * 10 + rng.below(10)] = 1.0;
      const double ref = oracle_bce(p, y, 10);
      bce.worst = std::max(bce.worst, std::abs(lib_bce<double>(p, y, s) - ref));
      bce_f.worst = std::max(bce_f.worst, rel(lib_bce<float>(p, y, s), ref));
      ++bce.instances;
      ++bce_f.instances;
    }
    {
      const int n = static_cast<int>(rng.between(1, 20));
      std::vector<float> p(static_cast<std::size_t>(n) * 10), y(p.size(), 0.0f);
      for (float& v : p) v = static_cast<float>(rng.uniform());
      for (int r = 0; r < n; ++r) y[static_cast<std::size_t>(r) * 10 + rng.below(10)] = 1.0f;
      const auto ref = oracle_f_measure(p, y, 10, 0.5);
      const auto got = weaklab::eval::f_measure(p, y, 0.5);
      double w = std::abs(got.macro - ref.macro);
      for (int k = 0; k < 10; ++k) w = std::max(w, std::abs(got.per_class[k] - ref.per_class[k]));
      fm.worst = std::max(fm.worst, w);
      ++fm.instances;
    }
    {
      const int classes = static_cast<int>(rng.between(2, 5)), d = static_cast<int>(rng.between(1, 6));
      const int per = static_cast<int>(rng.between(1, 4)), nt = static_cast<int>(rng.between(1, 15));
      std::vector<int> tl, el;
      for (int k = 0; k < classes; ++k) {
        for (int r = 0; r < per; ++r) tl.push_back(k);
      }
      for (int r = 0; r < nt; ++r) el.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
      const auto tr = to_float(normals(rng, tl.size() * d));
      const auto te = to_float(normals(rng, el.size() * d));
      const auto cs = weaklab::eval::class_centroids(tr, tl, d, classes);
      const double got = weaklab::eval::centroid_accuracy(te, el, cs);
      ca.worst = std::max(ca.worst, std::abs(got - oracle_centroid_accuracy(tr, tl, te, el, classes, d)));
      ++ca.instances;
    }
  }
  return {proto, proto_f, trip, trip_f, bce, bce_f, fm, ca};
}

}  // namespace wltest
