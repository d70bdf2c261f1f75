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

#include "gradient_suite.hpp"

#include <algorithm>
#include <cmath>

#include "weaklab/losses.hpp"
#include "weaklab/rng.hpp"

namespace wltest {

namespace ad = weaklab::ad;
using weaklab::Rng;

namespace {

double dot_out(const Builder& f, const std::vector<Input>& inputs, const std::vector<double>& r) {
  TapeD tape;
  std::vector<VarD> leaves;
  for (const auto& in : inputs) leaves.push_back(tape.leaf(in.shape, in.values));
  const auto out = f(tape, leaves);
  double s = 0.0;
  const auto v = out.value();
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * r[i];
  return s;
}

}  // namespace

double grad_check(const Builder& f, const std::vector<Input>& inputs, std::uint64_t seed, double h) {
  Rng rng(seed);
  std::vector<std::vector<double>> analytic;
  std::vector<double> r;
  {
    TapeD tape;
    std::vector<VarD> leaves;
    for (const auto& in : inputs) leaves.push_back(tape.leaf(in.shape, in.values));
    const auto out = f(tape, leaves);
    for (std::size_t i = 0; i < out.size(); ++i) r.push_back(rng.normal());
    tape.backward(out, r);
    for (const auto& l : leaves) {
      std::vector<double> g(l.grad().begin(), l.grad().end());
      if (g.empty()) g.assign(l.size(), 0.0);
      analytic.push_back(std::move(g));
    }
  }
  double worst = 0.0;
  auto work = inputs;
  for (std::size_t t = 0; t < work.size(); ++t) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < work[t].values.size(); ++i) {
      const double x = work[t].values[i];
      work[t].values[i] = x + h;
      const double up = dot_out(f, work, r);
      work[t].values[i] = x - h;
      const double dn = dot_out(f, work, r);
      work[t].values[i] = x;
      const double num = (up - dn) / (2.0 * h);
      const double a = analytic[t][i];
      diff2 += (a - num) * (a - num);
      a2 += a * a;
      n2 += num * num;
    }
    const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-10});
    worst = std::max(worst, std::sqrt(diff2) / scale);
  }
  return worst;
}

namespace {

Input random_input(Rng& rng, ad::Shape shape, double lo = -1.5, double hi = 1.5) {
  Input in{std::move(shape), {}};
  for (std::size_t i = 0; i < ad::numel(in.shape); ++i) in.values.push_back(rng.uniform(lo, hi));
  return in;
}

// Values kept at least `gap` away from every kink.
Input away_from(Rng& rng, ad::Shape shape, std::vector<double> kinks, double gap = 1e-2) {
  Input in = random_input(rng, std::move(shape));
  for (double& v : in.values) {
    for (double k : kinks) {
      if (std::abs(v - k) < gap) v = k + (v < k ? -2 * gap : 2 * gap);
    }
  }
  return in;
}

ad::Shape random_shape(Rng& rng, int max_rank = 3, int max_dim = 4) {
  const int rank = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_rank)));
  ad::Shape s;
  for (int i = 0; i < rank; ++i) s.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_dim))));
  return s;
}

int dim(Rng& rng, int lo, int hi) { return static_cast<int>(rng.between(lo, hi)); }

struct Case {
  std::string name;
  // Builds one random instance; returns the builder and its inputs.
  std::function<std::pair<Builder, std::vector<Input>>(Rng&)> make;
};

std::vector<Case> cases() {
  std::vector<Case> cs;
  auto binary = [](const char* name, auto op) {
    return Case{name, [op](Rng& rng) {
                  const auto s = random_shape(rng);
                  return std::pair<Builder, std::vector<Input>>{
                      [op](TapeD&, const std::vector<VarD>& x) { return op(x[0], x[1]); },
                      {random_input(rng, s), random_input(rng, s)}};
                }};
  };
  auto unary = [](const char* name, auto op, auto gen) {
    return Case{name, [op, gen](Rng& rng) {
                  return std::pair<Builder, std::vector<Input>>{[op](TapeD&, const std::vector<VarD>& x) { return op(x[0]); },
                                                               {gen(rng, random_shape(rng))}};
                }};
  };
  auto plain = [](Rng& rng, ad::Shape s) { return random_input(rng, std::move(s)); };

  cs.push_back(binary("add", [](VarD a, VarD b) { return ad::add(a, b); }));
  cs.push_back(binary("sub", [](VarD a, VarD b) { return ad::sub(a, b); }));
  cs.push_back(binary("mul", [](VarD a, VarD b) { return ad::mul(a, b); }));
  cs.push_back(unary("scale", [](VarD a) { return ad::scale(a, -1.7); }, plain));
  cs.push_back(unary("add_scalar", [](VarD a) { return ad::add_scalar(a, 0.3); }, plain));
  cs.push_back(unary("leaky_relu", [](VarD a) { return ad::leaky_relu(a, 0.01); },
                     [](Rng& rng, ad::Shape s) { return away_from(rng, std::move(s), {0.0}); }));
  cs.push_back(unary("sigmoid", [](VarD a) { return ad::sigmoid(a); }, plain));
  cs.push_back(unary("log", [](VarD a) { return ad::log(a); }, [](Rng& rng, ad::Shape s) { return random_input(rng, std::move(s), 0.3, 3.0); }));
  cs.push_back(unary("square", [](VarD a) { return ad::square(a); }, plain));
  cs.push_back(unary("hinge", [](VarD a) { return ad::hinge(a); },
                     [](Rng& rng, ad::Shape s) { return away_from(rng, std::move(s), {0.0}); }));
  cs.push_back(unary("clamp", [](VarD a) { return ad::clamp(a, -0.5, 0.8); },
                     [](Rng& rng, ad::Shape s) { return away_from(rng, std::move(s), {-0.5, 0.8}); }));
  cs.push_back({"reshape", [](Rng& rng) {
                  const int a = dim(rng, 1, 4), b = dim(rng, 1, 4), c = dim(rng, 1, 3);
                  return std::pair<Builder, std::vector<Input>>{
                      [=](TapeD&, const std::vector<VarD>& x) { return ad::reshape(x[0], {c, a * b}); }, {random_input(rng, {a, b, c})}};
                }});
  cs.push_back({"add_bias", [](Rng& rng) {
                  const int n = dim(rng, 1, 5), c = dim(rng, 1, 5);
                  return std::pair<Builder, std::vector<Input>>{
                      [](TapeD&, const std::vector<VarD>& x) { return ad::add_bias(x[0], x[1]); },
                      {random_input(rng, {n, c}), random_input(rng, {c})}};
                }});
  cs.push_back({"matmul", [](Rng& rng) {
                  const int n = dim(rng, 1, 5), k = dim(rng, 1, 5), m = dim(rng, 1, 5);
                  return std::pair<Builder, std::vector<Input>>{
                      [](TapeD&, const std::vector<VarD>& x) { return ad::matmul(x[0], x[1]); },
                      {random_input(rng, {n, k}), random_input(rng, {k, m})}};
                }});
  cs.push_back({"conv2d", [](Rng& rng) {
                  const int n = dim(rng, 1, 2), h = dim(rng, 3, 5), w = dim(rng, 3, 5), ci = dim(rng, 1, 3), co = dim(rng, 1, 3);
                  const int k = rng.below(4) == 0 ? 1 : 3;
                  return std::pair<Builder, std::vector<Input>>{
                      [](TapeD&, const std::vector<VarD>& x) { return ad::conv2d(x[0], x[1], x[2]); },
                      {random_input(rng, {n, h, w, ci}), random_input(rng, {k, k, ci, co}), random_input(rng, {co})}};
                }});
  cs.push_back({"avg_pool2d", [](Rng& rng) {
                  const int n = dim(rng, 1, 2), h = dim(rng, 2, 5), w = dim(rng, 2, 5), c = dim(rng, 1, 3);
                  return std::pair<Builder, std::vector<Input>>{[](TapeD&, const std::vector<VarD>& x) { return ad::avg_pool2d(x[0]); },
                                                               {random_input(rng, {n, h, w, c})}};
                }});
  for (const char* name : {"sum", "mean", "softmax", "log_softmax", "l2_normalize"}) {
    cs.push_back({name, [name = std::string(name)](Rng& rng) {
                    auto s = random_shape(rng);
                    const int axis = static_cast<int>(rng.below(s.size()));
                    // Along a length-1 axis l2_normalize is the constant sign(x).
                    if (name == "l2_normalize" && s[static_cast<std::size_t>(axis)] == 1) s[static_cast<std::size_t>(axis)] = 2;
                    Builder b = [name, axis](TapeD&, const std::vector<VarD>& x) {
                      if (name == "sum") return ad::sum(x[0], axis);
                      if (name == "mean") return ad::mean(x[0], axis);
                      if (name == "softmax") return ad::softmax(x[0], axis);
                      if (name == "log_softmax") return ad::log_softmax(x[0], axis);
                      return ad::l2_normalize(x[0], axis);
                    };
                    return std::pair<Builder, std::vector<Input>>{b, {random_input(rng, s)}};
                  }});
  }
  cs.push_back(unary("sum_all", [](VarD a) { return ad::sum_all(a); }, plain));
  cs.push_back(unary("mean_all", [](VarD a) { return ad::mean_all(a); }, plain));
  cs.push_back({"concat", [](Rng& rng) {
                  auto s = random_shape(rng);
                  const int axis = static_cast<int>(rng.below(s.size()));
                  const int parts = dim(rng, 2, 3);
                  std::vector<Input> ins;
                  for (int p = 0; p < parts; ++p) {
                    auto sp = s;
                    sp[static_cast<std::size_t>(axis)] = dim(rng, 1, 3);
                    ins.push_back(random_input(rng, sp));
                  }
                  return std::pair<Builder, std::vector<Input>>{[axis](TapeD&, const std::vector<VarD>& x) { return ad::concat(x, axis); },
                                                               ins};
                }});
  cs.push_back({"gather_rows", [](Rng& rng) {
                  const int n = dim(rng, 1, 5), d = dim(rng, 1, 4), k = dim(rng, 1, 7);
                  std::vector<int> rows;
                  for (int i = 0; i < k; ++i) rows.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
                  return std::pair<Builder, std::vector<Input>>{
                      [rows](TapeD&, const std::vector<VarD>& x) { return ad::gather_rows(x[0], rows); }, {random_input(rng, {n, d})}};
                }});
  cs.push_back({"pairwise_sqdist", [](Rng& rng) {
                  const int n = dim(rng, 1, 5), m = dim(rng, 1, 5), d = dim(rng, 1, 4);
                  return std::pair<Builder, std::vector<Input>>{
                      [](TapeD&, const std::vector<VarD>& x) { return ad::pairwise_sqdist(x[0], x[1]); },
                      {random_input(rng, {n, d}), random_input(rng, {m, d})}};
                }});

  // Loss compositions as used in training.
  cs.push_back({"loss:bce(sigmoid(logits))", [](Rng& rng) {
                  const int s = dim(rng, 1, 6);
                  std::vector<double> y(static_cast<std::size_t>(s) * 10, 0.0);
                  for (int i = 0; i < s; ++i) y[static_cast<std::size_t>(i) * 10 + rng.below(10)] = 1.0;
                  return std::pair<Builder, std::vector<Input>>{
                      [s, y](TapeD& t, const std::vector<VarD>& x) {
                        return weaklab::losses::bce_loss(ad::sigmoid(x[0]), t.constant({s, 10}, y));
                      },
                      {random_input(rng, {s, 10}, -3.0, 3.0)}};
                }});
  cs.push_back({"loss:triplet(l2_normalize(a,p,n))", [](Rng& rng) {
                  const int b = dim(rng, 1, 5), d = dim(rng, 2, 6);
                  const double margin = 0.5;
                  while (true) {
                    std::vector<Input> ins = {random_input(rng, {b, d}), random_input(rng, {b, d}), random_input(rng, {b, d})};
                    // Reject instances with a hinge argument near its kink.
                    TapeD t;
                    auto na = ad::l2_normalize(t.leaf(ins[0].shape, ins[0].values), 1);
                    auto np = ad::l2_normalize(t.leaf(ins[1].shape, ins[1].values), 1);
                    auto nn = ad::l2_normalize(t.leaf(ins[2].shape, ins[2].values), 1);
                    auto arg = ad::add_scalar(ad::sub(ad::sum(ad::square(ad::sub(na, np)), 1), ad::sum(ad::square(ad::sub(na, nn)), 1)), margin);
                    bool ok = true;
                    for (double v : arg.value()) ok = ok && std::abs(v) > 1e-3;
                    if (!ok) continue;
                    return std::pair<Builder, std::vector<Input>>{
                        [margin](TapeD&, const std::vector<VarD>& x) {
                          return weaklab::losses::triplet_loss(ad::l2_normalize(x[0], 1), ad::l2_normalize(x[1], 1),
                                                               ad::l2_normalize(x[2], 1), margin);
                        },
                        ins};
                  }
                }});
  cs.push_back({"loss:proto(support, query)", [](Rng& rng) {
                  const int j = dim(rng, 2, 4), ms = dim(rng, 1, 3), mq = dim(rng, 1, 3), d = dim(rng, 2, 5);
                  return std::pair<Builder, std::vector<Input>>{
                      [=](TapeD&, const std::vector<VarD>& x) { return weaklab::losses::proto_loss(x[0], x[1], j, ms, mq); },
                      {random_input(rng, {j * ms, d}), random_input(rng, {j * mq, d})}};
                }});
  return cs;
}

}  // namespace

std::vector<CheckSummary> run_gradient_suite(int instances, std::uint64_t seed) {
  std::vector<CheckSummary> out;
  std::uint64_t c = 0;
  for (const auto& cs : cases()) {
    CheckSummary s{cs.name, 0, 0.0};
    Rng rng(weaklab::derive_seed(seed, ++c));
    for (int i = 0; i < instances; ++i) {
      auto [f, inputs] = cs.make(rng);
      s.worst = std::max(s.worst, grad_check(f, inputs, weaklab::derive_seed(seed, c, static_cast<std::uint64_t>(i)), kGradStep));
      ++s.instances;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace wltest
