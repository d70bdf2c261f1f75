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

// Minimal tape-based reverse-mode differentiation over dense row-major
// tensors. The scalar type is a template parameter: training uses float,
// gradient checks use double. Reductions accumulate in double either way.
//
// A Tape records every primitive application in creation order, which is a
// topological order, and backward() walks it once in reverse. A tape supports
// exactly one backward pass; calling backward() again throws. Gradients of
// Parameters are *added* to Parameter::grad, so several tapes can contribute
// to one optimizer step; call zero_grad() between steps.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "weaklab/common.hpp"

namespace weaklab::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b);
[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& detail);

template <typename T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string n, Shape s) : name(std::move(n)), shape(std::move(s)), value(numel(shape)), grad(numel(shape)) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;

  const Shape& shape() const { return tape_->node(id_).shape; }
  int dim(int axis) const { return shape()[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return tape_->node(id_).value.size(); }
  std::span<const T> value() const { return tape_->node(id_).value; }
  // Empty until backward() has reached this node.
  std::span<const T> grad() const { return tape_->node(id_).grad; }
  bool requires_grad() const { return tape_->node(id_).requires_grad; }
  T item() const {
    if (size() != 1) shape_error("item", shape(), "expected a single element");
    return value()[0];
  }

  Tape<T>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Shape shape, std::vector<T> values) { return push(std::move(shape), std::move(values), false, {}); }

  // A differentiable input whose gradient is readable via Var::grad().
  Var<T> leaf(Shape shape, std::vector<T> values) { return push(std::move(shape), std::move(values), true, {}); }

  Var<T> param(Parameter<T>& p) {
    Var<T> v = push(p.shape, p.value, true, {});
    nodes_.back().param = &p;
    return v;
  }

  // Frozen use of a parameter: no gradient flows into it.
  Var<T> frozen(const Parameter<T>& p) { return constant(p.shape, p.value); }

  void backward(Var<T> loss) {
    check(loss);
    if (loss.size() != 1) shape_error("backward", loss.shape(), "loss must be a scalar");
    const T one = T(1);
    backward(loss, std::span<const T>(&one, 1));
  }

  // Vector-Jacobian product: seeds `out` with `upstream` and propagates.
  void backward(Var<T> out, std::span<const T> upstream) {
    check(out);
    if (backward_done_) throw Error("Tape::backward called twice on the same tape");
    backward_done_ = true;
    Node& root = nodes_[static_cast<std::size_t>(out.id())];
    if (upstream.size() != root.value.size()) shape_error("backward", root.shape, "upstream gradient size mismatch");
    if (!root.requires_grad) return;
    grad_buffer(out.id());
    for (std::size_t i = 0; i < upstream.size(); ++i) root.grad[i] += upstream[i];
    for (int id = out.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, id);
    }
    for (Node& n : nodes_) {
      if (n.param == nullptr) continue;
      if (n.grad.empty()) continue;  // unreached: contributes zero
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
    }
  }

  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

  // --- internals used by the primitives ---
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Var<T> push(Shape shape, std::vector<T> values, bool requires_grad, BackwardFn fn) {
    if (values.size() != numel(shape)) shape_error("tensor", shape, "value count does not match shape");
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(values);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<int>(nodes_.size() - 1));
  }

  std::vector<T>& grad_buffer(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  void check(const Var<T>& v) const {
    if (v.tape() != this) throw Error("variable belongs to a different tape");
  }

 private:
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Primitives

namespace detail {

template <typename T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
  if (a.tape() != b.tape()) throw Error("operands live on different tapes");
  return *a.tape();
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis);
int normalize_axis(const Shape& s, int axis);

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Elementwise unary op with derivative expressed through (x, y).
template <typename T, typename F, typename D>
Var<T> unary(Var<T> x, F f, D df) {
  Tape<T>& t = *x.tape();
  const auto& xv = t.node(x.id()).value;
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  const int xi = x.id();
  return t.push(x.shape(), std::move(y), x.requires_grad(), [xi, df](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    const auto& xv2 = tp.node(xi).value;
    const auto& yv = tp.node(self).value;
    auto& gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * df(xv2[i], yv[i]);
  });
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
  const auto& av = t.node(a.id()).value;
  const auto& bv = t.node(b.id()).value;
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  const int ai = a.id(), bi = b.id();
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return t.push(a.shape(), std::move(y), ag || bg, [ai, bi, ag, bg](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    if (ag) {
      auto& g = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
    if (bg) {
      auto& g = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
  const auto& av = t.node(a.id()).value;
  const auto& bv = t.node(b.id()).value;
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  const int ai = a.id(), bi = b.id();
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return t.push(a.shape(), std::move(y), ag || bg, [ai, bi, ag, bg](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    if (ag) {
      auto& g = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
    if (bg) {
      auto& g = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] -= go[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  const auto& av = t.node(a.id()).value;
  const auto& bv = t.node(b.id()).value;
  std::vector<T> y(av.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  const int ai = a.id(), bi = b.id();
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return t.push(a.shape(), std::move(y), ag || bg, [ai, bi, ag, bg](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    if (ag) {
      auto& g = tp.grad_buffer(ai);
      const auto& bv2 = tp.node(bi).value;
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * bv2[i];
    }
    if (bg) {
      auto& g = tp.grad_buffer(bi);
      const auto& av2 = tp.node(ai).value;
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * av2[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, T c) {
  return detail::unary(x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <typename T>
Var<T> add_scalar(Var<T> x, T c) {
  return detail::unary(x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T alpha) {
  return detail::unary(
      x, [alpha](T v) { return v > T(0) ? v : alpha * v; }, [alpha](T v, T) { return v > T(0) ? T(1) : alpha; });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  return detail::unary(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> log(Var<T> x) {
  return detail::unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> square(Var<T> x) {
  return detail::unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

// max(x, 0); subgradient at 0 is 0.
template <typename T>
Var<T> hinge(Var<T> x) {
  return detail::unary(x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

// Gradient passes only strictly inside (lo, hi).
template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi) {
  return detail::unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); }, [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  Tape<T>& t = *x.tape();
  const int xi = x.id();
  return t.push(std::move(shape), t.node(xi).value, x.requires_grad(), [xi](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    auto& g = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
  });
}

// x [..., C] + b [C]
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> b) {
  Tape<T>& t = detail::same_tape(x, b);
  const std::size_t c = b.size();
  if (b.shape().size() != 1 || x.shape().empty() || static_cast<std::size_t>(x.shape().back()) != c) {
    shape_error("add_bias", x.shape(), b.shape());
  }
  const auto& xv = t.node(x.id()).value;
  const auto& bv = t.node(b.id()).value;
  std::vector<T> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] + bv[i % c];
  const int xi = x.id(), bi = b.id();
  const bool xg = x.requires_grad(), bg = b.requires_grad();
  return t.push(x.shape(), std::move(y), xg || bg, [xi, bi, xg, bg, c](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    if (xg) {
      auto& g = tp.grad_buffer(xi);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
    if (bg) {
      std::vector<double> acc(c, 0.0);
      for (std::size_t i = 0; i < go.size(); ++i) acc[i % c] += go[i];
      auto& g = tp.grad_buffer(bi);
      for (std::size_t j = 0; j < c; ++j) g[j] += static_cast<T>(acc[j]);
    }
  });
}

// a [n, k] x b [k, m]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
  using M = detail::RowMat<T>;
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<T> y(static_cast<std::size_t>(n) * m);
  {
    Eigen::Map<const M> A(t.node(a.id()).value.data(), n, k);
    Eigen::Map<const M> B(t.node(b.id()).value.data(), k, m);
    Eigen::Map<M> Y(y.data(), n, m);
    Y.noalias() = A * B;
  }
  const int ai = a.id(), bi = b.id();
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return t.push({n, m}, std::move(y), ag || bg, [ai, bi, ag, bg, n, k, m](Tape<T>& tp, int self) {
    Eigen::Map<const M> G(tp.node(self).grad.data(), n, m);
    if (ag) {
      Eigen::Map<const M> B(tp.node(bi).value.data(), k, m);
      Eigen::Map<M> GA(tp.grad_buffer(ai).data(), n, k);
      GA.noalias() += G * B.transpose();
    }
    if (bg) {
      Eigen::Map<const M> A(tp.node(ai).value.data(), n, k);
      Eigen::Map<M> GB(tp.grad_buffer(bi).data(), k, m);
      GB.noalias() += A.transpose() * G;
    }
  });
}

namespace detail {

// Rows of the patch matrix for images [n0, n1) of an NHWC tensor, kernel k,
// zero "same" padding. Row layout: (n, h, w); column layout: (kh, kw, c).
template <typename T>
void im2col(const T* x, int n0, int n1, int H, int W, int C, int k, T* cols) {
  const int pad = k / 2;
  const std::size_t row_len = static_cast<std::size_t>(k) * k * C;
  std::size_t r = 0;
  for (int n = n0; n < n1; ++n) {
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < W; ++w, ++r) {
        T* row = cols + r * row_len;
        for (int kh = 0; kh < k; ++kh) {
          const int ih = h + kh - pad;
          for (int kw = 0; kw < k; ++kw) {
            const int iw = w + kw - pad;
            T* dst = row + (static_cast<std::size_t>(kh) * k + kw) * C;
            if (ih < 0 || ih >= H || iw < 0 || iw >= W) {
              std::fill(dst, dst + C, T(0));
            } else {
              const T* src = x + ((static_cast<std::size_t>(n) * H + ih) * W + iw) * C;
              std::copy(src, src + C, dst);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int n0, int n1, int H, int W, int C, int k, T* gx) {
  const int pad = k / 2;
  const std::size_t row_len = static_cast<std::size_t>(k) * k * C;
  std::size_t r = 0;
  for (int n = n0; n < n1; ++n) {
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < W; ++w, ++r) {
        const T* row = cols + r * row_len;
        for (int kh = 0; kh < k; ++kh) {
          const int ih = h + kh - pad;
          if (ih < 0 || ih >= H) continue;
          for (int kw = 0; kw < k; ++kw) {
            const int iw = w + kw - pad;
            if (iw < 0 || iw >= W) continue;
            const T* src = row + (static_cast<std::size_t>(kh) * k + kw) * C;
            T* dst = gx + ((static_cast<std::size_t>(n) * H + ih) * W + iw) * C;
            for (int c = 0; c < C; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

// Images per im2col chunk, bounding the patch buffer to ~4M scalars.
inline int conv_chunk(int N, int H, int W, int k, int C) {
  const std::size_t per_image = static_cast<std::size_t>(H) * W * k * k * C;
  return std::max(1, std::min(N, static_cast<int>((std::size_t{1} << 22) / std::max<std::size_t>(per_image, 1))));
}

}  // namespace detail

// x [N, H, W, Cin], w [k, k, Cin, Cout], b [Cout]; stride 1, zero "same"
// padding, odd k.
template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b) {
  Tape<T>& t = detail::same_tape(x, w);
  detail::same_tape(x, b);
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4 || ws[0] != ws[1] || ws[0] % 2 == 0 || ws[2] != xs[3]) {
    shape_error("conv2d", xs, ws);
  }
  if (b.shape().size() != 1 || b.dim(0) != ws[3]) shape_error("conv2d bias", ws, b.shape());
  const int N = xs[0], H = xs[1], W = xs[2], Cin = xs[3], k = ws[0], Cout = ws[3];
  const int K = k * k * Cin;
  using M = detail::RowMat<T>;

  std::vector<T> y(static_cast<std::size_t>(N) * H * W * Cout);
  {
    const T* xv = t.node(x.id()).value.data();
    Eigen::Map<const M> Wm(t.node(w.id()).value.data(), K, Cout);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(t.node(b.id()).value.data(), Cout);
    const int chunk = detail::conv_chunk(N, H, W, k, Cin);
    std::vector<T> cols;
    for (int n0 = 0; n0 < N; n0 += chunk) {
      const int n1 = std::min(N, n0 + chunk);
      const int rows = (n1 - n0) * H * W;
      cols.resize(static_cast<std::size_t>(rows) * K);
      detail::im2col(xv, n0, n1, H, W, Cin, k, cols.data());
      Eigen::Map<const M> Cm(cols.data(), rows, K);
      Eigen::Map<M> Y(y.data() + static_cast<std::size_t>(n0) * H * W * Cout, rows, Cout);
      Y.noalias() = Cm * Wm;
      Y.rowwise() += bias;
    }
  }

  const int xi = x.id(), wi = w.id(), bi = b.id();
  const bool xg = x.requires_grad(), wg = w.requires_grad(), bg = b.requires_grad();
  return t.push({N, H, W, Cout}, std::move(y), xg || wg || bg,
                [=](Tape<T>& tp, int self) {
                  const T* go = tp.node(self).grad.data();
                  if (bg) {
                    std::vector<double> acc(static_cast<std::size_t>(Cout), 0.0);
                    const std::size_t rows = static_cast<std::size_t>(N) * H * W;
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (int c = 0; c < Cout; ++c) acc[c] += go[r * Cout + c];
                    }
                    auto& gb = tp.grad_buffer(bi);
                    for (int c = 0; c < Cout; ++c) gb[c] += static_cast<T>(acc[c]);
                  }
                  if (!xg && !wg) return;
                  const T* xv = tp.node(xi).value.data();
                  Eigen::Map<const M> Wm(tp.node(wi).value.data(), K, Cout);
                  T* gw_ptr = wg ? tp.grad_buffer(wi).data() : nullptr;
                  T* gx_ptr = xg ? tp.grad_buffer(xi).data() : nullptr;
                  const int chunk = detail::conv_chunk(N, H, W, k, Cin);
                  std::vector<T> cols;
                  for (int n0 = 0; n0 < N; n0 += chunk) {
                    const int n1 = std::min(N, n0 + chunk);
                    const int rows = (n1 - n0) * H * W;
                    cols.resize(static_cast<std::size_t>(rows) * K);
                    Eigen::Map<const M> G(go + static_cast<std::size_t>(n0) * H * W * Cout, rows, Cout);
                    if (wg) {
                      detail::im2col(xv, n0, n1, H, W, Cin, k, cols.data());
                      Eigen::Map<const M> Cm(cols.data(), rows, K);
                      Eigen::Map<M> GW(gw_ptr, K, Cout);
                      GW.noalias() += Cm.transpose() * G;
                    }
                    if (xg) {
                      Eigen::Map<M> Cm(cols.data(), rows, K);
                      Cm.noalias() = G * Wm.transpose();
                      detail::col2im_add(cols.data(), n0, n1, H, W, Cin, k, gx_ptr);
                    }
                  }
                });
}

// 2x2 average pooling with stride 2 over H and W of an NHWC tensor; odd
// trailing rows/columns are dropped.
template <typename T>
Var<T> avg_pool2d(Var<T> x) {
  Tape<T>& t = *x.tape();
  const Shape xs = x.shape();
  if (xs.size() != 4 || xs[1] < 2 || xs[2] < 2) shape_error("avg_pool2d", xs, "need [N, H>=2, W>=2, C]");
  const int N = xs[0], H = xs[1], W = xs[2], C = xs[3];
  const int Ho = H / 2, Wo = W / 2;
  const auto& xv = t.node(x.id()).value;
  std::vector<T> y(static_cast<std::size_t>(N) * Ho * Wo * C);
  auto at = [&](int n, int h, int w) { return ((static_cast<std::size_t>(n) * H + h) * W + w) * C; };
  for (int n = 0; n < N; ++n) {
    for (int h = 0; h < Ho; ++h) {
      for (int w = 0; w < Wo; ++w) {
        T* dst = y.data() + ((static_cast<std::size_t>(n) * Ho + h) * Wo + w) * C;
        const T* a = xv.data() + at(n, 2 * h, 2 * w);
        const T* b = xv.data() + at(n, 2 * h, 2 * w + 1);
        const T* c = xv.data() + at(n, 2 * h + 1, 2 * w);
        const T* d = xv.data() + at(n, 2 * h + 1, 2 * w + 1);
        for (int ch = 0; ch < C; ++ch) dst[ch] = T(0.25) * (a[ch] + b[ch] + c[ch] + d[ch]);
      }
    }
  }
  const int xi = x.id();
  return t.push({N, Ho, Wo, C}, std::move(y), x.requires_grad(), [=](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    auto& gx = tp.grad_buffer(xi);
    auto idx = [&](int n, int h, int w) { return ((static_cast<std::size_t>(n) * H + h) * W + w) * C; };
    for (int n = 0; n < N; ++n) {
      for (int h = 0; h < Ho; ++h) {
        for (int w = 0; w < Wo; ++w) {
          const T* g = go.data() + ((static_cast<std::size_t>(n) * Ho + h) * Wo + w) * C;
          for (int dh = 0; dh < 2; ++dh) {
            for (int dw = 0; dw < 2; ++dw) {
              T* dst = gx.data() + idx(n, 2 * h + dh, 2 * w + dw);
              for (int ch = 0; ch < C; ++ch) dst[ch] += T(0.25) * g[ch];
            }
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x, int axis) {
  Tape<T>& t = *x.tape();
  const int ax = detail::normalize_axis(x.shape(), axis);
  const auto sp = detail::split_axis(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + ax);
  const auto& xv = t.node(x.id()).value;
  std::vector<T> y(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) acc += xv[(o * sp.len + l) * sp.inner + i];
      y[o * sp.inner + i] = static_cast<T>(acc);
    }
  }
  const int xi = x.id();
  return t.push(std::move(out_shape), std::move(y), x.requires_grad(), [xi, sp](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    auto& gx = tp.grad_buffer(xi);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t l = 0; l < sp.len; ++l) {
        for (std::size_t i = 0; i < sp.inner; ++i) gx[(o * sp.len + l) * sp.inner + i] += go[o * sp.inner + i];
      }
    }
  });
}

template <typename T>
Var<T> mean(Var<T> x, int axis) {
  const int ax = detail::normalize_axis(x.shape(), axis);
  const int len = x.dim(ax);
  return scale(sum(x, ax), T(1) / static_cast<T>(len));
}

template <typename T>
Var<T> sum_all(Var<T> x) {
  return sum(reshape(x, Shape{static_cast<int>(x.size())}), 0);
}

template <typename T>
Var<T> mean_all(Var<T> x) {
  const auto n = static_cast<T>(x.size());
  return scale(sum_all(x), T(1) / n);
}

template <typename T>
Var<T> softmax(Var<T> x, int axis) {
  Tape<T>& t = *x.tape();
  const int ax = detail::normalize_axis(x.shape(), axis);
  const auto sp = detail::split_axis(x.shape(), ax);
  const auto& xv = t.node(x.id()).value;
  std::vector<T> y(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
      T mx = xv[at(0)];
      for (std::size_t l = 1; l < sp.len; ++l) mx = std::max(mx, xv[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) z += std::exp(static_cast<double>(xv[at(l)] - mx));
      for (std::size_t l = 0; l < sp.len; ++l) y[at(l)] = static_cast<T>(std::exp(static_cast<double>(xv[at(l)] - mx)) / z);
    }
  }
  const int xi = x.id();
  return t.push(x.shape(), std::move(y), x.requires_grad(), [xi, sp](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    const auto& yv = tp.node(self).value;
    auto& gx = tp.grad_buffer(xi);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
        double dot = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) dot += static_cast<double>(go[at(l)]) * yv[at(l)];
        for (std::size_t l = 0; l < sp.len; ++l) gx[at(l)] += static_cast<T>(yv[at(l)] * (go[at(l)] - dot));
      }
    }
  });
}

template <typename T>
Var<T> log_softmax(Var<T> x, int axis) {
  Tape<T>& t = *x.tape();
  const int ax = detail::normalize_axis(x.shape(), axis);
  const auto sp = detail::split_axis(x.shape(), ax);
  const auto& xv = t.node(x.id()).value;
  std::vector<T> y(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
      T mx = xv[at(0)];
      for (std::size_t l = 1; l < sp.len; ++l) mx = std::max(mx, xv[at(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) z += std::exp(static_cast<double>(xv[at(l)] - mx));
      const double lse = static_cast<double>(mx) + std::log(z);
      for (std::size_t l = 0; l < sp.len; ++l) y[at(l)] = static_cast<T>(xv[at(l)] - lse);
    }
  }
  const int xi = x.id();
  return t.push(x.shape(), std::move(y), x.requires_grad(), [xi, sp](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    const auto& yv = tp.node(self).value;
    auto& gx = tp.grad_buffer(xi);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
        double gsum = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) gsum += go[at(l)];
        for (std::size_t l = 0; l < sp.len; ++l) {
          gx[at(l)] += static_cast<T>(go[at(l)] - std::exp(static_cast<double>(yv[at(l)])) * gsum);
        }
      }
    }
  });
}

// x / sqrt(sum(x^2) + eps) along `axis`.
template <typename T>
Var<T> l2_normalize(Var<T> x, int axis, T eps = T(1e-12)) {
  Tape<T>& t = *x.tape();
  const int ax = detail::normalize_axis(x.shape(), axis);
  const auto sp = detail::split_axis(x.shape(), ax);
  const auto& xv = t.node(x.id()).value;
  std::vector<T> y(xv.size());
  std::vector<double> norms(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
      double ss = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) ss += static_cast<double>(xv[at(l)]) * xv[at(l)];
      const double nrm = std::sqrt(ss + static_cast<double>(eps));
      norms[o * sp.inner + i] = nrm;
      for (std::size_t l = 0; l < sp.len; ++l) y[at(l)] = static_cast<T>(xv[at(l)] / nrm);
    }
  }
  const int xi = x.id();
  return t.push(x.shape(), std::move(y), x.requires_grad(), [xi, sp, norms = std::move(norms)](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    const auto& yv = tp.node(self).value;
    auto& gx = tp.grad_buffer(xi);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        auto at = [&](std::size_t l) { return (o * sp.len + l) * sp.inner + i; };
        double dot = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) dot += static_cast<double>(go[at(l)]) * yv[at(l)];
        const double nrm = norms[o * sp.inner + i];
        for (std::size_t l = 0; l < sp.len; ++l) gx[at(l)] += static_cast<T>((go[at(l)] - yv[at(l)] * dot) / nrm);
      }
    }
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
  if (xs.empty()) throw Error("concat: no inputs");
  Tape<T>& t = *xs.front().tape();
  const int ax = detail::normalize_axis(xs.front().shape(), axis);
  Shape out_shape = xs.front().shape();
  out_shape[ax] = 0;
  bool rg = false;
  for (const auto& v : xs) {
    detail::same_tape(xs.front(), v);
    Shape s = v.shape();
    if (s.size() != out_shape.size()) shape_error("concat", xs.front().shape(), s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (static_cast<int>(d) != ax && s[d] != xs.front().shape()[d]) shape_error("concat", xs.front().shape(), s);
    }
    out_shape[ax] += s[ax];
    rg = rg || v.requires_grad();
  }
  const auto sp = detail::split_axis(out_shape, ax);
  std::vector<T> y(numel(out_shape));
  std::vector<int> ids;
  std::vector<std::size_t> lens;
  std::size_t offset = 0;
  for (const auto& v : xs) {
    const std::size_t len = static_cast<std::size_t>(v.dim(ax));
    const auto& xv = t.node(v.id()).value;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(xv.data() + o * len * sp.inner, len * sp.inner, y.data() + (o * sp.len + offset) * sp.inner);
    }
    ids.push_back(v.id());
    lens.push_back(len);
    offset += len;
  }
  return t.push(std::move(out_shape), std::move(y), rg, [ids, lens, sp](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    std::size_t off = 0;
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (tp.node(ids[j]).requires_grad) {
        auto& g = tp.grad_buffer(ids[j]);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const T* src = go.data() + (o * sp.len + off) * sp.inner;
          T* dst = g.data() + o * lens[j] * sp.inner;
          for (std::size_t q = 0; q < lens[j] * sp.inner; ++q) dst[q] += src[q];
        }
      }
      off += lens[j];
    }
  });
}

// Rows of x along axis 0, in the given order (indices may repeat).
template <typename T>
Var<T> gather_rows(Var<T> x, std::vector<int> rows) {
  Tape<T>& t = *x.tape();
  if (x.shape().empty()) shape_error("gather_rows", x.shape(), "need rank >= 1");
  const int n = x.dim(0);
  const std::size_t row_len = x.size() / static_cast<std::size_t>(std::max(n, 1));
  for (int r : rows) {
    if (r < 0 || r >= n) shape_error("gather_rows", x.shape(), "row index " + std::to_string(r) + " out of range");
  }
  Shape out_shape = x.shape();
  out_shape[0] = static_cast<int>(rows.size());
  const auto& xv = t.node(x.id()).value;
  std::vector<T> y(rows.size() * row_len);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    std::copy_n(xv.data() + static_cast<std::size_t>(rows[j]) * row_len, row_len, y.data() + j * row_len);
  }
  const int xi = x.id();
  return t.push(std::move(out_shape), std::move(y), x.requires_grad(), [xi, rows = std::move(rows), row_len](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    auto& gx = tp.grad_buffer(xi);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const T* src = go.data() + j * row_len;
      T* dst = gx.data() + static_cast<std::size_t>(rows[j]) * row_len;
      for (std::size_t q = 0; q < row_len; ++q) dst[q] += src[q];
    }
  });
}

// d[i, j] = ||a_i - b_j||^2 for a [n, d], b [m, d].
template <typename T>
Var<T> pairwise_sqdist(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(1)) shape_error("pairwise_sqdist", a.shape(), b.shape());
  const int n = a.dim(0), m = b.dim(0), d = a.dim(1);
  const auto& av = t.node(a.id()).value;
  const auto& bv = t.node(b.id()).value;
  std::vector<T> y(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int q = 0; q < d; ++q) {
        const double diff = static_cast<double>(av[static_cast<std::size_t>(i) * d + q]) - bv[static_cast<std::size_t>(j) * d + q];
        acc += diff * diff;
      }
      y[static_cast<std::size_t>(i) * m + j] = static_cast<T>(acc);
    }
  }
  const int ai = a.id(), bi = b.id();
  const bool ag = a.requires_grad(), bg = b.requires_grad();
  return t.push({n, m}, std::move(y), ag || bg, [=](Tape<T>& tp, int self) {
    const auto& go = tp.node(self).grad;
    const auto& av2 = tp.node(ai).value;
    const auto& bv2 = tp.node(bi).value;
    T* ga = ag ? tp.grad_buffer(ai).data() : nullptr;
    T* gb = bg ? tp.grad_buffer(bi).data() : nullptr;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        const T g2 = T(2) * go[static_cast<std::size_t>(i) * m + j];
        for (int q = 0; q < d; ++q) {
          const T diff = av2[static_cast<std::size_t>(i) * d + q] - bv2[static_cast<std::size_t>(j) * d + q];
          if (ga) ga[static_cast<std::size_t>(i) * d + q] += g2 * diff;
          if (gb) gb[static_cast<std::size_t>(j) * d + q] -= g2 * diff;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update at step t (t >= 1) of a single tensor.
template <typename T>
void adam_update(std::span<T> value, std::span<const T> grad, std::span<T> m, std::span<T> v, const AdamConfig& cfg,
                 long t) {
  if (value.size() != grad.size() || value.size() != m.size() || value.size() != v.size()) {
    throw Error("adam_update: shape mismatch between parameters, gradients and moments");
  }
  if (t < 1) throw Error("adam_update: step index must start at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    value[i] = static_cast<T>(value[i] - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
  }
}

template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), T(0));
      v_.emplace_back(p->size(), T(0));
    }
  }

  void step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter<T>& p = *params_[i];
      adam_update<T>(p.value, p.grad, m_[i], v_[i], cfg_, t_);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  long t_ = 0;
};

}  // namespace weaklab::ad
