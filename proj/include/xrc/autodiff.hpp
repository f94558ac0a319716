#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "xrc/ops.hpp"
#include "xrc/tensor.hpp"

namespace xrc {

/// Records every executed primitive in order and replays the records
/// strictly in reverse to accumulate gradients. Values live on the tape;
/// ops hand out opaque handles. Single-writer: one tape is built and
/// consumed by one thread.
template <typename T>
class Tape {
 public:
  struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf value. Leaves with needs_grad=false (inputs, constants)
  /// prune gradient work for everything that depends only on them.
  Var input(Tensor<T> v, bool needs_grad = true) {
    return push(std::move(v), needs_grad);
  }

  const Tensor<T>& value(Var v) const { return values_[check(v)]; }
  std::size_t op_count() const { return nodes_.size(); }

  Var conv2d(Var x, Var w, Var b, const ConvSpec& spec) {
    const Tensor<T>* bias = b.valid() ? &values_[check(b)] : nullptr;
    Tensor<T> y = xrc::conv2d(values_[check(x)], values_[check(w)], bias, spec);
    const Var out = push(std::move(y), needs_grad_[x.id] || needs_grad_[w.id] ||
                                           (b.valid() && needs_grad_[b.id]));
    nodes_.push_back({[this, x, w, b, spec, out] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr) return;
      Tensor<T> dx, dw, db;
      const bool want_x = needs_grad_[x.id];
      const bool want_w = needs_grad_[w.id];
      const bool want_b = b.valid() && needs_grad_[b.id];
      conv2d_backward(values_[x.id], values_[w.id], spec, *dy,
                      want_x ? &dx : nullptr, want_w ? &dw : nullptr,
                      want_b ? &db : nullptr);
      if (want_x) accumulate(x, dx);
      if (want_w) accumulate(w, dw);
      if (want_b) accumulate(b, db);
    }});
    return out;
  }

  Var maxpool2x2(Var x) {
    std::vector<i64> argmax;
    Tensor<T> y = xrc::maxpool2x2(values_[check(x)], &argmax);
    const Var out = push(std::move(y), needs_grad_[x.id]);
    nodes_.push_back({[this, x, out, argmax = std::move(argmax)] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr || !needs_grad_[x.id]) return;
      accumulate(x, maxpool2x2_backward(values_[x.id].shape(), argmax, *dy));
    }});
    return out;
  }

  Var depth_to_space(Var x, i64 block = 2) {
    Tensor<T> y = xrc::depth_to_space(values_[check(x)], block);
    const Var out = push(std::move(y), needs_grad_[x.id]);
    nodes_.push_back({[this, x, out, block] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr || !needs_grad_[x.id]) return;
      accumulate(x, xrc::space_to_depth(*dy, block));
    }});
    return out;
  }

  Var space_to_depth(Var x, i64 block = 2) {
    Tensor<T> y = xrc::space_to_depth(values_[check(x)], block);
    const Var out = push(std::move(y), needs_grad_[x.id]);
    nodes_.push_back({[this, x, out, block] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr || !needs_grad_[x.id]) return;
      accumulate(x, xrc::depth_to_space(*dy, block));
    }});
    return out;
  }

  Var activation(Var x, Activation kind) {
    Tensor<T> y = xrc::activation(values_[check(x)], kind);
    const Var out = push(std::move(y), needs_grad_[x.id]);
    nodes_.push_back({[this, x, out, kind] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr || !needs_grad_[x.id]) return;
      accumulate(x, activation_backward(values_[out.id], *dy, kind));
    }});
    return out;
  }

  Var combine(Var a, Var b, Combine kind) {
    Tensor<T> y = elementwise_combine(values_[check(a)], values_[check(b)], kind);
    const Var out = push(std::move(y), needs_grad_[a.id] || needs_grad_[b.id]);
    nodes_.push_back({[this, a, b, out, kind] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr) return;
      const T scale = kind == Combine::average ? T(0.5) : T(1);
      for (Var v : {a, b}) {
        if (!needs_grad_[v.id]) continue;
        Tensor<T> g(dy->shape());
        for (i64 i = 0; i < dy->numel(); ++i) g.data()[i] = dy->data()[i] * scale;
        accumulate(v, g);
      }
    }});
    return out;
  }

  Var mul(Var a, Var b) {
    Tensor<T> y = elementwise_mul(values_[check(a)], values_[check(b)]);
    const Var out = push(std::move(y), needs_grad_[a.id] || needs_grad_[b.id]);
    nodes_.push_back({[this, a, b, out] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr) return;
      if (needs_grad_[a.id]) {
        accumulate(a, elementwise_mul(*dy, values_[b.id]));
      }
      if (needs_grad_[b.id]) {
        accumulate(b, elementwise_mul(*dy, values_[a.id]));
      }
    }});
    return out;
  }

  /// Adds a constant tensor; no gradient flows into the constant.
  Var add_const(Var x, const Tensor<T>& offset) {
    Tensor<T> y = elementwise_combine(values_[check(x)], offset, Combine::add);
    const Var out = push(std::move(y), needs_grad_[x.id]);
    nodes_.push_back({[this, x, out] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr || !needs_grad_[x.id]) return;
      accumulate(x, *dy);
    }});
    return out;
  }

  /// Clamp to [0, 1]; gradient passes through inside the closed interval.
  Var clamp01(Var x) {
    Tensor<T> y = xrc::clamp01(values_[check(x)]);
    const Var out = push(std::move(y), needs_grad_[x.id]);
    nodes_.push_back({[this, x, out] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr || !needs_grad_[x.id]) return;
      const Tensor<T>& xin = values_[x.id];
      Tensor<T> dx(xin.shape());
      for (i64 i = 0; i < xin.numel(); ++i) {
        const T v = xin.data()[i];
        dx.data()[i] = (v >= T(0) && v <= T(1)) ? dy->data()[i] : T{};
      }
      accumulate(x, dx);
    }});
    return out;
  }

  Var sum(Var x) {
    Tensor<T> y({1, 1, 1, 1});
    y.data()[0] = sum_all(values_[check(x)]);
    const Var out = push(std::move(y), needs_grad_[x.id]);
    nodes_.push_back({[this, x, out] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr || !needs_grad_[x.id]) return;
      accumulate(x, full<T>(values_[x.id].shape(), dy->data()[0]));
    }});
    return out;
  }

  /// L1: mean |a - b| as a scalar. Subgradient at zero difference is zero.
  Var mean_abs_diff(Var a, Var b) {
    Tensor<T> y({1, 1, 1, 1});
    y.data()[0] = xrc::mean_abs_diff(values_[check(a)], values_[check(b)]);
    const Var out = push(std::move(y), needs_grad_[a.id] || needs_grad_[b.id]);
    nodes_.push_back({[this, a, b, out] {
      const Tensor<T>* dy = grad_ptr(out);
      if (dy == nullptr) return;
      const Tensor<T>& av = values_[a.id];
      const Tensor<T>& bv = values_[b.id];
      const T g = dy->data()[0] / static_cast<T>(av.numel());
      Tensor<T> da(av.shape());
      for (i64 i = 0; i < av.numel(); ++i) {
        const T d = av.data()[i] - bv.data()[i];
        da.data()[i] = d > T(0) ? g : (d < T(0) ? -g : T{});
      }
      if (needs_grad_[b.id]) {
        Tensor<T> db(bv.shape());
        for (i64 i = 0; i < bv.numel(); ++i) db.data()[i] = -da.data()[i];
        accumulate(b, db);
      }
      if (needs_grad_[a.id]) accumulate(a, da);
    }});
    return out;
  }

  /// Seeds the scalar loss with gradient 1 and replays recorded ops in
  /// exact reverse execution order.
  void backward(Var loss) {
    check(loss);
    if (!values_[loss.id].is_scalar()) {
      fail("backward: loss must be scalar, got shape ",
           values_[loss.id].shape().str());
    }
    grads_.assign(values_.size(), std::nullopt);
    grads_[loss.id] = full<T>({1, 1, 1, 1}, T(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      it->back();
    }
  }

  /// Gradient of the last backward() w.r.t. v; zeros when v was not reached.
  Tensor<T> grad(Var v) const {
    check(v);
    if (v.id < static_cast<std::int32_t>(grads_.size()) && grads_[v.id]) {
      return *grads_[v.id];
    }
    return zeros<T>(values_[v.id].shape());
  }

 private:
  struct Node {
    std::function<void()> back;
  };

  Var push(Tensor<T> v, bool needs_grad) {
    values_.push_back(std::move(v));
    needs_grad_.push_back(needs_grad);
    return Var{static_cast<std::int32_t>(values_.size() - 1)};
  }

  std::int32_t check(Var v) const {
    if (!v.valid() || v.id >= static_cast<std::int32_t>(values_.size())) {
      fail("tape: invalid variable handle");
    }
    return v.id;
  }

  const Tensor<T>* grad_ptr(Var v) const {
    if (v.id < static_cast<std::int32_t>(grads_.size()) && grads_[v.id]) {
      return &*grads_[v.id];
    }
    return nullptr;
  }

  void accumulate(Var v, const Tensor<T>& g) {
    if (!grads_[v.id]) {
      grads_[v.id] = g;
      return;
    }
    Tensor<T>& acc = *grads_[v.id];
    for (i64 i = 0; i < g.numel(); ++i) acc.data()[i] += g.data()[i];
  }

  std::vector<Tensor<T>> values_;
  std::vector<bool> needs_grad_;
  std::vector<std::optional<Tensor<T>>> grads_;
  std::vector<Node> nodes_;
};

}  // namespace xrc
