#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "xrc/autodiff.hpp"
#include "xrc/ops.hpp"
#include "xrc/rng.hpp"
#include "xrc/tensor.hpp"

namespace xrc {

template <typename T>
struct GateParams {
  Tensor<T> wx;  // (hidden, in, k, k)
  Tensor<T> wh;  // (hidden, hidden, k, k)
  Tensor<T> b;   // (1, hidden, 1, 1)
};

/// Convolutional LSTM without peephole connections. The input-to-hidden
/// convolution follows x_spec (and may be strided); the hidden-to-hidden
/// convolution always runs stride 1 with same padding so state spatial
/// dims are preserved across steps. All four gates share kernel size and
/// channel counts.
template <typename T>
struct ConvLstmParams {
  GateParams<T> input;
  GateParams<T> forget;
  GateParams<T> output;
  GateParams<T> cand;
  ConvSpec x_spec;

  i64 hidden_channels() const { return x_spec.out_channels; }

  ConvSpec h_spec() const {
    ConvSpec s = x_spec;
    s.in_channels = s.out_channels;
    s.stride_h = 1;
    s.stride_w = 1;
    s.padding = Padding::same;
    return s;
  }
};

template <typename T>
struct ConvLstmState {
  Tensor<T> hidden;
  Tensor<T> cell;
};

template <typename T>
ConvLstmState<T> zero_state(i64 batch, i64 hidden_ch, i64 h, i64 w) {
  return {zeros<T>({batch, hidden_ch, h, w}), zeros<T>({batch, hidden_ch, h, w})};
}

namespace detail {

template <typename T>
GateParams<T> make_gate(Rng& rng, const ConvSpec& x_spec, T forget_bias) {
  const i64 hid = x_spec.out_channels;
  GateParams<T> g;
  g.wx = Tensor<T>({hid, x_spec.in_channels, x_spec.kernel_h, x_spec.kernel_w});
  g.wh = Tensor<T>({hid, hid, x_spec.kernel_h, x_spec.kernel_w});
  g.b = full<T>({1, hid, 1, 1}, forget_bias);
  const double bx = std::sqrt(1.0 / static_cast<double>(x_spec.in_channels *
                                                        x_spec.kernel_h *
                                                        x_spec.kernel_w));
  const double bh =
      std::sqrt(1.0 / static_cast<double>(hid * x_spec.kernel_h * x_spec.kernel_w));
  rng.fill_uniform(g.wx, -bx, bx);
  rng.fill_uniform(g.wh, -bh, bh);
  return g;
}

}  // namespace detail

/// Weights uniform in +/- sqrt(1/fan_in); forget-gate bias starts at 1.
template <typename T>
ConvLstmParams<T> make_convlstm(Rng& rng, i64 in_ch, i64 hidden_ch, i64 kernel,
                                i64 stride, Padding padding) {
  ConvLstmParams<T> p;
  p.x_spec = ConvSpec{kernel, kernel, stride, stride, padding, in_ch, hidden_ch};
  p.x_spec.validate();
  p.input = detail::make_gate<T>(rng, p.x_spec, T(0));
  p.forget = detail::make_gate<T>(rng, p.x_spec, T(1));
  p.output = detail::make_gate<T>(rng, p.x_spec, T(0));
  p.cand = detail::make_gate<T>(rng, p.x_spec, T(0));
  return p;
}

/// Visits every parameter tensor in fixed declaration order: gates
/// (input, forget, output, candidate) x (wx, wh, b). Checkpoint layout and
/// optimizer state indexing rely on this order.
template <typename T, typename F>
void visit_params(ConvLstmParams<T>& p, const std::string& prefix, F&& f) {
  const std::pair<const char*, GateParams<T>*> gates[] = {
      {"i", &p.input}, {"f", &p.forget}, {"o", &p.output}, {"g", &p.cand}};
  for (const auto& [name, gate] : gates) {
    f(prefix + "." + name + ".wx", gate->wx);
    f(prefix + "." + name + ".wh", gate->wh);
    f(prefix + "." + name + ".b", gate->b);
  }
}

template <typename T>
struct BoundGate {
  typename Tape<T>::Var wx, wh, b;
};

template <typename T>
struct BoundConvLstm {
  BoundGate<T> input, forget, output, cand;
};

/// Registers the cell parameters on a tape. When flat is given, the vars are
/// appended in the same order visit_params uses.
template <typename T>
BoundConvLstm<T> bind_convlstm(Tape<T>& tape, const ConvLstmParams<T>& p,
                               std::vector<typename Tape<T>::Var>* flat = nullptr) {
  auto bind_gate = [&](const GateParams<T>& g) {
    BoundGate<T> b{tape.input(g.wx), tape.input(g.wh), tape.input(g.b)};
    if (flat != nullptr) {
      flat->push_back(b.wx);
      flat->push_back(b.wh);
      flat->push_back(b.b);
    }
    return b;
  };
  BoundConvLstm<T> b;
  b.input = bind_gate(p.input);
  b.forget = bind_gate(p.forget);
  b.output = bind_gate(p.output);
  b.cand = bind_gate(p.cand);
  return b;
}

/// One recurrence update:
///   i = sigma(x*Wxi + h*Whi + bi)    f, o analogous
///   g = tanh(x*Wxg + h*Whg + bg)
///   c' = f.c + i.g                   h' = o.tanh(c')
template <typename T>
std::pair<typename Tape<T>::Var, typename Tape<T>::Var> cell_step_t(
    Tape<T>& tape, typename Tape<T>::Var x, typename Tape<T>::Var h,
    typename Tape<T>::Var c, const BoundConvLstm<T>& p, const ConvSpec& x_spec) {
  using Var = typename Tape<T>::Var;
  const Shape& xs = tape.value(x).shape();
  const i64 eh = conv_out_dim(xs.h, x_spec.kernel_h, x_spec.stride_h, x_spec.padding);
  const i64 ew = conv_out_dim(xs.w, x_spec.kernel_w, x_spec.stride_w, x_spec.padding);
  const Shape& hs = tape.value(h).shape();
  if (hs.h != eh || hs.w != ew || hs.c != x_spec.out_channels || hs.n != xs.n) {
    fail("cell_step: state shape ", hs.str(), " does not match expected ",
         Shape{xs.n, x_spec.out_channels, eh, ew}.str(), " for input ", xs.str());
  }
  if (tape.value(h).shape() != tape.value(c).shape()) {
    fail("cell_step: hidden shape ", tape.value(h).shape().str(),
         " != cell shape ", tape.value(c).shape().str());
  }

  ConvSpec h_spec = x_spec;
  h_spec.in_channels = x_spec.out_channels;
  h_spec.stride_h = 1;
  h_spec.stride_w = 1;
  h_spec.padding = Padding::same;

  auto preact = [&](const BoundGate<T>& g) {
    Var ax = tape.conv2d(x, g.wx, g.b, x_spec);
    Var ah = tape.conv2d(h, g.wh, Var{}, h_spec);
    return tape.combine(ax, ah, Combine::add);
  };
  Var gi = tape.activation(preact(p.input), Activation::sigmoid);
  Var gf = tape.activation(preact(p.forget), Activation::sigmoid);
  Var go = tape.activation(preact(p.output), Activation::sigmoid);
  Var gg = tape.activation(preact(p.cand), Activation::tanh);

  Var c2 = tape.combine(tape.mul(gf, c), tape.mul(gi, gg), Combine::add);
  Var h2 = tape.mul(go, tape.activation(c2, Activation::tanh));
  return {h2, c2};
}

/// Feeds the same input for `steps` iterations from a zero state and
/// returns the final hidden state.
template <typename T>
typename Tape<T>::Var layer_forward_t(Tape<T>& tape, typename Tape<T>::Var x,
                                      const BoundConvLstm<T>& p,
                                      const ConvSpec& x_spec, i64 steps) {
  if (steps < 1) fail("layer_forward: steps must be >= 1, got ", steps);
  const Shape& xs = tape.value(x).shape();
  const i64 eh = conv_out_dim(xs.h, x_spec.kernel_h, x_spec.stride_h, x_spec.padding);
  const i64 ew = conv_out_dim(xs.w, x_spec.kernel_w, x_spec.stride_w, x_spec.padding);
  auto st = zero_state<T>(xs.n, x_spec.out_channels, eh, ew);
  auto h = tape.input(std::move(st.hidden), false);
  auto c = tape.input(std::move(st.cell), false);
  for (i64 t = 0; t < steps; ++t) {
    auto [h2, c2] = cell_step_t(tape, x, h, c, p, x_spec);
    h = h2;
    c = c2;
  }
  return h;
}

/// Tape-free convenience wrappers.
template <typename T>
ConvLstmState<T> cell_step(const Tensor<T>& x, const ConvLstmState<T>& state,
                           const ConvLstmParams<T>& params) {
  Tape<T> tape;
  auto bound = bind_convlstm(tape, params);
  auto xv = tape.input(x, false);
  auto hv = tape.input(state.hidden, false);
  auto cv = tape.input(state.cell, false);
  auto [h2, c2] = cell_step_t(tape, xv, hv, cv, bound, params.x_spec);
  return {tape.value(h2), tape.value(c2)};
}

template <typename T>
Tensor<T> layer_forward(const Tensor<T>& x, const ConvLstmParams<T>& params,
                        i64 steps) {
  Tape<T> tape;
  auto bound = bind_convlstm(tape, params);
  auto xv = tape.input(x, false);
  auto h = layer_forward_t(tape, xv, bound, params.x_spec, steps);
  return tape.value(h);
}

}  // namespace xrc
