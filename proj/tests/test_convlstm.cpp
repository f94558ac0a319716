#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "xrc/convlstm.hpp"
#include "xrc/rng.hpp"

using namespace xrc;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  rng.fill_uniform(t, lo, hi);
  return t;
}

void zero_params(ConvLstmParams<double>& p) {
  visit_params(p, "z", [](const std::string&, Tensor<double>& t) {
    std::fill(t.vec().begin(), t.vec().end(), 0.0);
  });
}

// Plain scalar LSTM over channel vectors; the independent reference for
// the 1x1-spatial / 1x1-kernel case where convolution degenerates to a
// dense product.
struct ScalarLstmRef {
  // weights indexed [hidden][in] and [hidden][hidden]
  std::vector<std::vector<double>> wxi, wxf, wxo, wxg;
  std::vector<std::vector<double>> whi, whf, who, whg;
  std::vector<double> bi, bf, bo, bg;

  static double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  void step(const std::vector<double>& x, std::vector<double>& h,
            std::vector<double>& c) const {
    const std::size_t hid = bi.size();
    std::vector<double> h2(hid), c2(hid);
    for (std::size_t k = 0; k < hid; ++k) {
      auto pre = [&](const std::vector<std::vector<double>>& wx,
                     const std::vector<std::vector<double>>& wh, double b) {
        double acc = b;
        for (std::size_t j = 0; j < x.size(); ++j) acc += wx[k][j] * x[j];
        for (std::size_t j = 0; j < h.size(); ++j) acc += wh[k][j] * h[j];
        return acc;
      };
      const double gi = sig(pre(wxi, whi, bi[k]));
      const double gf = sig(pre(wxf, whf, bf[k]));
      const double go = sig(pre(wxo, who, bo[k]));
      const double gg = std::tanh(pre(wxg, whg, bg[k]));
      c2[k] = gf * c[k] + gi * gg;
      h2[k] = go * std::tanh(c2[k]);
    }
    h = h2;
    c = c2;
  }
};

ScalarLstmRef to_scalar_ref(const ConvLstmParams<double>& p) {
  const i64 hid = p.hidden_channels();
  const i64 in = p.x_spec.in_channels;
  ScalarLstmRef ref;
  auto mat = [&](const Tensor<double>& w, i64 cols) {
    std::vector<std::vector<double>> m(static_cast<std::size_t>(hid));
    for (i64 k = 0; k < hid; ++k) {
      m[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(cols));
      for (i64 j = 0; j < cols; ++j) {
        m[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = w.at(k, j, 0, 0);
      }
    }
    return m;
  };
  auto vec = [&](const Tensor<double>& b) {
    std::vector<double> v(static_cast<std::size_t>(hid));
    for (i64 k = 0; k < hid; ++k) v[static_cast<std::size_t>(k)] = b.at(0, k, 0, 0);
    return v;
  };
  ref.wxi = mat(p.input.wx, in);
  ref.whi = mat(p.input.wh, hid);
  ref.bi = vec(p.input.b);
  ref.wxf = mat(p.forget.wx, in);
  ref.whf = mat(p.forget.wh, hid);
  ref.bf = vec(p.forget.b);
  ref.wxo = mat(p.output.wx, in);
  ref.who = mat(p.output.wh, hid);
  ref.bo = vec(p.output.b);
  ref.wxg = mat(p.cand.wx, in);
  ref.whg = mat(p.cand.wh, hid);
  ref.bg = vec(p.cand.b);
  return ref;
}

}  // namespace

TEST_CASE("cell_step: all-zero parameters and state give zero outputs") {
  Rng rng(3);
  auto params = make_convlstm<double>(rng, 2, 3, 3, 2, Padding::same);
  zero_params(params);
  const auto x = random_tensor({1, 2, 4, 4}, rng);
  const auto st = zero_state<double>(1, 3, 2, 2);
  const auto out = cell_step(x, st, params);
  for (i64 i = 0; i < out.hidden.numel(); ++i) {
    CHECK(out.hidden.data()[i] == 0.0);
    CHECK(out.cell.data()[i] == 0.0);
  }
}

TEST_CASE("cell_step: zero weights halve the carried cell") {
  // With zero weights and biases all gates sit at sigma(0) = 0.5 and the
  // candidate at tanh(0) = 0, so c' = 0.5 c and h' = 0.5 tanh(0.5 c).
  Rng rng(5);
  auto params = make_convlstm<double>(rng, 2, 3, 3, 1, Padding::same);
  zero_params(params);
  const auto x = random_tensor({1, 2, 4, 4}, rng);
  ConvLstmState<double> st = zero_state<double>(1, 3, 4, 4);
  st.cell = random_tensor(st.cell.shape(), rng);
  const auto out = cell_step(x, st, params);
  for (i64 i = 0; i < out.cell.numel(); ++i) {
    const double c = st.cell.data()[i];
    CHECK(out.cell.data()[i] == doctest::Approx(0.5 * c).epsilon(1e-12));
    CHECK(out.hidden.data()[i] ==
          doctest::Approx(0.5 * std::tanh(0.5 * c)).epsilon(1e-12));
  }
}

TEST_CASE("cell_step matches an independent scalar LSTM at 1x1") {
  Rng rng(7);
  for (int draw = 0; draw < 50; ++draw) {
    const i64 in = 1 + rng.uniform_int(4);
    const i64 hid = 1 + rng.uniform_int(4);
    auto params = make_convlstm<double>(rng, in, hid, 1, 1, Padding::valid);
    visit_params(params, "p", [&](const std::string&, Tensor<double>& t) {
      rng.fill_uniform(t, -1.5, 1.5);
    });
    const auto x = random_tensor({1, in, 1, 1}, rng, -2.0, 2.0);
    ConvLstmState<double> st = zero_state<double>(1, hid, 1, 1);
    st.hidden = random_tensor(st.hidden.shape(), rng);
    st.cell = random_tensor(st.cell.shape(), rng);

    const ScalarLstmRef ref = to_scalar_ref(params);
    std::vector<double> xs(static_cast<std::size_t>(in));
    for (i64 j = 0; j < in; ++j) xs[static_cast<std::size_t>(j)] = x.at(0, j, 0, 0);
    std::vector<double> h(static_cast<std::size_t>(hid)), c(static_cast<std::size_t>(hid));
    for (i64 k = 0; k < hid; ++k) {
      h[static_cast<std::size_t>(k)] = st.hidden.at(0, k, 0, 0);
      c[static_cast<std::size_t>(k)] = st.cell.at(0, k, 0, 0);
    }
    ref.step(xs, h, c);

    const auto out = cell_step(x, st, params);
    for (i64 k = 0; k < hid; ++k) {
      CHECK(std::abs(out.hidden.at(0, k, 0, 0) - h[static_cast<std::size_t>(k)]) <= 1e-12);
      CHECK(std::abs(out.cell.at(0, k, 0, 0) - c[static_cast<std::size_t>(k)]) <= 1e-12);
    }
  }
}

TEST_CASE("cell_step validates state geometry") {
  Rng rng(11);
  auto params = make_convlstm<double>(rng, 2, 3, 3, 2, Padding::same);
  const auto x = random_tensor({1, 2, 4, 4}, rng);
  const auto bad = zero_state<double>(1, 3, 4, 4);  // stride-2 output is 2x2
  CHECK_THROWS_WITH_AS(cell_step(x, bad, params), doctest::Contains("state"),
                       Error);
}

TEST_CASE("layer_forward: T=1 equals a single step from zero state") {
  Rng rng(13);
  auto params = make_convlstm<double>(rng, 2, 4, 3, 2, Padding::same);
  const auto x = random_tensor({2, 2, 6, 6}, rng);
  const auto one = layer_forward(x, params, 1);
  const auto manual = cell_step(x, zero_state<double>(2, 4, 3, 3), params);
  CHECK(one.vec() == manual.hidden.vec());
}

TEST_CASE("layer_forward: zero parameters give zero output for any T") {
  Rng rng(17);
  auto params = make_convlstm<double>(rng, 1, 2, 3, 2, Padding::same);
  zero_params(params);
  const auto x = random_tensor({1, 1, 4, 4}, rng);
  for (i64 steps : {1, 2, 5}) {
    const auto y = layer_forward(x, params, steps);
    for (i64 i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0);
  }
}

TEST_CASE("layer_forward: T=3 equals three chained cell_steps bit-exactly") {
  Rng rng(19);
  auto params = make_convlstm<double>(rng, 3, 2, 3, 2, Padding::same);
  const auto x = random_tensor({1, 3, 4, 4}, rng);
  ConvLstmState<double> st = zero_state<double>(1, 2, 2, 2);
  st = cell_step(x, st, params);
  st = cell_step(x, st, params);
  st = cell_step(x, st, params);
  const auto y = layer_forward(x, params, 3);
  CHECK(y.vec() == st.hidden.vec());
}

TEST_CASE("layer_forward rejects T=0") {
  Rng rng(23);
  auto params = make_convlstm<double>(rng, 1, 1, 3, 1, Padding::same);
  const auto x = random_tensor({1, 1, 4, 4}, rng);
  CHECK_THROWS_WITH_AS(layer_forward(x, params, 0),
                       doctest::Contains("steps"), Error);
}

TEST_CASE("gate activations stay inside their open intervals") {
  Rng rng(29);
  auto params = make_convlstm<double>(rng, 2, 3, 3, 1, Padding::same);
  const auto x = random_tensor({1, 2, 4, 4}, rng, -3.0, 3.0);
  const auto h = random_tensor({1, 3, 4, 4}, rng, -1.0, 1.0);
  auto gate = [&](const GateParams<double>& g, Activation act) {
    ConvSpec hspec = params.h_spec();
    auto pre = elementwise_combine(conv2d(x, g.wx, &g.b, params.x_spec),
                                   conv2d(h, g.wh, hspec), Combine::add);
    return activation(pre, act);
  };
  for (const GateParams<double>* g :
       {&params.input, &params.forget, &params.output}) {
    const auto v = gate(*g, Activation::sigmoid);
    for (i64 i = 0; i < v.numel(); ++i) {
      CHECK(v.data()[i] > 0.0);
      CHECK(v.data()[i] < 1.0);
    }
  }
  const auto cand = gate(params.cand, Activation::tanh);
  for (i64 i = 0; i < cand.numel(); ++i) {
    CHECK(cand.data()[i] > -1.0);
    CHECK(cand.data()[i] < 1.0);
  }
}

TEST_CASE("state shape is stable across repeated steps") {
  Rng rng(31);
  auto params = make_convlstm<double>(rng, 2, 3, 3, 2, Padding::same);
  const auto x = random_tensor({1, 2, 7, 5}, rng);
  // ceil(7/2) = 4, ceil(5/2) = 3
  ConvLstmState<double> st = zero_state<double>(1, 3, 4, 3);
  for (int i = 0; i < 4; ++i) {
    st = cell_step(x, st, params);
    CHECK(st.hidden.shape() == Shape{1, 3, 4, 3});
    CHECK(st.cell.shape() == Shape{1, 3, 4, 3});
  }
}

TEST_CASE("forget gate bias initializes to one, other biases to zero") {
  Rng rng(37);
  const auto params = make_convlstm<double>(rng, 2, 3, 3, 1, Padding::same);
  for (i64 k = 0; k < 3; ++k) {
    CHECK(params.forget.b.at(0, k, 0, 0) == 1.0);
    CHECK(params.input.b.at(0, k, 0, 0) == 0.0);
    CHECK(params.output.b.at(0, k, 0, 0) == 0.0);
    CHECK(params.cand.b.at(0, k, 0, 0) == 0.0);
  }
}
