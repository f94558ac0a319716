#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "xrc/autodiff.hpp"
#include "xrc/convlstm.hpp"
#include "xrc/rng.hpp"

using namespace xrc;
using TapeD = Tape<double>;
using VarD = TapeD::Var;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  rng.fill_uniform(t, lo, hi);
  return t;
}

// Central finite differences against the tape gradients, step 1e-5,
// error bound max(1e-8, 1e-4 * magnitude) per coordinate.
void check_gradients(
    const std::vector<Tensor<double>>& inputs,
    const std::function<VarD(TapeD&, const std::vector<VarD>&)>& build,
    i64 max_coords_per_input = -1, std::uint64_t coord_seed = 1) {
  const double h = 1e-5;
  TapeD tape;
  std::vector<VarD> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(tape.input(t));
  const VarD loss = build(tape, vars);
  REQUIRE(tape.value(loss).is_scalar());
  tape.backward(loss);

  auto eval = [&](const std::vector<Tensor<double>>& mod) {
    TapeD t2;
    std::vector<VarD> vs;
    vs.reserve(mod.size());
    for (const auto& t : mod) vs.push_back(t2.input(t));
    return t2.value(build(t2, vs)).scalar();
  };

  Rng coord_rng(coord_seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double> analytic = tape.grad(vars[i]);
    REQUIRE(analytic.shape() == inputs[i].shape());
    std::vector<i64> coords;
    if (max_coords_per_input < 0 || inputs[i].numel() <= max_coords_per_input) {
      for (i64 j = 0; j < inputs[i].numel(); ++j) coords.push_back(j);
    } else {
      for (i64 k = 0; k < max_coords_per_input; ++k) {
        coords.push_back(coord_rng.uniform_int(inputs[i].numel()));
      }
    }
    for (i64 j : coords) {
      std::vector<Tensor<double>> mod = inputs;
      const double orig = mod[i].data()[j];
      mod[i].data()[j] = orig + h;
      const double fp = eval(mod);
      mod[i].data()[j] = orig - h;
      const double fm = eval(mod);
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic.data()[j];
      const double bound =
          std::max(1e-8, 1e-4 * std::max(std::abs(a), std::abs(numeric)));
      INFO("input ", i, " coord ", j, " analytic ", a, " numeric ", numeric);
      CHECK(std::abs(a - numeric) <= bound);
    }
  }
}

// Scalar projection so every output element contributes to the loss.
VarD project(TapeD& tape, VarD x, Rng& rng) {
  Tensor<double> proj(tape.value(x).shape());
  rng.fill_uniform(proj, -0.5, 0.5);
  return tape.sum(tape.mul(x, tape.input(proj, false)));
}

}  // namespace

TEST_CASE("backward: sum gives all-ones gradient") {
  Rng rng(3);
  TapeD tape;
  const auto x = tape.input(random_tensor({2, 3, 2, 2}, rng));
  const auto loss = tape.sum(x);
  tape.backward(loss);
  const auto g = tape.grad(x);
  for (i64 i = 0; i < g.numel(); ++i) CHECK(g.data()[i] == 1.0);
}

TEST_CASE("backward: relu of negative inputs gives zero gradient") {
  Rng rng(5);
  TapeD tape;
  const auto x = tape.input(random_tensor({1, 2, 3, 3}, rng, -2.0, -0.5));
  const auto loss = tape.sum(tape.activation(x, Activation::relu));
  tape.backward(loss);
  const auto g = tape.grad(x);
  for (i64 i = 0; i < g.numel(); ++i) CHECK(g.data()[i] == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  TapeD tape;
  const auto x = tape.input(Tensor<double>({1, 1, 2, 2}, 1.0));
  CHECK_THROWS_WITH_AS(tape.backward(x), doctest::Contains("scalar"), Error);
}

TEST_CASE("unused parameters get zero gradients") {
  Rng rng(7);
  TapeD tape;
  const auto used = tape.input(random_tensor({1, 1, 2, 2}, rng));
  const auto unused = tape.input(random_tensor({1, 1, 3, 3}, rng));
  tape.backward(tape.sum(used));
  const auto g = tape.grad(unused);
  CHECK(g.shape() == Shape{1, 1, 3, 3});
  for (i64 i = 0; i < g.numel(); ++i) CHECK(g.data()[i] == 0.0);
}

TEST_CASE("finite differences: conv2d valid stride 1") {
  Rng rng(11);
  check_gradients(
      {random_tensor({1, 2, 4, 4}, rng), random_tensor({2, 2, 3, 3}, rng),
       random_tensor({1, 2, 1, 1}, rng)},
      [&](TapeD& t, const std::vector<VarD>& v) {
        ConvSpec spec{3, 3, 1, 1, Padding::valid, 2, 2};
        Rng prng(100);
        return project(t, t.conv2d(v[0], v[1], v[2], spec), prng);
      });
}

TEST_CASE("finite differences: conv2d same stride 2") {
  Rng rng(13);
  check_gradients(
      {random_tensor({2, 2, 4, 4}, rng), random_tensor({3, 2, 3, 3}, rng),
       random_tensor({1, 3, 1, 1}, rng)},
      [&](TapeD& t, const std::vector<VarD>& v) {
        ConvSpec spec{3, 3, 2, 2, Padding::same, 2, 3};
        Rng prng(101);
        return project(t, t.conv2d(v[0], v[1], v[2], spec), prng);
      });
}

TEST_CASE("finite differences: conv2d 2x2 kernel asymmetric same padding") {
  Rng rng(17);
  check_gradients(
      {random_tensor({1, 2, 3, 3}, rng), random_tensor({2, 2, 2, 2}, rng)},
      [&](TapeD& t, const std::vector<VarD>& v) {
        ConvSpec spec{2, 2, 1, 1, Padding::same, 2, 2};
        Rng prng(102);
        return project(t, t.conv2d(v[0], v[1], VarD{}, spec), prng);
      });
}

TEST_CASE("finite differences: maxpool2x2") {
  // Well-separated values keep the argmax stable under the step.
  Rng rng(19);
  Tensor<double> x({1, 2, 4, 4});
  for (i64 i = 0; i < x.numel(); ++i) {
    x.data()[i] = static_cast<double>(i % 9) * 0.11 + rng.uniform(0.0, 0.01);
  }
  check_gradients({x}, [&](TapeD& t, const std::vector<VarD>& v) {
    Rng prng(103);
    return project(t, t.maxpool2x2(v[0]), prng);
  });
}

TEST_CASE("finite differences: depth_to_space and space_to_depth") {
  Rng rng(23);
  check_gradients({random_tensor({1, 4, 2, 2}, rng)},
                  [&](TapeD& t, const std::vector<VarD>& v) {
                    Rng prng(104);
                    return project(t, t.depth_to_space(v[0], 2), prng);
                  });
  check_gradients({random_tensor({1, 1, 4, 4}, rng)},
                  [&](TapeD& t, const std::vector<VarD>& v) {
                    Rng prng(105);
                    return project(t, t.space_to_depth(v[0], 2), prng);
                  });
}

TEST_CASE("finite differences: activations") {
  Rng rng(29);
  for (Activation kind : {Activation::sigmoid, Activation::tanh}) {
    check_gradients({random_tensor({1, 2, 3, 3}, rng, -2.0, 2.0)},
                    [&, kind](TapeD& t, const std::vector<VarD>& v) {
                      Rng prng(106);
                      return project(t, t.activation(v[0], kind), prng);
                    });
  }
  // Keep relu inputs away from the kink at zero.
  Tensor<double> x({1, 2, 3, 3});
  for (i64 i = 0; i < x.numel(); ++i) {
    x.data()[i] = (i % 2 == 0 ? 1.0 : -1.0) * rng.uniform(0.2, 1.5);
  }
  check_gradients({x}, [&](TapeD& t, const std::vector<VarD>& v) {
    Rng prng(107);
    return project(t, t.activation(v[0], Activation::relu), prng);
  });
}

TEST_CASE("finite differences: combine, mul, clamp, L1") {
  Rng rng(31);
  for (Combine kind : {Combine::add, Combine::average}) {
    check_gradients(
        {random_tensor({1, 2, 2, 2}, rng), random_tensor({1, 2, 2, 2}, rng)},
        [&, kind](TapeD& t, const std::vector<VarD>& v) {
          Rng prng(108);
          return project(t, t.combine(v[0], v[1], kind), prng);
        });
  }
  check_gradients(
      {random_tensor({1, 2, 2, 2}, rng), random_tensor({1, 2, 2, 2}, rng)},
      [&](TapeD& t, const std::vector<VarD>& v) {
        Rng prng(109);
        return project(t, t.mul(v[0], v[1]), prng);
      });
  // Interior of [0,1] only; the clamp boundary is not differentiable.
  check_gradients({random_tensor({1, 2, 3, 3}, rng, 0.05, 0.95)},
                  [&](TapeD& t, const std::vector<VarD>& v) {
                    Rng prng(110);
                    return project(t, t.clamp01(v[0]), prng);
                  });
  // Pairs with well-separated values avoid the |.| kink.
  Tensor<double> a = random_tensor({1, 2, 3, 3}, rng, 0.5, 1.0);
  Tensor<double> b = random_tensor({1, 2, 3, 3}, rng, -1.0, -0.5);
  check_gradients({a, b}, [&](TapeD& t, const std::vector<VarD>& v) {
    return t.mean_abs_diff(v[0], v[1]);
  });
}

TEST_CASE("clamp01 blocks gradient outside [0, 1]") {
  TapeD tape;
  Tensor<double> x({1, 1, 1, 4}, {-0.5, 0.5, 1.5, 0.0});
  const auto v = tape.input(x);
  tape.backward(tape.sum(tape.clamp01(v)));
  const auto g = tape.grad(v);
  CHECK(g.data()[0] == 0.0);
  CHECK(g.data()[1] == 1.0);
  CHECK(g.data()[2] == 0.0);
  CHECK(g.data()[3] == 1.0);  // boundary passes through
}

TEST_CASE("finite differences: ConvLSTM layer with two steps") {
  Rng rng(37);
  ConvLstmParams<double> params =
      make_convlstm<double>(rng, 2, 2, 3, 2, Padding::same);
  std::vector<Tensor<double>> inputs;
  inputs.push_back(random_tensor({1, 2, 4, 4}, rng));
  visit_params(params, "p", [&](const std::string&, Tensor<double>& t) {
    inputs.push_back(t);
  });
  check_gradients(
      inputs,
      [&](TapeD& t, const std::vector<VarD>& v) {
        // Vars v[1..] carry the gate tensors in visit order.
        BoundConvLstm<double> bound;
        std::size_t k = 1;
        auto next = [&] { return v[k++]; };
        for (BoundGate<double>* g :
             {&bound.input, &bound.forget, &bound.output, &bound.cand}) {
          g->wx = next();
          g->wh = next();
          g->b = next();
        }
        Rng prng(111);
        return project(t, layer_forward_t(t, v[0], bound, params.x_spec, 2), prng);
      },
      6, 999);
}

TEST_CASE("gradient accumulation: variable used twice") {
  Rng rng(41);
  check_gradients({random_tensor({1, 1, 2, 2}, rng)},
                  [&](TapeD& t, const std::vector<VarD>& v) {
                    // x * x summed: d/dx = 2x
                    return t.sum(t.mul(v[0], v[0]));
                  });
}

TEST_CASE("backward is repeatable and deterministic") {
  Rng rng(43);
  const auto x = random_tensor({1, 2, 4, 4}, rng);
  const auto w = random_tensor({2, 2, 3, 3}, rng);
  auto run = [&] {
    TapeD tape;
    const auto xv = tape.input(x);
    const auto wv = tape.input(w);
    ConvSpec spec{3, 3, 1, 1, Padding::same, 2, 2};
    const auto loss = tape.sum(tape.conv2d(xv, wv, VarD{}, spec));
    tape.backward(loss);
    return tape.grad(wv).vec();
  };
  CHECK(run() == run());
}
