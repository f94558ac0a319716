#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "xrc/codec.hpp"
#include "xrc/rng.hpp"

using namespace xrc;
using TapeD = Tape<double>;
using VarD = TapeD::Var;

namespace {

Tensor<double> random_tensor(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor<double> t(s);
  rng.fill_uniform(t, lo, hi);
  return t;
}

CodecConfig tiny_config(i64 n = 16) {
  CodecConfig cfg;
  cfg.patch_size = n;
  cfg.beta = 4;
  cfg.front_width = 2;
  cfg.rnn_widths = {2, 2, 2};
  cfg.decoder_width = 256;
  cfg.steps = 1;
  return cfg;
}

}  // namespace

TEST_CASE("config validation catches each invariant") {
  CodecConfig cfg = CodecConfig::desk();
  CHECK_NOTHROW(cfg.validate());
  CodecConfig bad = cfg;
  bad.patch_size = 40;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("multiple of 16"), Error);
  bad = cfg;
  bad.beta = 0;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("beta"), Error);
  bad = cfg;
  bad.beta = 300;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.decoder_width = 128;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("decoder_width"), Error);
  bad = cfg;
  bad.quantizer_bits = 17;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("quantizer_bits"), Error);
  bad = cfg;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("build_model is deterministic per seed") {
  const CodecConfig cfg = tiny_config();
  auto a = build_model<double>(cfg, 42);
  auto b = build_model<double>(cfg, 42);
  auto c = build_model<double>(cfg, 43);
  bool all_equal = true;
  bool any_diff_seed = false;
  std::vector<Tensor<double>*> bs, cs;
  b.visit([&](const std::string&, Tensor<double>& t) { bs.push_back(&t); });
  c.visit([&](const std::string&, Tensor<double>& t) { cs.push_back(&t); });
  std::size_t i = 0;
  a.visit([&](const std::string&, Tensor<double>& t) {
    if (t.vec() != bs[i]->vec()) all_equal = false;
    if (t.vec() != cs[i]->vec()) any_diff_seed = true;
    ++i;
  });
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("decoder channel flow matches 512 -> 128 -> 32 -> 8 -> 2 -> 1") {
  CodecConfig cfg = tiny_config();
  cfg.decoder_width = 512;
  const auto params = build_model<double>(cfg, 1);
  CHECK(params.dec_mods[0].branch_a.x_spec.in_channels == 512);
  CHECK(params.dec_mods[1].branch_a.x_spec.in_channels == 128);
  CHECK(params.dec_mods[2].branch_a.x_spec.in_channels == 32);
  CHECK(params.dec_mods[3].branch_a.x_spec.in_channels == 8);
  CHECK(params.dec_out.spec.in_channels == 2);
  CHECK(params.dec_out.spec.out_channels == 1);
}

TEST_CASE("bound vars follow the parameter visit order") {
  const CodecConfig cfg = tiny_config();
  auto params = build_model<double>(cfg, 9);
  TapeD tape;
  const auto bound = bind_codec(tape, params);
  std::vector<const Tensor<double>*> tensors;
  params.visit([&](const std::string&, Tensor<double>& t) { tensors.push_back(&t); });
  REQUIRE(bound.flat.size() == tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(tape.value(bound.flat[i]).vec() == tensors[i]->vec());
  }
}

TEST_CASE("encode produces (b, beta, N/16, N/16) latents") {
  Rng rng(3);
  SUBCASE("N=128 desk profile") {
    CodecConfig cfg = CodecConfig::desk(128, 32);
    const auto params = build_model<double>(cfg, 5);
    const auto latent = encode(random_tensor({1, 1, 128, 128}, rng), params, cfg);
    CHECK(latent.shape() == Shape{1, 32, 8, 8});
  }
  SUBCASE("N=256 beta=128 gives P=Q=16") {
    CodecConfig cfg = tiny_config(256);
    cfg.beta = 128;
    const auto params = build_model<double>(cfg, 5);
    const auto latent = encode(random_tensor({1, 1, 256, 256}, rng), params, cfg);
    CHECK(latent.shape() == Shape{1, 128, 16, 16});
  }
}

TEST_CASE("encode validates input dims") {
  const CodecConfig cfg = tiny_config();
  const auto params = build_model<double>(cfg, 7);
  Rng rng(5);
  CHECK_THROWS_WITH_AS(encode(random_tensor({1, 1, 32, 16}, rng), params, cfg),
                       doctest::Contains("input shape"), Error);
  CHECK_THROWS_AS(encode(random_tensor({1, 2, 16, 16}, rng), params, cfg), Error);
}

TEST_CASE("batch encode equals per-image encode") {
  const CodecConfig cfg = tiny_config();
  const auto params = build_model<double>(cfg, 11);
  Rng rng(7);
  const auto a = random_tensor({1, 1, 16, 16}, rng);
  const auto b = random_tensor({1, 1, 16, 16}, rng);
  Tensor<double> batch({2, 1, 16, 16});
  std::copy(a.vec().begin(), a.vec().end(), batch.data());
  std::copy(b.vec().begin(), b.vec().end(), batch.data() + 256);
  const auto lb = encode(batch, params, cfg);
  const auto la = encode(a, params, cfg);
  const auto lb1 = encode(b, params, cfg);
  REQUIRE(lb.shape() == Shape{2, 4, 1, 1});
  for (i64 i = 0; i < la.numel(); ++i) {
    CHECK(lb.data()[i] == la.data()[i]);
    CHECK(lb.data()[la.numel() + i] == lb1.data()[i]);
  }
}

TEST_CASE("decode restores N x N and clamps to [0, 1]") {
  Rng rng(11);
  for (i64 n : {32, 64}) {
    CodecConfig cfg = tiny_config(n);
    const auto params = build_model<double>(cfg, 13);
    const auto latent = random_tensor({1, cfg.beta, n / 16, n / 16}, rng, -2.0, 2.0);
    const auto img = decode(latent, params, cfg);
    CHECK(img.shape() == Shape{1, 1, n, n});
    for (i64 i = 0; i < img.numel(); ++i) {
      CHECK(img.data()[i] >= 0.0);
      CHECK(img.data()[i] <= 1.0);
    }
  }
}

TEST_CASE("decode with zero decoder parameters gives a zero image") {
  const CodecConfig cfg = tiny_config();
  auto params = build_model<double>(cfg, 17);
  auto zero_lstm = [](ConvLstmParams<double>& p) {
    visit_params(p, "z", [](const std::string&, Tensor<double>& t) {
      std::fill(t.vec().begin(), t.vec().end(), 0.0);
    });
  };
  std::fill(params.dec_expand.w.vec().begin(), params.dec_expand.w.vec().end(), 0.0);
  std::fill(params.dec_expand.b.vec().begin(), params.dec_expand.b.vec().end(), 0.0);
  std::fill(params.dec_out.w.vec().begin(), params.dec_out.w.vec().end(), 0.0);
  std::fill(params.dec_out.b.vec().begin(), params.dec_out.b.vec().end(), 0.0);
  for (auto& mod : params.dec_mods) {
    zero_lstm(mod.branch_a);
    zero_lstm(mod.branch_b);
  }
  const auto latent = zeros<double>({1, cfg.beta, 1, 1});
  const auto img = decode(latent, params, cfg);
  for (i64 i = 0; i < img.numel(); ++i) CHECK(img.data()[i] == 0.0);
}

TEST_CASE("decode validates latent dims") {
  const CodecConfig cfg = tiny_config();
  const auto params = build_model<double>(cfg, 19);
  Rng rng(13);
  CHECK_THROWS_WITH_AS(
      decode(random_tensor({1, 3, 1, 1}, rng), params, cfg),
      doctest::Contains("latent shape"), Error);
}

TEST_CASE("round trip decode(encode(x)) keeps the input shape") {
  Rng rng(17);
  for (i64 n : {32, 64}) {
    const CodecConfig cfg = tiny_config(n);
    const auto params = build_model<double>(cfg, 23);
    const auto x = random_tensor({1, 1, n, n}, rng);
    const auto y = decode(encode(x, params, cfg), params, cfg);
    CHECK(y.shape() == x.shape());
  }
}

TEST_CASE("full pipeline is deterministic at inference") {
  const CodecConfig cfg = tiny_config(32);
  const auto params = build_model<double>(cfg, 29);
  Rng rng(19);
  const auto x = random_tensor({1, 1, 32, 32}, rng);
  const auto y1 = decode(encode(x, params, cfg), params, cfg);
  const auto y2 = decode(encode(x, params, cfg), params, cfg);
  CHECK(y1.vec() == y2.vec());
}

TEST_CASE("compression_ratio follows 256/beta at 8 bits") {
  CodecConfig cfg = CodecConfig::desk(128, 32);
  CHECK(compression_ratio(cfg) == 8.0);
  cfg.beta = 256;
  CHECK(compression_ratio(cfg) == 1.0);
  cfg.beta = 64;
  CHECK(compression_ratio(cfg) == 4.0);
  cfg.beta = 128;
  CHECK(compression_ratio(cfg) == 2.0);
}

TEST_CASE("quantize: endpoints, degenerate tensors, and error bound") {
  SUBCASE("endpoints map to 0 and 255") {
    Tensor<double> x({1, 1, 1, 4}, {0.0, 1.0, 0.25, 0.75});
    const auto q = quantize(x, 8);
    CHECK(q.codes[0] == 0);
    CHECK(q.codes[1] == 255);
    CHECK(q.q_min == 0.0);
  }
  SUBCASE("constant tensor round-trips exactly") {
    Tensor<double> x({1, 2, 3, 3}, 0.7);
    const auto q = quantize(x, 8);
    CHECK(q.q_scale == 1.0);
    for (auto c : q.codes) CHECK(c == 0);
    const auto back = dequantize<double>(q);
    for (i64 i = 0; i < back.numel(); ++i) CHECK(back.data()[i] == 0.7);
  }
  SUBCASE("reconstruction error is at most half a step") {
    Rng rng(23);
    for (int bits : {1, 4, 8, 12, 16}) {
      Tensor<double> x({1, 3, 4, 4});
      rng.fill_uniform(x, -3.0, 5.0);
      const auto q = quantize(x, bits);
      const auto back = dequantize<double>(q);
      for (i64 i = 0; i < x.numel(); ++i) {
        CHECK(std::abs(back.data()[i] - x.data()[i]) <=
              q.q_scale / 2.0 * (1.0 + 1e-9));
      }
    }
  }
  SUBCASE("bits outside [1, 16] are rejected") {
    Tensor<double> x({1, 1, 1, 1}, 0.5);
    CHECK_THROWS_AS(quantize(x, 0), Error);
    CHECK_THROWS_AS(quantize(x, 17), Error);
  }
}

TEST_CASE("packed 8-bit latent payload is exactly N^2 beta / 256 bytes") {
  Rng rng(29);
  for (i64 n : {32, 256}) {
    for (i64 beta : {32, 64, 128}) {
      Tensor<double> latent({1, beta, n / 16, n / 16});
      rng.fill_uniform(latent, 0.0, 1.0);
      const auto q = quantize(latent, 8);
      CHECK(static_cast<i64>(pack_codes(q).size()) == n * n * beta / 256);
    }
  }
}

TEST_CASE("pack/unpack round-trips both byte widths") {
  Rng rng(31);
  for (int bits : {8, 12}) {
    Tensor<double> x({1, 2, 2, 2});
    rng.fill_uniform(x, 0.0, 1.0);
    auto q = quantize(x, bits);
    const auto bytes = pack_codes(q);
    QuantizedLatent q2;
    q2.shape = q.shape;
    q2.bits = q.bits;
    q2.q_min = q.q_min;
    q2.q_scale = q.q_scale;
    unpack_codes(bytes, q2);
    CHECK(q2.codes == q.codes);
  }
}

TEST_CASE("end-to-end gradient through decode(encode(x)) on a 16x16 input") {
  const CodecConfig cfg = tiny_config(16);
  auto params = build_model<double>(cfg, 31);
  // Shift the bottleneck and output layers into the interior of their
  // activation ranges so the finite-difference step stays away from the
  // relu/clamp kinks at this random-parameter point.
  std::fill(params.bottleneck.b.vec().begin(), params.bottleneck.b.vec().end(), 0.5);
  std::fill(params.dec_out.b.vec().begin(), params.dec_out.b.vec().end(), 0.5);
  Rng rng(37);
  const auto x = random_tensor({1, 1, 16, 16}, rng, 0.1, 0.9);
  const auto target = random_tensor({1, 1, 16, 16}, rng, 0.1, 0.9);

  TapeD tape;
  const auto bound = bind_codec(tape, params);
  const auto xv = tape.input(x, false);
  const auto tv = tape.input(target, false);
  const auto latent = encode_t(tape, xv, bound, params, cfg);
  const auto recon = decode_t(tape, latent, bound, params, cfg, true);
  const auto loss = tape.mean_abs_diff(recon, tv);
  tape.backward(loss);

  // Spot-check a few parameter coordinates against central differences.
  std::vector<Tensor<double>*> tensors;
  params.visit([&](const std::string&, Tensor<double>& t) { tensors.push_back(&t); });
  auto eval_loss = [&] {
    TapeD t2;
    const auto b2 = bind_codec(t2, params);
    const auto x2 = t2.input(x, false);
    const auto t2v = t2.input(target, false);
    const auto l2 = encode_t(t2, x2, b2, params, cfg);
    const auto r2 = decode_t(t2, l2, b2, params, cfg, true);
    return t2.value(t2.mean_abs_diff(r2, t2v)).scalar();
  };
  Rng pick(41);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t pi = static_cast<std::size_t>(
        pick.uniform_int(static_cast<i64>(tensors.size())));
    Tensor<double>& t = *tensors[pi];
    const i64 ci = pick.uniform_int(t.numel());
    const double orig = t.data()[ci];
    t.data()[ci] = orig + h;
    const double fp = eval_loss();
    t.data()[ci] = orig - h;
    const double fm = eval_loss();
    t.data()[ci] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = tape.grad(bound.flat[pi]).data()[ci];
    const double bound_tol =
        std::max(1e-8, 1e-4 * std::max(std::abs(analytic), std::abs(numeric)));
    INFO("param ", pi, " coord ", ci);
    CHECK(std::abs(analytic - numeric) <= bound_tol);
    ++checked;
  }
  CHECK(checked == 12);
}

TEST_CASE("float model runs the same pipeline") {
  CodecConfig cfg = tiny_config(16);
  const auto params = build_model<float>(cfg, 43);
  Rng rng(43);
  Tensor<float> x({1, 1, 16, 16});
  rng.fill_uniform(x, 0.0, 1.0);
  const auto latent = encode(x, params, cfg);
  CHECK(latent.shape() == Shape{1, 4, 1, 1});
  const auto out = decode(latent, params, cfg);
  CHECK(out.shape() == Shape{1, 1, 16, 16});
  CHECK(out.dtype == Dtype::f32);
}
