#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xrc/autodiff.hpp"
#include "xrc/convlstm.hpp"
#include "xrc/ops.hpp"
#include "xrc/rng.hpp"
#include "xrc/tensor.hpp"

namespace xrc {

/// Architecture hyperparameters. The encoder halves each spatial dim four
/// times (front stage + three strided recurrent layers), so patches are
/// N x N with N divisible by 16 and the latent is beta x N/16 x N/16.
struct CodecConfig {
  i64 patch_size = 64;                      // N
  i64 beta = 32;                            // latent channels
  i64 front_width = 8;                      // channels after branch averaging
  std::array<i64, 3> rnn_widths{16, 16, 16};
  i64 decoder_width = 256;                  // channels entering the deconv stack
  i64 steps = 2;                            // recurrence steps T
  i64 quantizer_bits = 8;

  void validate() const {
    if (patch_size < 16 || patch_size % 16 != 0) {
      fail("config: patch_size must be a positive multiple of 16, got ",
           patch_size);
    }
    if (beta < 1 || beta > 256) {
      fail("config: beta must be in [1, 256], got ", beta);
    }
    if (front_width < 1) fail("config: front_width must be >= 1, got ", front_width);
    for (i64 wdt : rnn_widths) {
      if (wdt < 1) fail("config: rnn widths must be >= 1, got ", wdt);
    }
    if (decoder_width < 256 || decoder_width % 256 != 0) {
      fail("config: decoder_width must be a positive multiple of 256, got ",
           decoder_width);
    }
    if (steps < 1) fail("config: steps must be >= 1, got ", steps);
    if (quantizer_bits < 1 || quantizer_bits > 16) {
      fail("config: quantizer_bits must be in [1, 16], got ", quantizer_bits);
    }
  }

  i64 latent_dim() const { return patch_size / 16; }

  /// Small profile for CPU-scale runs.
  static CodecConfig desk(i64 n = 64, i64 beta_ = 32) {
    CodecConfig c;
    c.patch_size = n;
    c.beta = beta_;
    return c;
  }

  /// Full-scale profile (widths chosen for quality, not parameter parity
  /// with any particular published model).
  static CodecConfig full_scale(i64 n = 128, i64 beta_ = 32) {
    CodecConfig c;
    c.patch_size = n;
    c.beta = beta_;
    c.front_width = 64;
    c.rnn_widths = {128, 256, 512};
    c.decoder_width = 512;
    return c;
  }
};

/// Stored-bits ratio of an 8-bit source image to its quantized latent:
/// N^2 * 8 / ((N/16)^2 * beta * bits), i.e. 256/beta at 8 quantizer bits.
/// Headers and the entropy stage are excluded.
inline double compression_ratio(const CodecConfig& c) {
  return 2048.0 / (static_cast<double>(c.beta) *
                   static_cast<double>(c.quantizer_bits));
}

template <typename T>
struct ConvLayer {
  Tensor<T> w;
  Tensor<T> b;
  ConvSpec spec;
};

template <typename T>
struct DeconvModule {
  ConvLstmParams<T> branch_a;
  ConvLstmParams<T> branch_b;
};

template <typename T>
struct CodecParams {
  ConvLayer<T> front_strided;   // 3x3 stride 2 same, 1 -> front_width
  ConvLayer<T> front_pooled;    // 1x1 after 2x2 maxpool, 1 -> front_width
  std::array<ConvLstmParams<T>, 3> enc_rnn;  // 3x3 stride 2 same
  ConvLayer<T> bottleneck;      // 1x1 -> beta
  ConvLayer<T> dec_expand;      // 1x1 -> decoder_width
  std::array<DeconvModule<T>, 4> dec_mods;   // 2x2 stride 1 same, paired
  ConvLayer<T> dec_out;         // 1x1 -> 1

  i64 parameter_count() {
    i64 n = 0;
    visit([&](const std::string&, Tensor<T>& t) { n += t.numel(); });
    return n;
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<CodecParams<T>*>(this)->visit(
        [&](const std::string& n, Tensor<T>& t) {
          f(n, static_cast<const Tensor<T>&>(t));
        });
  }

  /// Fixed declaration order; checkpoint layout and optimizer state both
  /// follow it.
  template <typename F>
  void visit(F&& f) {
    f(std::string("front_strided.w"), front_strided.w);
    f(std::string("front_strided.b"), front_strided.b);
    f(std::string("front_pooled.w"), front_pooled.w);
    f(std::string("front_pooled.b"), front_pooled.b);
    for (std::size_t i = 0; i < enc_rnn.size(); ++i) {
      visit_params(enc_rnn[i], "enc_rnn" + std::to_string(i), f);
    }
    f(std::string("bottleneck.w"), bottleneck.w);
    f(std::string("bottleneck.b"), bottleneck.b);
    f(std::string("dec_expand.w"), dec_expand.w);
    f(std::string("dec_expand.b"), dec_expand.b);
    for (std::size_t i = 0; i < dec_mods.size(); ++i) {
      visit_params(dec_mods[i].branch_a, "dec_mod" + std::to_string(i) + ".a", f);
      visit_params(dec_mods[i].branch_b, "dec_mod" + std::to_string(i) + ".b", f);
    }
    f(std::string("dec_out.w"), dec_out.w);
    f(std::string("dec_out.b"), dec_out.b);
  }
};

namespace detail {

template <typename T>
ConvLayer<T> make_conv(Rng& rng, i64 in_ch, i64 out_ch, i64 kernel, i64 stride,
                       Padding padding) {
  ConvLayer<T> layer;
  layer.spec = ConvSpec{kernel, kernel, stride, stride, padding, in_ch, out_ch};
  layer.w = Tensor<T>({out_ch, in_ch, kernel, kernel});
  layer.b = zeros<T>({1, out_ch, 1, 1});
  const double bound = std::sqrt(1.0 / static_cast<double>(in_ch * kernel * kernel));
  rng.fill_uniform(layer.w, -bound, bound);
  return layer;
}

}  // namespace detail

/// Deterministic for a given seed: parameters are drawn in visit order from
/// a single stream.
template <typename T>
CodecParams<T> build_model(const CodecConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  CodecParams<T> p;
  p.front_strided = detail::make_conv<T>(rng, 1, cfg.front_width, 3, 2, Padding::same);
  p.front_pooled = detail::make_conv<T>(rng, 1, cfg.front_width, 1, 1, Padding::valid);
  i64 in_ch = cfg.front_width;
  for (std::size_t i = 0; i < 3; ++i) {
    p.enc_rnn[i] = make_convlstm<T>(rng, in_ch, cfg.rnn_widths[i], 3, 2, Padding::same);
    in_ch = cfg.rnn_widths[i];
  }
  p.bottleneck = detail::make_conv<T>(rng, in_ch, cfg.beta, 1, 1, Padding::valid);
  p.dec_expand = detail::make_conv<T>(rng, cfg.beta, cfg.decoder_width, 1, 1, Padding::valid);
  i64 ch = cfg.decoder_width;
  for (std::size_t i = 0; i < 4; ++i) {
    p.dec_mods[i].branch_a = make_convlstm<T>(rng, ch, ch, 2, 1, Padding::same);
    p.dec_mods[i].branch_b = make_convlstm<T>(rng, ch, ch, 2, 1, Padding::same);
    ch /= 4;
  }
  p.dec_out = detail::make_conv<T>(rng, ch, 1, 1, 1, Padding::valid);
  return p;
}

template <typename T>
struct BoundConv {
  typename Tape<T>::Var w, b;
};

template <typename T>
struct BoundCodec {
  BoundConv<T> front_strided, front_pooled;
  std::array<BoundConvLstm<T>, 3> enc_rnn;
  BoundConv<T> bottleneck, dec_expand;
  struct Mod {
    BoundConvLstm<T> a, b;
  };
  std::array<Mod, 4> dec_mods;
  BoundConv<T> dec_out;
  std::vector<typename Tape<T>::Var> flat;  // visit order
};

template <typename T>
BoundCodec<T> bind_codec(Tape<T>& tape, const CodecParams<T>& p) {
  BoundCodec<T> b;
  auto bind_conv = [&](const ConvLayer<T>& layer) {
    BoundConv<T> bc{tape.input(layer.w), tape.input(layer.b)};
    b.flat.push_back(bc.w);
    b.flat.push_back(bc.b);
    return bc;
  };
  b.front_strided = bind_conv(p.front_strided);
  b.front_pooled = bind_conv(p.front_pooled);
  for (std::size_t i = 0; i < 3; ++i) {
    b.enc_rnn[i] = bind_convlstm(tape, p.enc_rnn[i], &b.flat);
  }
  b.bottleneck = bind_conv(p.bottleneck);
  b.dec_expand = bind_conv(p.dec_expand);
  for (std::size_t i = 0; i < 4; ++i) {
    b.dec_mods[i].a = bind_convlstm(tape, p.dec_mods[i].branch_a, &b.flat);
    b.dec_mods[i].b = bind_convlstm(tape, p.dec_mods[i].branch_b, &b.flat);
  }
  b.dec_out = bind_conv(p.dec_out);
  return b;
}

/// Compression sub-network. Input (b, 1, N, N) in [0, 1]; output latent
/// (b, beta, N/16, N/16). The two front branches are averaged before the
/// shared ReLU; recurrent layers carry their own gate nonlinearities.
template <typename T>
typename Tape<T>::Var encode_t(Tape<T>& tape, typename Tape<T>::Var image,
                               const BoundCodec<T>& m, const CodecParams<T>& p,
                               const CodecConfig& cfg) {
  using Var = typename Tape<T>::Var;
  const Shape& s = tape.value(image).shape();
  if (s.c != 1 || s.h != cfg.patch_size || s.w != cfg.patch_size) {
    fail("encode: input shape ", s.str(), " expected (b, 1, ", cfg.patch_size,
         ", ", cfg.patch_size, ")");
  }
  Var a = tape.conv2d(image, m.front_strided.w, m.front_strided.b,
                      p.front_strided.spec);
  Var pooled = tape.maxpool2x2(image);
  Var b = tape.conv2d(pooled, m.front_pooled.w, m.front_pooled.b,
                      p.front_pooled.spec);
  Var x = tape.activation(tape.combine(a, b, Combine::average), Activation::relu);
  for (std::size_t i = 0; i < 3; ++i) {
    x = layer_forward_t(tape, x, m.enc_rnn[i], p.enc_rnn[i].x_spec, cfg.steps);
  }
  Var latent = tape.conv2d(x, m.bottleneck.w, m.bottleneck.b, p.bottleneck.spec);
  return tape.activation(latent, Activation::relu);
}

/// Decompression sub-network. Latent (b, beta, N/16, N/16) -> image
/// (b, 1, N, N). Each deconvolution module averages two recurrent branches
/// and moves depth into space; the output layer is linear, optionally
/// clamped to [0, 1].
template <typename T>
typename Tape<T>::Var decode_t(Tape<T>& tape, typename Tape<T>::Var latent,
                               const BoundCodec<T>& m, const CodecParams<T>& p,
                               const CodecConfig& cfg, bool clamp = true) {
  using Var = typename Tape<T>::Var;
  const Shape& s = tape.value(latent).shape();
  const i64 pq = cfg.latent_dim();
  if (s.c != cfg.beta || s.h != pq || s.w != pq) {
    fail("decode: latent shape ", s.str(), " expected (b, ", cfg.beta, ", ", pq,
         ", ", pq, ")");
  }
  Var x = tape.activation(
      tape.conv2d(latent, m.dec_expand.w, m.dec_expand.b, p.dec_expand.spec),
      Activation::relu);
  for (std::size_t i = 0; i < 4; ++i) {
    Var a = layer_forward_t(tape, x, m.dec_mods[i].a,
                            p.dec_mods[i].branch_a.x_spec, cfg.steps);
    Var b = layer_forward_t(tape, x, m.dec_mods[i].b,
                            p.dec_mods[i].branch_b.x_spec, cfg.steps);
    x = tape.depth_to_space(tape.combine(a, b, Combine::average), 2);
  }
  Var out = tape.conv2d(x, m.dec_out.w, m.dec_out.b, p.dec_out.spec);
  return clamp ? tape.clamp01(out) : out;
}

template <typename T>
Tensor<T> encode(const Tensor<T>& image, const CodecParams<T>& params,
                 const CodecConfig& cfg) {
  Tape<T> tape;
  BoundCodec<T> m = bind_codec(tape, params);
  auto v = encode_t(tape, tape.input(image, false), m, params, cfg);
  return tape.value(v);
}

template <typename T>
Tensor<T> decode(const Tensor<T>& latent, const CodecParams<T>& params,
                 const CodecConfig& cfg) {
  Tape<T> tape;
  BoundCodec<T> m = bind_codec(tape, params);
  auto v = decode_t(tape, tape.input(latent, false), m, params, cfg, true);
  return tape.value(v);
}

/// Affine min-max quantization of one latent tensor. Codes occupy
/// [0, 2^bits - 1]; a constant tensor degenerates to scale 1 with all
/// codes zero so dequantization restores it exactly.
struct QuantizedLatent {
  Shape shape;
  int bits = 8;
  double q_min = 0.0;
  double q_scale = 1.0;
  std::vector<std::uint16_t> codes;

  i64 max_code() const { return (i64{1} << bits) - 1; }
};

template <typename T>
QuantizedLatent quantize(const Tensor<T>& x, int bits) {
  if (bits < 1 || bits > 16) fail("quantize: bits must be in [1, 16], got ", bits);
  QuantizedLatent q;
  q.shape = x.shape();
  q.bits = bits;
  double lo = static_cast<double>(x.data()[0]);
  double hi = lo;
  for (i64 i = 1; i < x.numel(); ++i) {
    const double v = static_cast<double>(x.data()[i]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  q.q_min = lo;
  const double levels = static_cast<double>(q.max_code());
  q.q_scale = hi > lo ? (hi - lo) / levels : 1.0;
  q.codes.resize(static_cast<std::size_t>(x.numel()));
  for (i64 i = 0; i < x.numel(); ++i) {
    const double v = (static_cast<double>(x.data()[i]) - q.q_min) / q.q_scale;
    const i64 code = std::min<i64>(q.max_code(),
                                   std::max<i64>(0, std::llround(v)));
    q.codes[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(code);
  }
  return q;
}

template <typename T>
Tensor<T> dequantize(const QuantizedLatent& q) {
  Tensor<T> x(q.shape);
  for (i64 i = 0; i < x.numel(); ++i) {
    x.data()[i] = static_cast<T>(
        q.q_min + static_cast<double>(q.codes[static_cast<std::size_t>(i)]) * q.q_scale);
  }
  return x;
}

/// Serialized code bytes: one byte per code up to 8 bits, two (little
/// endian) above. At 8 bits one N x N patch stores exactly N*N*beta/256
/// bytes.
inline std::vector<std::uint8_t> pack_codes(const QuantizedLatent& q) {
  std::vector<std::uint8_t> out;
  if (q.bits <= 8) {
    out.reserve(q.codes.size());
    for (std::uint16_t c : q.codes) out.push_back(static_cast<std::uint8_t>(c));
  } else {
    out.reserve(q.codes.size() * 2);
    for (std::uint16_t c : q.codes) {
      out.push_back(static_cast<std::uint8_t>(c & 0xff));
      out.push_back(static_cast<std::uint8_t>(c >> 8));
    }
  }
  return out;
}

inline void unpack_codes(const std::vector<std::uint8_t>& bytes,
                         QuantizedLatent& q) {
  const std::size_t n = static_cast<std::size_t>(q.shape.numel());
  const std::size_t expect = q.bits <= 8 ? n : 2 * n;
  if (bytes.size() != expect) {
    fail("unpack_codes: payload has ", bytes.size(), " bytes, expected ",
         expect, " for shape ", q.shape.str(), " at ", q.bits, " bits");
  }
  q.codes.resize(n);
  if (q.bits <= 8) {
    for (std::size_t i = 0; i < n; ++i) q.codes[i] = bytes[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      q.codes[i] = static_cast<std::uint16_t>(bytes[2 * i] |
                                              (bytes[2 * i + 1] << 8));
    }
  }
}

}  // namespace xrc
