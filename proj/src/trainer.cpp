#include "xrc/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "xrc/checkpoint.hpp"
#include "xrc/metrics.hpp"

namespace xrc {

namespace {

/// Uniform +/- q_scale/2 noise per batch item, mirroring what 8-bit
/// quantization of that item's latent would cost.
Tensor<double> quantization_noise(const Tensor<double>& latent, i64 bits,
                                  Rng& rng) {
  Tensor<double> noise(latent.shape());
  const i64 per_item = latent.shape().c * latent.shape().h * latent.shape().w;
  const double levels = static_cast<double>((i64{1} << bits) - 1);
  for (i64 n = 0; n < latent.shape().n; ++n) {
    const double* item = latent.data() + n * per_item;
    double lo = item[0], hi = item[0];
    for (i64 i = 1; i < per_item; ++i) {
      lo = std::min(lo, item[i]);
      hi = std::max(hi, item[i]);
    }
    const double scale = hi > lo ? (hi - lo) / levels : 1.0;
    double* out = noise.data() + n * per_item;
    for (i64 i = 0; i < per_item; ++i) {
      out[i] = rng.uniform(-scale / 2.0, scale / 2.0);
    }
  }
  return noise;
}

struct ValScore {
  double psnr_db = 0.0;
  double ssim_score = 0.0;
};

ValScore validate_model(const CodecParams<double>& params,
                        const CodecConfig& cfg, CropSampler& sampler,
                        i64 patches, Rng rng) {
  std::vector<Crop> crops = sampler.sample(Split::val, cfg.patch_size, patches, rng);
  std::vector<std::pair<std::string, ImageU8>> labeled;
  labeled.reserve(crops.size());
  for (Crop& c : crops) {
    labeled.emplace_back(concat(c.source, "@", c.y, ",", c.x), std::move(c.patch));
  }
  const EvalReport report = evaluate(params, cfg, labeled);
  return {report.mean_psnr, report.mean_ssim};
}

}  // namespace

TrainResult train(CodecParams<double>& params, const CodecConfig& cfg,
                  const CorpusIndex& corpus, const TrainRunConfig& run) {
  cfg.validate();
  run.validate(cfg);

  TrainResult result;
  if (run.max_steps == 0) {
    save_checkpoint(run.out_checkpoint, cfg, params);
    return result;
  }

  Rng base(run.seed);
  Rng sample_rng = base.fork(1);
  Rng noise_rng = base.fork(2);

  CropSampler sampler(corpus);
  const bool have_val = sampler.split_usable(Split::val, cfg.patch_size);

  std::vector<std::string> names;
  std::vector<Tensor<double>*> param_ptrs;
  params.visit([&](const std::string& n, Tensor<double>& t) {
    names.push_back(n);
    param_ptrs.push_back(&t);
  });
  AdamState<double> adam = AdamState<double>::init(
      params, AdamConfig{run.learning_rate, 0.9, 0.999, 1e-8});

  std::ofstream log;
  if (!run.metrics_log.empty()) {
    log.open(run.metrics_log, std::ios::app);
    if (!log) fail("train: cannot open metrics log ", run.metrics_log.string());
  }

  bool wrote_checkpoint = false;
  for (i64 step = 1; step <= run.max_steps; ++step) {
    const std::vector<Crop> crops =
        sampler.sample(Split::train, cfg.patch_size, run.batch_size, sample_rng);
    const Tensor<double> batch = crops_to_batch(crops);

    Tape<double> tape;
    BoundCodec<double> bound = bind_codec(tape, params);
    auto x = tape.input(batch, false);
    auto latent = encode_t(tape, x, bound, params, cfg);
    if (run.quant_noise) {
      latent = tape.add_const(
          latent, quantization_noise(tape.value(latent), cfg.quantizer_bits,
                                     noise_rng));
    }
    auto recon = decode_t(tape, latent, bound, params, cfg, true);
    auto loss_var = tape.mean_abs_diff(recon, x);
    const double loss = tape.value(loss_var).scalar();

    if (!std::isfinite(loss)) {
      std::cerr << "train: non-finite loss at step " << step
                << (wrote_checkpoint ? "; last good checkpoint retained"
                                     : "; no checkpoint written yet")
                << "\n";
      result.aborted_non_finite = true;
      break;
    }
    result.loss_history.push_back(loss);
    if (step == 1) result.initial_loss = loss;
    result.final_loss = loss;
    result.steps_run = step;

    tape.backward(loss_var);
    std::vector<Tensor<double>> grads;
    grads.reserve(bound.flat.size());
    for (auto v : bound.flat) grads.push_back(tape.grad(v));

    if (run.grad_clip > 0.0) {
      double norm_sq = 0.0;
      for (const Tensor<double>& g : grads) {
        for (i64 i = 0; i < g.numel(); ++i) norm_sq += g.data()[i] * g.data()[i];
      }
      const double norm = std::sqrt(norm_sq);
      if (norm > run.grad_clip) {
        const double scale = run.grad_clip / norm;
        for (Tensor<double>& g : grads) {
          for (i64 i = 0; i < g.numel(); ++i) g.data()[i] *= scale;
        }
      }
    }

    adam_step(names, param_ptrs, grads, adam);

    std::string val_psnr = "-";
    std::string val_ssim = "-";
    if (have_val && step % run.val_every == 0) {
      const ValScore score = validate_model(
          params, cfg, sampler, run.val_patches,
          base.fork(1000 + static_cast<std::uint64_t>(step)));
      val_psnr = concat(score.psnr_db);
      val_ssim = concat(score.ssim_score);
    }
    if (log.is_open()) {
      log << step << "\t" << concat(loss) << "\t" << val_psnr << "\t"
          << val_ssim << "\n";
    }

    if (step % run.ckpt_every == 0) {
      save_checkpoint(run.out_checkpoint, cfg, params);
      wrote_checkpoint = true;
    }
  }

  if (!result.aborted_non_finite) {
    save_checkpoint(run.out_checkpoint, cfg, params);
  }
  if (log.is_open()) log.flush();
  return result;
}

}  // namespace xrc
