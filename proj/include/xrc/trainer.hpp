#pragma once

#include <filesystem>
#include <vector>

#include "xrc/adam.hpp"
#include "xrc/codec.hpp"
#include "xrc/corpus.hpp"

namespace xrc {

struct TrainRunConfig {
  i64 batch_size = 16;
  i64 max_steps = 0;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  i64 crop_size = 0;      // 0 means the model patch size; otherwise must match
  bool quant_noise = false;  // add uniform +/- q_scale/2 noise to latents
  double grad_clip = 0.0;    // global L2 norm cap, 0 disables
  i64 val_every = 100;
  i64 ckpt_every = 1000;
  i64 val_patches = 8;
  std::filesystem::path out_checkpoint;
  std::filesystem::path metrics_log;  // optional, appended to

  void validate(const CodecConfig& cfg) const {
    if (batch_size < 1) fail("train config: batch_size must be >= 1, got ", batch_size);
    if (max_steps < 0) fail("train config: max_steps must be >= 0, got ", max_steps);
    if (crop_size != 0 && crop_size != cfg.patch_size) {
      fail("train config: crop size ", crop_size,
           " does not match model patch size ", cfg.patch_size);
    }
    if (val_every < 1) fail("train config: val_every must be >= 1");
    if (ckpt_every < 1) fail("train config: ckpt_every must be >= 1");
    if (out_checkpoint.empty()) fail("train config: output checkpoint path required");
  }
};

struct TrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // one entry per step
  i64 steps_run = 0;
  bool aborted_non_finite = false;
};

/// Joint training loop: sample a train batch, run the full pipeline
/// (decode of encode), take the L1 loss, backpropagate, apply one Adam
/// step. Logs "step loss val_psnr val_ssim" per step ("-" for val fields
/// between validation points), checkpoints periodically, and aborts on a
/// non-finite loss keeping the last good checkpoint on disk.
TrainResult train(CodecParams<double>& params, const CodecConfig& cfg,
                  const CorpusIndex& corpus, const TrainRunConfig& run);

}  // namespace xrc
