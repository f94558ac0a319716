#include "xrc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

#include "xrc/checkpoint.hpp"
#include "xrc/container.hpp"
#include "xrc/metrics.hpp"
#include "xrc/synthetic.hpp"
#include "xrc/trainer.hpp"

namespace xrc {

namespace {

struct TrainArgs {
  std::string corpus;
  i64 size = 64;
  i64 beta = 32;
  i64 steps = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::string log;
  std::string profile = "desk";
  i64 batch = 16;
  double lr = 1e-4;
  i64 t_steps = 0;
  i64 front_width = 0;
  std::vector<i64> rnn_widths;
  i64 decoder_width = 0;
  i64 bits = 8;
  bool quant_noise = false;
  double grad_clip = 0.0;
  i64 val_every = 100;
  i64 ckpt_every = 1000;
};

CodecConfig config_from(const TrainArgs& a) {
  CodecConfig cfg = a.profile == "full" ? CodecConfig::full_scale(a.size, a.beta)
                                        : CodecConfig::desk(a.size, a.beta);
  if (a.t_steps > 0) cfg.steps = a.t_steps;
  if (a.front_width > 0) cfg.front_width = a.front_width;
  if (!a.rnn_widths.empty()) {
    if (a.rnn_widths.size() != 3) {
      fail("--rnn-widths expects exactly 3 values, got ", a.rnn_widths.size());
    }
    cfg.rnn_widths = {a.rnn_widths[0], a.rnn_widths[1], a.rnn_widths[2]};
  }
  if (a.decoder_width > 0) cfg.decoder_width = a.decoder_width;
  cfg.quantizer_bits = a.bits;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a) {
  const CodecConfig cfg = config_from(a);
  const CorpusIndex corpus = load_corpus_index(a.corpus);
  CodecParams<double> params = build_model<double>(cfg, a.seed);

  TrainRunConfig run;
  run.batch_size = a.batch;
  run.max_steps = a.steps;
  run.learning_rate = a.lr;
  run.seed = a.seed;
  run.quant_noise = a.quant_noise;
  run.grad_clip = a.grad_clip;
  run.val_every = a.val_every;
  run.ckpt_every = a.ckpt_every;
  run.out_checkpoint = a.out;
  if (!a.log.empty()) run.metrics_log = a.log;

  std::cout << "training " << config_id(cfg) << " ("
            << params.parameter_count() << " parameters, nominal ratio "
            << compression_ratio(cfg) << ")\n";
  const TrainResult result = train(params, cfg, corpus, run);
  if (result.aborted_non_finite) {
    std::cerr << "error: training aborted on non-finite loss after "
              << result.steps_run << " steps\n";
    return 1;
  }
  std::cout << "steps: " << result.steps_run << "  initial L1: "
            << result.initial_loss << "  final L1: " << result.final_loss
            << "\ncheckpoint: " << a.out << "\n";
  return 0;
}

int cmd_compress(const std::string& in, const std::string& ckpt,
                 const std::string& out) {
  const CompressStats stats = compress_file(in, ckpt, out);
  std::cout << "tiles: " << stats.tile_count << "\ninput bytes: "
            << stats.input_bytes << "\ncontainer bytes: " << stats.container_bytes
            << "\nnominal ratio: " << stats.nominal_ratio
            << "\neffective ratio: " << stats.effective_ratio << "\n";
  return 0;
}

int cmd_decompress(const std::string& in, const std::string& ckpt,
                   const std::string& out) {
  decompress_file(in, ckpt, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& corpus_path, const std::string& split_name_,
             const std::string& ckpt, const std::string& report_path,
             i64 count, std::uint64_t seed) {
  const Checkpoint ckpt_data = load_checkpoint(ckpt);
  const CorpusIndex corpus = load_corpus_index(corpus_path);
  const Split split = parse_split(split_name_);
  std::vector<Crop> crops =
      sample_crops(corpus, split, ckpt_data.config.patch_size, count, seed);
  std::vector<std::pair<std::string, ImageU8>> labeled;
  labeled.reserve(crops.size());
  for (Crop& c : crops) {
    labeled.emplace_back(concat(c.source, "@", c.y, ",", c.x), std::move(c.patch));
  }
  const EvalReport report = evaluate(ckpt_data.params, ckpt_data.config, labeled);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) fail("eval: cannot write report ", report_path);
    out << format_report_machine(report);
  }
  std::cout << format_report(report);
  return 0;
}

int cmd_info(const std::string& path) {
  const Container c = parse_container(read_file_bytes(path));
  const std::uintmax_t file_size = std::filesystem::file_size(path);
  const double input_bytes = static_cast<double>(c.height) * c.width;
  std::cout << "container: " << path << "\nversion: " << static_cast<int>(c.version)
            << "\nimage: " << c.width << "x" << c.height
            << "\ntile size: " << c.tile_size << "\nbeta: " << c.beta
            << "\nquantizer bits: " << static_cast<int>(c.quantizer_bits)
            << "\ntiles: " << c.tiles.size() << " (" << c.grid_rows() << "x"
            << c.grid_cols() << ")\nmodel checksum: ";
  for (std::uint8_t b : c.model_checksum) {
    std::cout << "0123456789abcdef"[b >> 4] << "0123456789abcdef"[b & 0xf];
  }
  const double nominal =
      2048.0 / (static_cast<double>(c.beta) * c.quantizer_bits);
  std::cout << "\nnominal ratio: " << nominal
            << "\neffective ratio: " << input_bytes / static_cast<double>(file_size)
            << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"learned X-ray image codec"};
  app.require_subcommand(1);

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "train a codec model");
  train_cmd->add_option("--corpus", ta.corpus, "corpus index file")->required();
  train_cmd->add_option("--size", ta.size, "patch size N (multiple of 16)");
  train_cmd->add_option("--beta", ta.beta, "latent channels (ratio = 256/beta)");
  train_cmd->add_option("--steps", ta.steps, "training steps");
  train_cmd->add_option("--seed", ta.seed, "rng seed");
  train_cmd->add_option("--out", ta.out, "output checkpoint")->required();
  train_cmd->add_option("--log", ta.log, "metrics log file");
  train_cmd->add_option("--profile", ta.profile, "desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
  train_cmd->add_option("--batch", ta.batch, "batch size");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
  train_cmd->add_option("--t-steps", ta.t_steps, "recurrence steps T");
  train_cmd->add_option("--front-width", ta.front_width, "front stage channels");
  train_cmd->add_option("--rnn-widths", ta.rnn_widths,
                        "encoder recurrent widths (3 values)");
  train_cmd->add_option("--decoder-width", ta.decoder_width,
                        "decoder stack width (multiple of 256)");
  train_cmd->add_option("--bits", ta.bits, "quantizer bits");
  train_cmd->add_flag("--quant-noise", ta.quant_noise,
                      "train with quantization noise");
  train_cmd->add_option("--grad-clip", ta.grad_clip, "global grad norm cap");
  train_cmd->add_option("--val-every", ta.val_every, "validation cadence");
  train_cmd->add_option("--ckpt-every", ta.ckpt_every, "checkpoint cadence");

  std::string in_path, ckpt_path, out_path;
  CLI::App* compress_cmd = app.add_subcommand("compress", "compress a PGM image");
  compress_cmd->add_option("--in", in_path, "input image (PGM P5)")->required();
  compress_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  compress_cmd->add_option("--out", out_path, "output container")->required();

  std::string din_path, dckpt_path, dout_path;
  CLI::App* decompress_cmd =
      app.add_subcommand("decompress", "decompress a container");
  decompress_cmd->add_option("--in", din_path, "input container")->required();
  decompress_cmd->add_option("--ckpt", dckpt_path, "model checkpoint")->required();
  decompress_cmd->add_option("--out", dout_path, "output image (PGM P5)")->required();

  std::string eval_corpus, eval_split = "test", eval_ckpt, eval_report;
  i64 eval_count = 64;
  std::uint64_t eval_seed = 0;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--corpus", eval_corpus, "corpus index file")->required();
  eval_cmd->add_option("--split", eval_split, "train, val or test");
  eval_cmd->add_option("--ckpt", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--report", eval_report, "machine-readable report path");
  eval_cmd->add_option("--count", eval_count, "patches to evaluate");
  eval_cmd->add_option("--seed", eval_seed, "sampling seed");

  std::string info_path;
  CLI::App* info_cmd = app.add_subcommand("info", "print container header");
  info_cmd->add_option("file", info_path, "container file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*compress_cmd) return cmd_compress(in_path, ckpt_path, out_path);
    if (*decompress_cmd) return cmd_decompress(din_path, dckpt_path, dout_path);
    if (*eval_cmd) {
      return cmd_eval(eval_corpus, eval_split, eval_ckpt, eval_report,
                      eval_count, eval_seed);
    }
    if (*info_cmd) return cmd_info(info_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace xrc
