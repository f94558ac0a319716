#include "xrc/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "xrc/container.hpp"
#include "xrc/entropy.hpp"

namespace xrc {

namespace {

std::vector<double> window_weights(SsimWindow window, i64& size) {
  if (window == SsimWindow::uniform8) {
    size = 8;
    return std::vector<double>(64, 1.0 / 64.0);
  }
  size = 11;
  const double sigma = 1.5;
  std::vector<double> w(static_cast<std::size_t>(size * size));
  double total = 0.0;
  for (i64 y = 0; y < size; ++y) {
    for (i64 x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y - size / 2);
      const double dx = static_cast<double>(x - size / 2);
      const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>(y * size + x)] = v;
      total += v;
    }
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> to_doubles(const ImageU8& img) {
  std::vector<double> v(img.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(img.pixels[i]);
  return v;
}

std::string format_value(double v, int precision) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

double psnr(const std::vector<double>& a, const std::vector<double>& b,
            double max_value) {
  if (a.size() != b.size()) {
    fail("psnr: size mismatch ", a.size(), " vs ", b.size());
  }
  if (a.empty()) fail("psnr: empty input");
  if (!(max_value > 0)) fail("psnr: max_value must be > 0, got ", max_value);
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

double ssim(const std::vector<double>& a, const std::vector<double>& b, i64 h,
            i64 w, const SsimParams& params) {
  if (a.size() != b.size() ||
      a.size() != static_cast<std::size_t>(h * w)) {
    fail("ssim: buffer sizes ", a.size(), "/", b.size(),
         " do not match dims ", h, "x", w);
  }
  i64 win = 0;
  const std::vector<double> weights = window_weights(params.window, win);
  if (h < win || w < win) {
    fail("ssim: image ", h, "x", w, " smaller than window ", win, "x", win);
  }
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);

  double total = 0.0;
  i64 count = 0;
  for (i64 y = 0; y + win <= h; ++y) {
    for (i64 x = 0; x + win <= w; ++x) {
      double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
      for (i64 dy = 0; dy < win; ++dy) {
        const double* ra = a.data() + (y + dy) * w + x;
        const double* rb = b.data() + (y + dy) * w + x;
        const double* rw = weights.data() + dy * win;
        for (i64 dx = 0; dx < win; ++dx) {
          const double wv = rw[dx];
          mu_a += wv * ra[dx];
          mu_b += wv * rb[dx];
          aa += wv * ra[dx] * ra[dx];
          bb += wv * rb[dx] * rb[dx];
          ab += wv * ra[dx] * rb[dx];
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double psnr(const ImageU8& a, const ImageU8& b) {
  if (a.height != b.height || a.width != b.width) {
    fail("psnr: image dims ", a.height, "x", a.width, " vs ", b.height, "x",
         b.width);
  }
  return psnr(to_doubles(a), to_doubles(b), 255.0);
}

double ssim(const ImageU8& a, const ImageU8& b, const SsimParams& params) {
  if (a.height != b.height || a.width != b.width) {
    fail("ssim: image dims ", a.height, "x", a.width, " vs ", b.height, "x",
         b.width);
  }
  return ssim(to_doubles(a), to_doubles(b), a.height, a.width, params);
}

std::string config_id(const CodecConfig& cfg) {
  return concat("N", cfg.patch_size, "-b", cfg.beta, "-f", cfg.front_width,
                "-r", cfg.rnn_widths[0], ",", cfg.rnn_widths[1], ",",
                cfg.rnn_widths[2], "-d", cfg.decoder_width, "-T", cfg.steps,
                "-q", cfg.quantizer_bits);
}

EvalReport evaluate(const CodecParams<double>& params, const CodecConfig& cfg,
                    const std::vector<std::pair<std::string, ImageU8>>& patches,
                    const SsimParams& sp) {
  cfg.validate();
  if (patches.empty()) fail("evaluate: no patches given");
  EvalReport report;
  report.config_id = config_id(cfg);
  report.nominal_ratio = compression_ratio(cfg);

  double ssim_sum = 0.0;
  double psnr_sum = 0.0;
  i64 input_bytes = 0;
  i64 container_bytes = 0;
  const std::array<std::uint8_t, 32> no_checksum{};

  for (const auto& [label, img] : patches) {
    if (img.height != cfg.patch_size || img.width != cfg.patch_size) {
      fail("evaluate: patch '", label, "' is ", img.height, "x", img.width,
           ", model expects ", cfg.patch_size, "x", cfg.patch_size);
    }
    const Container c = compress_image(img, params, cfg, no_checksum);
    const ImageU8 recon = decompress_image(c, params, cfg);

    PatchEval pe;
    pe.label = label;
    pe.ssim = ssim(img, recon, sp);
    pe.psnr_db = psnr(img, recon);
    ssim_sum += pe.ssim;
    psnr_sum += pe.psnr_db;
    input_bytes += img.height * img.width;
    container_bytes += static_cast<i64>(serialize_container(c).size());
    report.patches.push_back(std::move(pe));
  }
  report.mean_ssim = ssim_sum / static_cast<double>(report.patches.size());
  report.mean_psnr = psnr_sum / static_cast<double>(report.patches.size());
  report.effective_ratio =
      static_cast<double>(input_bytes) / static_cast<double>(container_bytes);
  return report;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream os;
  os << "config: " << report.config_id << "\n";
  os << "patches: " << report.patches.size() << "\n";
  os << std::left << std::setw(28) << "label" << std::right << std::setw(10)
     << "ssim" << std::setw(12) << "psnr_db" << "\n";
  for (const PatchEval& p : report.patches) {
    os << std::left << std::setw(28) << p.label << std::right << std::setw(10)
       << format_value(p.ssim, 4) << std::setw(12) << format_value(p.psnr_db, 4)
       << "\n";
  }
  os << "mean ssim: " << format_value(report.mean_ssim, 4) << "\n";
  os << "mean psnr: " << format_value(report.mean_psnr, 4) << " dB\n";
  os << "nominal ratio: " << format_value(report.nominal_ratio, 2) << "\n";
  os << "effective ratio: " << format_value(report.effective_ratio, 2) << "\n";
  return os.str();
}

std::string format_report_machine(const EvalReport& report) {
  std::ostringstream os;
  for (const PatchEval& p : report.patches) {
    os << p.label << "\t" << format_value(p.ssim, 6) << "\t"
       << format_value(p.psnr_db, 6) << "\t"
       << format_value(report.nominal_ratio, 6) << "\t"
       << format_value(report.effective_ratio, 6) << "\n";
  }
  return os.str();
}

}  // namespace xrc
