#pragma once

#include <string>
#include <vector>

#include "xrc/codec.hpp"
#include "xrc/image.hpp"

namespace xrc {

enum class SsimWindow { gaussian11, uniform8 };

/// Standard SSIM constants; C1 = (k1*L)^2 and C2 = (k2*L)^2 with L the
/// dynamic range (255 for 8-bit pixels).
struct SsimParams {
  SsimWindow window = SsimWindow::gaussian11;  // gaussian 11x11, sigma 1.5
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// 10 log10(max^2 / MSE) in dB; +infinity when the images are identical.
double psnr(const std::vector<double>& a, const std::vector<double>& b,
            double max_value);

/// Mean of the local SSIM map over all fully interior window positions.
double ssim(const std::vector<double>& a, const std::vector<double>& b, i64 h,
            i64 w, const SsimParams& params = {});

double psnr(const ImageU8& a, const ImageU8& b);
double ssim(const ImageU8& a, const ImageU8& b, const SsimParams& params = {});

struct PatchEval {
  std::string label;
  double ssim = 0.0;
  double psnr_db = 0.0;
};

struct EvalReport {
  std::string config_id;
  std::vector<PatchEval> patches;
  double mean_ssim = 0.0;
  double mean_psnr = 0.0;
  double nominal_ratio = 0.0;
  double effective_ratio = 0.0;  // input bytes / container bytes, entropy stage included
};

std::string config_id(const CodecConfig& cfg);

/// Runs each patch through the real codec path (encode, quantize,
/// dequantize, decode) and scores the 8-bit reconstruction against the
/// 8-bit original.
EvalReport evaluate(const CodecParams<double>& params, const CodecConfig& cfg,
                    const std::vector<std::pair<std::string, ImageU8>>& patches,
                    const SsimParams& sp = {});

/// Human-readable table.
std::string format_report(const EvalReport& report);
/// One line per patch: label, ssim, psnr_db, nominal_ratio,
/// effective_ratio, tab separated. Infinite PSNR is written as "inf".
std::string format_report_machine(const EvalReport& report);

}  // namespace xrc
