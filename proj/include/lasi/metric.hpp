#pragma once

#include <string>

#include "lasi/image.hpp"
#include "lasi/wls.hpp"

namespace lasi {

struct MetricId {
  enum class Kind { Lasi, Mse, Psnr, Ssim, MsSsim };
  Kind kind = Kind::Lasi;
  LasiConfig lasi;  // used when kind == Lasi

  static MetricId make(Kind k, const LasiConfig& cfg = LasiConfig{}) {
    MetricId id;
    id.kind = k;
    id.lasi = cfg;
    if (k == Kind::Lasi) cfg.validate();
    return id;
  }
  // Accepts lasi|mse|psnr|ssim|msssim.
  static MetricId parse(const std::string& name, const LasiConfig& cfg = LasiConfig{});
  std::string name() const;
};

double mse(const ImageTensor& x, const ImageTensor& y);
// -10*log10(mse) in normalized space; +infinity for identical images.
double psnr(const ImageTensor& x, const ImageTensor& y);

// SSIM with an 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2,
// averaged over valid window positions and channels.
double ssim(const ImageTensor& x, const ImageTensor& y);
// Multi-scale SSIM with the standard 5-scale weights; the scale count adapts
// to the image size and the weights are renormalized when fewer scales fit.
double ms_ssim(const ImageTensor& x, const ImageTensor& y);

// Mean L2 distance between embedding columns, averaged over all columns.
double embedding_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b);
double lasi_distance(const ImageTensor& x, const ImageTensor& y, const LasiConfig& cfg,
                     int threads = 0);

// The metric's own value (mse, psnr in dB, ssim similarity, lasi distance).
double evaluate(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                int threads = 0);
// Monotone mapping of evaluate() to "lower = more similar" semantics, used for
// 2-AFC decisions, JND ranking, and the MAD competition.
double ranking_distance(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                        int threads = 0);

}  // namespace lasi
