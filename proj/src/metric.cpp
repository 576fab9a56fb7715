#include "lasi/metric.hpp"

#include <cmath>
#include <limits>

#include "ssim_internal.hpp"

namespace lasi {

namespace {

void check_same_shape(const ImageTensor& x, const ImageTensor& y) {
  if (!x.same_shape(y)) throw ValidationError("images have different dimensions");
}

double kahan_mean(const std::vector<double>& values) {
  double total = 0.0, comp = 0.0;
  for (double v : values) {
    double yk = v - comp;
    double tk = total + yk;
    comp = (tk - total) - yk;
    total = tk;
  }
  return values.empty() ? 0.0 : total / static_cast<double>(values.size());
}

double ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int height,
                  int width) {
  detail::SsimMoments m = detail::ssim_moments(x, y, height, width);
  std::vector<double> vals(m.mu_x.size());
  for (std::size_t i = 0; i < vals.size(); ++i)
    vals[i] = detail::luminance_term(m, i) * detail::contrast_structure_term(m, i);
  return kahan_mean(vals);
}

double mean_cs_plane(const std::vector<double>& x, const std::vector<double>& y, int height,
                     int width) {
  detail::SsimMoments m = detail::ssim_moments(x, y, height, width);
  std::vector<double> vals(m.mu_x.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = detail::contrast_structure_term(m, i);
  return kahan_mean(vals);
}

double ms_ssim_plane(std::vector<double> x, std::vector<double> y, int height, int width) {
  const int scales = detail::msssim_scale_count(height, width);
  if (scales == 0) throw ValidationError("image smaller than one SSIM window");
  const auto& base_w = detail::msssim_weights();
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += base_w[s];

  double value = 1.0;
  int h = height, w = width;
  for (int s = 0; s < scales; ++s) {
    double ws = base_w[s] / weight_sum;
    double term = (s == scales - 1) ? ssim_plane(x, y, h, w) : mean_cs_plane(x, y, h, w);
    if (term < 0.0) term = 0.0;  // keep the fractional power real-valued
    value *= std::pow(term, ws);
    if (s + 1 < scales) {
      int nh, nw;
      x = detail::downsample2(x, h, w, nh, nw);
      y = detail::downsample2(y, h, w, nh, nw);
      h = nh;
      w = nw;
    }
  }
  return value;
}

}  // namespace

double mse(const ImageTensor& x, const ImageTensor& y) {
  check_same_shape(x, y);
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x.data[i] - y.data[i];
    sq[i] = d * d;
  }
  return kahan_mean(sq);
}

double psnr(const ImageTensor& x, const ImageTensor& y) {
  double m = mse(x, y);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

double ssim(const ImageTensor& x, const ImageTensor& y) {
  check_same_shape(x, y);
  if (x.height < detail::kWindow || x.width < detail::kWindow)
    throw ValidationError("image smaller than one SSIM window");
  double total = 0.0;
  for (int ch = 0; ch < x.channels; ++ch)
    total += ssim_plane(x.plane(ch), y.plane(ch), x.height, x.width);
  return total / x.channels;
}

double ms_ssim(const ImageTensor& x, const ImageTensor& y) {
  check_same_shape(x, y);
  double total = 0.0;
  for (int ch = 0; ch < x.channels; ++ch)
    total += ms_ssim_plane(x.plane(ch), y.plane(ch), x.height, x.width);
  return total / x.channels;
}

double embedding_distance(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.dim != b.dim || a.columns != b.columns)
    throw ValidationError("embedding matrices have different shapes");
  std::vector<double> norms(static_cast<std::size_t>(a.columns));
  for (std::int64_t i = 0; i < a.columns; ++i) {
    double sq = 0.0;
    const double* pa = a.col(i);
    const double* pb = b.col(i);
    for (int m = 0; m < a.dim; ++m) {
      double d = pa[m] - pb[m];
      sq += d * d;
    }
    norms[static_cast<std::size_t>(i)] = std::sqrt(sq);
  }
  return kahan_mean(norms);
}

double lasi_distance(const ImageTensor& x, const ImageTensor& y, const LasiConfig& cfg,
                     int threads) {
  check_same_shape(x, y);
  return embedding_distance(solve_embeddings(x, cfg, threads),
                            solve_embeddings(y, cfg, threads));
}

MetricId MetricId::parse(const std::string& name, const LasiConfig& cfg) {
  if (name == "lasi") return make(Kind::Lasi, cfg);
  if (name == "mse") return make(Kind::Mse);
  if (name == "psnr") return make(Kind::Psnr);
  if (name == "ssim") return make(Kind::Ssim);
  if (name == "msssim") return make(Kind::MsSsim);
  throw ValidationError("unknown metric '" + name + "'");
}

std::string MetricId::name() const {
  switch (kind) {
    case Kind::Lasi: return "lasi";
    case Kind::Mse: return "mse";
    case Kind::Psnr: return "psnr";
    case Kind::Ssim: return "ssim";
    case Kind::MsSsim: return "msssim";
  }
  return "?";
}

double evaluate(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                int threads) {
  switch (metric.kind) {
    case MetricId::Kind::Lasi: return lasi_distance(x, y, metric.lasi, threads);
    case MetricId::Kind::Mse: return mse(x, y);
    case MetricId::Kind::Psnr: return psnr(x, y);
    case MetricId::Kind::Ssim: return ssim(x, y);
    case MetricId::Kind::MsSsim: return ms_ssim(x, y);
  }
  throw ValidationError("invalid metric kind");
}

double ranking_distance(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                        int threads) {
  switch (metric.kind) {
    case MetricId::Kind::Lasi: return lasi_distance(x, y, metric.lasi, threads);
    case MetricId::Kind::Mse: return mse(x, y);
    case MetricId::Kind::Psnr: return -psnr(x, y);
    case MetricId::Kind::Ssim: return 1.0 - ssim(x, y);
    case MetricId::Kind::MsSsim: return 1.0 - ms_ssim(x, y);
  }
  throw ValidationError("invalid metric kind");
}

}  // namespace lasi
