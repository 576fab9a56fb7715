#pragma once

#include <array>
#include <cmath>
#include <vector>

// Shared pieces of the SSIM computation used by both the forward metric and
// its analytic gradient.

namespace lasi::detail {

inline constexpr int kWindow = 11;
inline constexpr int kRadius = 5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

inline const std::array<double, kWindow>& gauss_kernel() {
  static const std::array<double, kWindow> kernel = [] {
    std::array<double, kWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      double d = i - kRadius;
      k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
  }();
  return kernel;
}

// Valid-mode separable Gaussian correlation: (H,W) -> (H-10, W-10).
inline std::vector<double> gauss_valid(const std::vector<double>& plane, int height, int width) {
  const auto& g = gauss_kernel();
  const int vw = width - kWindow + 1;
  const int vh = height - kWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(height) * vw, 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < vw; ++c) {
      double acc = 0.0;
      for (int u = 0; u < kWindow; ++u) acc += g[u] * plane[static_cast<std::size_t>(r) * width + c + u];
      horiz[static_cast<std::size_t>(r) * vw + c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(vh) * vw, 0.0);
  for (int r = 0; r < vh; ++r) {
    for (int c = 0; c < vw; ++c) {
      double acc = 0.0;
      for (int u = 0; u < kWindow; ++u) acc += g[u] * horiz[static_cast<std::size_t>(r + u) * vw + c];
      out[static_cast<std::size_t>(r) * vw + c] = acc;
    }
  }
  return out;
}

// Adjoint of gauss_valid: spreads a (H-10, W-10) field back onto (H, W).
inline std::vector<double> gauss_valid_adjoint(const std::vector<double>& valid, int height,
                                               int width) {
  const auto& g = gauss_kernel();
  const int vw = width - kWindow + 1;
  const int vh = height - kWindow + 1;
  std::vector<double> vert(static_cast<std::size_t>(height) * vw, 0.0);
  for (int r = 0; r < vh; ++r)
    for (int c = 0; c < vw; ++c) {
      double v = valid[static_cast<std::size_t>(r) * vw + c];
      for (int u = 0; u < kWindow; ++u) vert[static_cast<std::size_t>(r + u) * vw + c] += g[u] * v;
    }
  std::vector<double> out(static_cast<std::size_t>(height) * width, 0.0);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < vw; ++c) {
      double v = vert[static_cast<std::size_t>(r) * vw + c];
      for (int u = 0; u < kWindow; ++u) out[static_cast<std::size_t>(r) * width + c + u] += g[u] * v;
    }
  return out;
}

struct SsimMoments {
  int vh = 0, vw = 0;
  std::vector<double> mu_x, mu_y, var_x, var_y, cov;
};

inline SsimMoments ssim_moments(const std::vector<double>& x, const std::vector<double>& y,
                                int height, int width) {
  SsimMoments m;
  m.vh = height - kWindow + 1;
  m.vw = width - kWindow + 1;
  m.mu_x = gauss_valid(x, height, width);
  m.mu_y = gauss_valid(y, height, width);
  std::vector<double> xx(x.size()), yy(y.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  m.var_x = gauss_valid(xx, height, width);
  m.var_y = gauss_valid(yy, height, width);
  m.cov = gauss_valid(xy, height, width);
  for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
    m.var_x[i] -= m.mu_x[i] * m.mu_x[i];
    m.var_y[i] -= m.mu_y[i] * m.mu_y[i];
    m.cov[i] -= m.mu_x[i] * m.mu_y[i];
  }
  return m;
}

inline double luminance_term(const SsimMoments& m, std::size_t i) {
  return (2.0 * m.mu_x[i] * m.mu_y[i] + kSsimC1) /
         (m.mu_x[i] * m.mu_x[i] + m.mu_y[i] * m.mu_y[i] + kSsimC1);
}

inline double contrast_structure_term(const SsimMoments& m, std::size_t i) {
  return (2.0 * m.cov[i] + kSsimC2) / (m.var_x[i] + m.var_y[i] + kSsimC2);
}

// 2x2 mean pooling; trailing odd row/column dropped.
inline std::vector<double> downsample2(const std::vector<double>& plane, int height, int width,
                                       int& out_h, int& out_w) {
  out_h = height / 2;
  out_w = width / 2;
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int r = 0; r < out_h; ++r)
    for (int c = 0; c < out_w; ++c) {
      std::size_t base = static_cast<std::size_t>(2 * r) * width + 2 * c;
      out[static_cast<std::size_t>(r) * out_w + c] =
          0.25 * (plane[base] + plane[base + 1] + plane[base + width] + plane[base + width + 1]);
    }
  return out;
}

// Adjoint of downsample2.
inline std::vector<double> upsample2_adjoint(const std::vector<double>& small, int small_h,
                                             int small_w, int height, int width) {
  std::vector<double> out(static_cast<std::size_t>(height) * width, 0.0);
  for (int r = 0; r < small_h; ++r)
    for (int c = 0; c < small_w; ++c) {
      double v = 0.25 * small[static_cast<std::size_t>(r) * small_w + c];
      std::size_t base = static_cast<std::size_t>(2 * r) * width + 2 * c;
      out[base] += v;
      out[base + 1] += v;
      out[base + width] += v;
      out[base + width + 1] += v;
    }
  return out;
}

inline const std::array<double, 5>& msssim_weights() {
  static const std::array<double, 5> w = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  return w;
}

// Number of usable MS-SSIM scales for an image of the given size.
inline int msssim_scale_count(int height, int width) {
  int scales = 0;
  int h = height, w = width;
  while (scales < 5 && h >= kWindow && w >= kWindow) {
    ++scales;
    h /= 2;
    w /= 2;
  }
  return scales;
}

}  // namespace lasi::detail
