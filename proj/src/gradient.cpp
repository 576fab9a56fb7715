#include "lasi/gradient.hpp"

#include <cmath>
#include <cstring>

#include "lasi/parallel.hpp"
#include "ssim_internal.hpp"

namespace lasi {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_no_nan(const ImageTensor& g) {
  for (double v : g.data)
    if (std::isnan(v)) throw NumericalError("NaN in gradient output");
}

// ---------------------------------------------------------------------------
// LASI: reverse-mode adjoints through gather -> rank-one -> weigh-and-sum ->
// pseudo-inverse solve -> per-column norm average.
//
// For the consistent system w = A+ b (b always lies in range(A) here), a
// perturbation satisfies
//   dw = -A+ dA w + (I - A+A) dA A+ w + A+ db,
// which gives the adjoints
//   b_adj = A+ w_bar
//   A_adj = -(A+ w_bar) w^T + ((I - A+A) w_bar)(A+ w)^T.
// The second term is the null-space correction; it vanishes at full rank.
// ---------------------------------------------------------------------------

void solve_adjoint_cell(const SymmetricPinv& pinv, Eigen::Ref<const lasi::MatrixXld> a,
                        Eigen::Ref<const lasi::VectorXld> b, const double* other_col,
                        double inv_k, int dim, Eigen::Ref<MatrixXd> a_adj,
                        Eigen::Ref<VectorXd> b_adj, double* w_out) {
  VectorXd w = pinv.solve(a, b).cast<double>();
  Map<const VectorXd> wo(other_col, dim);
  VectorXd diff = w - wo;
  double norm = diff.norm();
  if (w_out) std::memcpy(w_out, w.data(), sizeof(double) * dim);
  if (norm == 0.0) {  // subgradient convention at the kink
    a_adj.setZero();
    b_adj.setZero();
    return;
  }
  VectorXd w_bar = diff * (inv_k / norm);
  VectorXd s = pinv.pinv_apply(w_bar);
  VectorXd q = w_bar - pinv.range_project(w_bar);
  VectorXd pw = pinv.pinv_apply(w);
  a_adj.noalias() = -s * w.transpose();
  a_adj.noalias() += q * pw.transpose();
  b_adj = s;
}

ImageTensor lasi_grad_per_channel(const ImageTensor& img, const EmbeddingMatrix& other,
                                  const LasiConfig& cfg, int threads) {
  const int dim = cfg.n;
  const int fwd_stride = dim * dim + dim + 1;
  const int adj_stride = dim * dim + dim;
  const std::size_t sites = static_cast<std::size_t>(img.height) * img.width;
  const double inv_k = 1.0 / static_cast<double>(other.columns);
  NeighborOffsets offsets = build_offsets(cfg.n);

  ImageTensor grad(img.height, img.width, img.channels);
  for (int ch = 0; ch < img.channels; ++ch) {
    std::vector<double> plane = img.plane(ch);
    std::vector<long double> acc = causal_weighted_sum_fast_ld(
        build_plane_cells_ld(plane, img.height, img.width, offsets, cfg.pad), img.height,
        img.width, fwd_stride, cfg.omega);

    std::vector<double> adj_cells(sites * adj_stride, 0.0);
    parallel_for(sites, threads, [&](std::size_t s) {
      const long double* cell = acc.data() + s * fwd_stride;
      Map<const lasi::MatrixXld> a(cell, dim, dim);
      Map<const lasi::VectorXld> b(cell + dim * dim, dim);
      SymmetricPinv pinv(a, cfg.pinv_rcond);
      Map<MatrixXd> a_adj(adj_cells.data() + s * adj_stride, dim, dim);
      Map<VectorXd> b_adj(adj_cells.data() + s * adj_stride + dim * dim, dim);
      std::int64_t col = static_cast<std::int64_t>(s) * img.channels + ch;
      solve_adjoint_cell(pinv, a, b, other.col(col), inv_k, dim, a_adj, b_adj, nullptr);
    });

    std::vector<double> cell_adj = anticausal_weighted_sum_fast(
        adj_cells, img.height, img.width, adj_stride, cfg.omega);

    VectorXd neigh(dim);
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        std::size_t s = static_cast<std::size_t>(r) * img.width + c;
        Map<const MatrixXd> a_adj(cell_adj.data() + s * adj_stride, dim, dim);
        Map<const VectorXd> b_adj(cell_adj.data() + s * adj_stride + dim * dim, dim);
        gather_neighborhood(plane, img.height, img.width, r, c, offsets, cfg.pad,
                            {neigh.data(), static_cast<std::size_t>(dim)});
        double x = plane[s];
        VectorXd n_adj = (a_adj + a_adj.transpose()) * neigh + x * b_adj;
        grad.at(r, c, ch) += neigh.dot(b_adj);
        for (int j = 0; j < dim; ++j) {
          int rr = r + offsets.offsets[j].first;
          int cc = c + offsets.offsets[j].second;
          if (rr >= 0 && rr < img.height && cc >= 0 && cc < img.width)
            grad.at(rr, cc, ch) += n_adj(j);
        }
      }
    }
  }
  return grad;
}

ImageTensor lasi_grad_joint(const ImageTensor& img, const EmbeddingMatrix& other,
                            const LasiConfig& cfg, int threads) {
  const int ch_count = img.channels;
  const int dim = cfg.n * ch_count;
  const int fwd_stride = dim * dim + dim * ch_count + ch_count;
  const int adj_stride = dim * dim + dim * ch_count;
  const std::size_t sites = static_cast<std::size_t>(img.height) * img.width;
  const double inv_k = 1.0 / static_cast<double>(other.columns);
  NeighborOffsets offsets = build_offsets(cfg.n);

  std::vector<long double> acc = causal_weighted_sum_fast_ld(
      build_joint_cells_ld(img, offsets, cfg.pad), img.height, img.width, fwd_stride,
      cfg.omega);

  std::vector<double> adj_cells(sites * adj_stride, 0.0);
  parallel_for(sites, threads, [&](std::size_t s) {
    const long double* cell = acc.data() + s * fwd_stride;
    Map<const lasi::MatrixXld> a(cell, dim, dim);
    SymmetricPinv pinv(a, cfg.pinv_rcond);
    Map<MatrixXd> a_adj(adj_cells.data() + s * adj_stride, dim, dim);
    a_adj.setZero();
    MatrixXd a_adj_t(dim, dim);
    VectorXd b_adj_t(dim);
    for (int t = 0; t < ch_count; ++t) {
      Map<const lasi::VectorXld> b(cell + dim * dim + static_cast<std::size_t>(t) * dim, dim);
      std::int64_t col = static_cast<std::int64_t>(s) * ch_count + t;
      solve_adjoint_cell(pinv, a, b, other.col(col), inv_k, dim, a_adj_t, b_adj_t, nullptr);
      a_adj += a_adj_t;
      std::memcpy(adj_cells.data() + s * adj_stride + dim * dim +
                      static_cast<std::size_t>(t) * dim,
                  b_adj_t.data(), sizeof(double) * dim);
    }
  });

  std::vector<double> cell_adj =
      anticausal_weighted_sum_fast(adj_cells, img.height, img.width, adj_stride, cfg.omega);

  ImageTensor grad(img.height, img.width, ch_count);
  VectorXd feat(dim);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      std::size_t s = static_cast<std::size_t>(r) * img.width + c;
      Map<const MatrixXd> a_adj(cell_adj.data() + s * adj_stride, dim, dim);
      for (int j = 0; j < cfg.n; ++j) {
        int rr = r + offsets.offsets[j].first;
        int cc = c + offsets.offsets[j].second;
        bool in = rr >= 0 && rr < img.height && cc >= 0 && cc < img.width;
        for (int ch = 0; ch < ch_count; ++ch)
          feat(j * ch_count + ch) = in ? img.at(rr, cc, ch) : cfg.pad;
      }
      VectorXd feat_adj = (a_adj + a_adj.transpose()) * feat;
      for (int t = 0; t < ch_count; ++t) {
        Map<const VectorXd> b_adj(cell_adj.data() + s * adj_stride + dim * dim +
                                      static_cast<std::size_t>(t) * dim,
                                  dim);
        grad.at(r, c, t) += feat.dot(b_adj);
        feat_adj += img.at(r, c, t) * b_adj;
      }
      for (int j = 0; j < cfg.n; ++j) {
        int rr = r + offsets.offsets[j].first;
        int cc = c + offsets.offsets[j].second;
        if (rr >= 0 && rr < img.height && cc >= 0 && cc < img.width)
          for (int ch = 0; ch < ch_count; ++ch)
            grad.at(rr, cc, ch) += feat_adj(j * ch_count + ch);
      }
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// SSIM / MS-SSIM adjoints. For each valid position the map value depends on
// the filtered fields G*y, G*(y^2), G*(x*y); per-position partials are
// assembled back onto the pixel grid with the adjoint correlation.
// ---------------------------------------------------------------------------

// Gradient (w.r.t. y) of the mean over valid positions of either l*cs
// (include_luminance) or cs alone.
std::vector<double> ssim_map_grad_plane(const std::vector<double>& x,
                                        const std::vector<double>& y, int height, int width,
                                        bool include_luminance) {
  detail::SsimMoments m = detail::ssim_moments(x, y, height, width);
  const std::size_t count = m.mu_x.size();
  std::vector<double> d_mu(count), d_yy(count), d_xy(count);
  for (std::size_t i = 0; i < count; ++i) {
    double mux = m.mu_x[i], muy = m.mu_y[i];
    double cs = detail::contrast_structure_term(m, i);
    double denom_c = m.var_x[i] + m.var_y[i] + detail::kSsimC2;
    double dv_dvar, dv_dcov, dv_dmu;
    if (include_luminance) {
      double l = detail::luminance_term(m, i);
      double denom_l = mux * mux + muy * muy + detail::kSsimC1;
      double dl_dmu = (2.0 * mux - 2.0 * l * muy) / denom_l;
      dv_dmu = cs * dl_dmu;
      dv_dvar = l * (-cs / denom_c);
      dv_dcov = l * (2.0 / denom_c);
    } else {
      dv_dmu = 0.0;
      dv_dvar = -cs / denom_c;
      dv_dcov = 2.0 / denom_c;
    }
    // var_y = G*(y^2) - mu_y^2 and cov = G*(x*y) - mu_x*mu_y fold extra
    // mu_y dependence into the G*y adjoint.
    d_mu[i] = dv_dmu + dv_dvar * (-2.0 * muy) + dv_dcov * (-mux);
    d_yy[i] = dv_dvar;
    d_xy[i] = dv_dcov;
  }
  std::vector<double> g_mu = detail::gauss_valid_adjoint(d_mu, height, width);
  std::vector<double> g_yy = detail::gauss_valid_adjoint(d_yy, height, width);
  std::vector<double> g_xy = detail::gauss_valid_adjoint(d_xy, height, width);
  std::vector<double> grad(y.size());
  double inv_count = 1.0 / static_cast<double>(count);
  for (std::size_t q = 0; q < y.size(); ++q)
    grad[q] = inv_count * (g_mu[q] + 2.0 * y[q] * g_yy[q] + x[q] * g_xy[q]);
  return grad;
}

double mean_map_value(const std::vector<double>& x, const std::vector<double>& y, int height,
                      int width, bool include_luminance) {
  detail::SsimMoments m = detail::ssim_moments(x, y, height, width);
  double total = 0.0;
  for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
    double v = detail::contrast_structure_term(m, i);
    if (include_luminance) v *= detail::luminance_term(m, i);
    total += v;
  }
  return total / static_cast<double>(m.mu_x.size());
}

ImageTensor ssim_grad(const ImageTensor& x, const ImageTensor& y) {
  if (x.height < detail::kWindow || x.width < detail::kWindow)
    throw ValidationError("image smaller than one SSIM window");
  ImageTensor grad(y.height, y.width, y.channels);
  for (int ch = 0; ch < y.channels; ++ch) {
    std::vector<double> gp =
        ssim_map_grad_plane(x.plane(ch), y.plane(ch), x.height, x.width, true);
    for (int r = 0; r < y.height; ++r)
      for (int c = 0; c < y.width; ++c)
        grad.at(r, c, ch) = gp[static_cast<std::size_t>(r) * y.width + c] / y.channels;
  }
  return grad;
}

ImageTensor ms_ssim_grad(const ImageTensor& x, const ImageTensor& y) {
  const int scales = detail::msssim_scale_count(x.height, x.width);
  if (scales == 0) throw ValidationError("image smaller than one SSIM window");
  const auto& base_w = detail::msssim_weights();
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += base_w[s];

  ImageTensor grad(y.height, y.width, y.channels);
  for (int ch = 0; ch < y.channels; ++ch) {
    std::vector<std::vector<double>> xs{x.plane(ch)}, ys{y.plane(ch)};
    std::vector<int> hs{x.height}, wsz{x.width};
    for (int s = 1; s < scales; ++s) {
      int nh, nw;
      xs.push_back(detail::downsample2(xs.back(), hs.back(), wsz.back(), nh, nw));
      ys.push_back(detail::downsample2(ys.back(), hs.back(), wsz.back(), nh, nw));
      hs.push_back(nh);
      wsz.push_back(nw);
    }

    std::vector<double> terms(scales);
    double value = 1.0;
    bool zero_term = false;
    for (int s = 0; s < scales; ++s) {
      bool lum = s == scales - 1;
      terms[s] = mean_map_value(xs[s], ys[s], hs[s], wsz[s], lum);
      if (terms[s] <= 0.0) zero_term = true;
      double clamped = std::max(terms[s], 0.0);
      value *= std::pow(clamped, base_w[s] / weight_sum);
    }

    if (!zero_term) {
      for (int s = 0; s < scales; ++s) {
        double coef = value * (base_w[s] / weight_sum) / terms[s];
        std::vector<double> g =
            ssim_map_grad_plane(xs[s], ys[s], hs[s], wsz[s], s == scales - 1);
        for (double& v : g) v *= coef;
        for (int up = s; up > 0; --up)
          g = detail::upsample2_adjoint(g, hs[up], wsz[up], hs[up - 1], wsz[up - 1]);
        for (int r = 0; r < y.height; ++r)
          for (int c = 0; c < y.width; ++c)
            grad.at(r, c, ch) += g[static_cast<std::size_t>(r) * y.width + c] / y.channels;
      }
    }
  }
  return grad;
}

ImageTensor grad_wrt_second(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                            int threads) {
  switch (metric.kind) {
    case MetricId::Kind::Mse: {
      ImageTensor grad(y.height, y.width, y.channels);
      double inv_k = 1.0 / static_cast<double>(y.size());
      for (std::size_t i = 0; i < y.size(); ++i)
        grad.data[i] = 2.0 * (y.data[i] - x.data[i]) * inv_k;
      return grad;
    }
    case MetricId::Kind::Psnr: {
      double m = mse(x, y);
      if (m == 0.0) throw NumericalError("psnr gradient undefined for identical images");
      double scale = -10.0 / (std::log(10.0) * m);
      ImageTensor grad(y.height, y.width, y.channels);
      double inv_k = 1.0 / static_cast<double>(y.size());
      for (std::size_t i = 0; i < y.size(); ++i)
        grad.data[i] = scale * 2.0 * (y.data[i] - x.data[i]) * inv_k;
      return grad;
    }
    case MetricId::Kind::Ssim:
      return ssim_grad(x, y);
    case MetricId::Kind::MsSsim:
      return ms_ssim_grad(x, y);
    case MetricId::Kind::Lasi: {
      EmbeddingMatrix other = solve_embeddings(x, metric.lasi, threads);
      return lasi_distance_grad(y, other, metric.lasi, threads);
    }
  }
  throw ValidationError("invalid metric kind");
}

}  // namespace

ImageTensor lasi_distance_grad(const ImageTensor& img, const EmbeddingMatrix& other,
                               const LasiConfig& cfg, int threads) {
  cfg.validate();
  const std::int64_t k = static_cast<std::int64_t>(img.height) * img.width * img.channels;
  const int want_dim = cfg.mode == ChannelMode::PerChannel ? cfg.n : cfg.n * img.channels;
  if (other.columns != k || other.dim != want_dim)
    throw ValidationError("embedding shape does not match image/config");
  ImageTensor grad = cfg.mode == ChannelMode::PerChannel
                         ? lasi_grad_per_channel(img, other, cfg, threads)
                         : lasi_grad_joint(img, other, cfg, threads);
  check_no_nan(grad);
  return grad;
}

ImageTensor grad_metric(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                        Wrt wrt, int threads) {
  if (!x.same_shape(y)) throw ValidationError("images have different dimensions");
  // Every implemented metric is symmetric in its arguments.
  ImageTensor grad = wrt == Wrt::Second ? grad_wrt_second(metric, x, y, threads)
                                        : grad_wrt_second(metric, y, x, threads);
  check_no_nan(grad);
  return grad;
}

ImageTensor ranking_distance_grad(const MetricId& metric, const ImageTensor& x,
                                  const ImageTensor& y, Wrt wrt, int threads) {
  ImageTensor grad = grad_metric(metric, x, y, wrt, threads);
  bool flip = metric.kind == MetricId::Kind::Psnr || metric.kind == MetricId::Kind::Ssim ||
              metric.kind == MetricId::Kind::MsSsim;
  if (flip)
    for (double& v : grad.data) v = -v;
  return grad;
}

GradientReport fd_check(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                        Wrt wrt, double step, int threads) {
  if (!(step > 0.0)) throw ValidationError("fd_check: step must be > 0");
  GradientReport report;
  report.analytic = grad_metric(metric, x, y, wrt, threads);
  const ImageTensor& target = wrt == Wrt::First ? x : y;
  report.fd = ImageTensor(target.height, target.width, target.channels);

  ImageTensor probe = target;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    double saved = probe.data[i];
    probe.data[i] = saved + step;
    double hi = wrt == Wrt::First ? evaluate(metric, probe, y, threads)
                                  : evaluate(metric, x, probe, threads);
    probe.data[i] = saved - step;
    double lo = wrt == Wrt::First ? evaluate(metric, probe, y, threads)
                                  : evaluate(metric, x, probe, threads);
    probe.data[i] = saved;
    report.fd.data[i] = (hi - lo) / (2.0 * step);
  }

  for (std::size_t i = 0; i < report.fd.size(); ++i) {
    double a = report.analytic.data[i];
    double f = report.fd.data[i];
    report.max_abs_err = std::max(report.max_abs_err, std::abs(a - f));
    if (std::abs(f) > 1e-6)
      report.max_rel_err = std::max(report.max_rel_err, std::abs(a - f) / std::abs(f));
  }
  return report;
}

}  // namespace lasi
