#include "lasi/wls.hpp"

#include <cmath>
#include <cstring>

#include "lasi/parallel.hpp"

namespace lasi {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> omega_powers(double omega, int max_dist) {
  std::vector<double> pow_table(static_cast<std::size_t>(max_dist) + 1);
  pow_table[0] = 1.0;
  for (int d = 1; d <= max_dist; ++d) pow_table[d] = pow_table[d - 1] * omega;
  return pow_table;
}

void check_finite_column(const double* w, int dim, std::int64_t pixel) {
  for (int m = 0; m < dim; ++m) {
    if (!std::isfinite(w[m]))
      throw NumericalError("non-finite embedding at pixel " + std::to_string(pixel));
  }
}

// The scan and the payload builders are templated on the accumulator scalar:
// the public interface works in double, while the solve path runs the same
// arithmetic in long double so that rounding noise in A and b stays well below
// the smallest eigenvalues the pseudo-inverse keeps.
template <typename T>
std::vector<T> scan_fast(const std::vector<T>& cells, int height, int width, int stride,
                         T omega) {
  std::vector<T> out(cells.size(), T(0));
  const std::size_t row_len = static_cast<std::size_t>(width) * stride;
  std::vector<T> vert(row_len, T(0));    // U_r[c]: decayed mass of rows above
  std::vector<T> smooth(row_len, T(0));  // H_r[c]: two-sided row smoothing
  std::vector<T> left(stride, T(0));     // L_r[c]: decayed prefix in the row

  for (int r = 0; r < height; ++r) {
    const T* row = cells.data() + static_cast<std::size_t>(r) * row_len;
    T* dst_row = out.data() + static_cast<std::size_t>(r) * row_len;

    std::fill(left.begin(), left.end(), T(0));
    for (int c = 0; c < width; ++c) {
      const T* cell = row + static_cast<std::size_t>(c) * stride;
      const T* up = vert.data() + static_cast<std::size_t>(c) * stride;
      T* dst = dst_row + static_cast<std::size_t>(c) * stride;
      for (int m = 0; m < stride; ++m) {
        dst[m] = up[m] + left[m];
        left[m] = omega * (left[m] + cell[m]);
      }
    }

    // smooth[c] = sum_{c'} omega^{|c-c'|} row[c'] via forward/backward passes.
    for (int c = 0; c < width; ++c) {
      const T* cell = row + static_cast<std::size_t>(c) * stride;
      T* h = smooth.data() + static_cast<std::size_t>(c) * stride;
      if (c == 0) {
        std::copy(cell, cell + stride, h);
      } else {
        const T* prev = smooth.data() + static_cast<std::size_t>(c - 1) * stride;
        for (int m = 0; m < stride; ++m) h[m] = cell[m] + omega * prev[m];
      }
    }
    std::vector<T> back(stride, T(0));
    for (int c = width - 1; c >= 0; --c) {
      const T* cell = row + static_cast<std::size_t>(c) * stride;
      T* h = smooth.data() + static_cast<std::size_t>(c) * stride;
      for (int m = 0; m < stride; ++m) {
        h[m] += back[m];
        back[m] = omega * (back[m] + cell[m]);
      }
    }

    T* u = vert.data();
    const T* h = smooth.data();
    for (std::size_t m = 0; m < row_len; ++m) u[m] = omega * (u[m] + h[m]);
  }
  return out;
}

template <typename T>
std::vector<T> plane_cells(const std::vector<double>& plane, int height, int width,
                           const NeighborOffsets& offsets, double pad) {
  const int n = offsets.size();
  const int stride = n * n + n + 1;
  std::vector<T> cells(static_cast<std::size_t>(height) * width * stride);
  std::vector<double> neigh(n);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      std::size_t s = static_cast<std::size_t>(r) * width + c;
      gather_neighborhood(plane, height, width, r, c, offsets, pad, neigh);
      T x = static_cast<T>(plane[s]);
      T* cell = cells.data() + s * stride;
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p)
          cell[q * n + p] = static_cast<T>(neigh[p]) * static_cast<T>(neigh[q]);
      for (int p = 0; p < n; ++p) cell[n * n + p] = x * static_cast<T>(neigh[p]);
      cell[n * n + n] = x * x;
    }
  }
  return cells;
}

template <typename T>
std::vector<T> joint_cells(const ImageTensor& img, const NeighborOffsets& offsets, double pad) {
  const int n = offsets.size();
  const int ch_count = img.channels;
  const int dim = n * ch_count;
  const int stride = dim * dim + dim * ch_count + ch_count;
  std::vector<T> cells(static_cast<std::size_t>(img.height) * img.width * stride);
  std::vector<T> feat(dim);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      std::size_t s = static_cast<std::size_t>(r) * img.width + c;
      for (int j = 0; j < n; ++j) {
        int rr = r + offsets.offsets[j].first;
        int cc = c + offsets.offsets[j].second;
        bool in = rr >= 0 && rr < img.height && cc >= 0 && cc < img.width;
        for (int ch = 0; ch < ch_count; ++ch)
          feat[j * ch_count + ch] = static_cast<T>(in ? img.at(rr, cc, ch) : pad);
      }
      T* cell = cells.data() + s * stride;
      for (int q = 0; q < dim; ++q)
        for (int p = 0; p < dim; ++p) cell[q * dim + p] = feat[p] * feat[q];
      for (int t = 0; t < ch_count; ++t) {
        T x = static_cast<T>(img.at(r, c, t));
        for (int p = 0; p < dim; ++p) cell[dim * dim + t * dim + p] = x * feat[p];
        cell[dim * dim + dim * ch_count + t] = x * x;
      }
    }
  }
  return cells;
}

}  // namespace

void rank_one_transform(Eigen::Ref<const VectorXd> neigh, double value,
                        Eigen::Ref<MatrixXd> a_out, Eigen::Ref<VectorXd> b_out) {
  a_out.noalias() = neigh * neigh.transpose();
  b_out.noalias() = value * neigh;
}

std::vector<double> causal_weighted_sum_naive(const std::vector<double>& cells, int height,
                                              int width, int stride, double omega) {
  std::vector<double> out(cells.size(), 0.0);
  std::vector<double> pw = omega_powers(omega, height + width);
  for (int ri = 0; ri < height; ++ri) {
    for (int ci = 0; ci < width; ++ci) {
      std::size_t i = static_cast<std::size_t>(ri) * width + ci;
      double* dst = out.data() + i * stride;
      for (std::size_t j = 0; j < i; ++j) {
        int rj = static_cast<int>(j) / width;
        int cj = static_cast<int>(j) % width;
        double w = pw[std::abs(ri - rj) + std::abs(ci - cj)];
        const double* src = cells.data() + j * stride;
        for (int m = 0; m < stride; ++m) dst[m] += w * src[m];
      }
    }
  }
  return out;
}

std::vector<double> causal_weighted_sum_fast(const std::vector<double>& cells, int height,
                                             int width, int stride, double omega) {
  return scan_fast<double>(cells, height, width, stride, omega);
}

std::vector<double> anticausal_weighted_sum_fast(const std::vector<double>& cells, int height,
                                                 int width, int stride, double omega) {
  // sum over later pixels == causal sum on the 180-degree rotated grid.
  const std::size_t count = static_cast<std::size_t>(height) * width;
  std::vector<double> rotated(cells.size());
  for (std::size_t s = 0; s < count; ++s)
    std::memcpy(rotated.data() + (count - 1 - s) * stride, cells.data() + s * stride,
                sizeof(double) * stride);
  std::vector<double> scanned = causal_weighted_sum_fast(rotated, height, width, stride, omega);
  std::vector<double> out(cells.size());
  for (std::size_t s = 0; s < count; ++s)
    std::memcpy(out.data() + (count - 1 - s) * stride, scanned.data() + s * stride,
                sizeof(double) * stride);
  return out;
}

std::vector<double> build_plane_cells(const std::vector<double>& plane, int height, int width,
                                      const NeighborOffsets& offsets, double pad) {
  return plane_cells<double>(plane, height, width, offsets, pad);
}

std::vector<double> build_joint_cells(const ImageTensor& img, const NeighborOffsets& offsets,
                                      double pad) {
  return joint_cells<double>(img, offsets, pad);
}

std::vector<long double> build_plane_cells_ld(const std::vector<double>& plane, int height,
                                              int width, const NeighborOffsets& offsets,
                                              double pad) {
  return plane_cells<long double>(plane, height, width, offsets, pad);
}

std::vector<long double> build_joint_cells_ld(const ImageTensor& img,
                                              const NeighborOffsets& offsets, double pad) {
  return joint_cells<long double>(img, offsets, pad);
}

std::vector<long double> causal_weighted_sum_fast_ld(const std::vector<long double>& cells,
                                                     int height, int width, int stride,
                                                     double omega) {
  return scan_fast<long double>(cells, height, width, stride,
                                static_cast<long double>(omega));
}

AccumulatorState accumulate_naive(const std::vector<double>& plane, int height, int width,
                                  const LasiConfig& cfg) {
  cfg.validate();
  NeighborOffsets offsets = build_offsets(cfg.n);
  AccumulatorState acc;
  acc.height = height;
  acc.width = width;
  acc.dim = cfg.n;
  acc.targets = 1;
  acc.cells = causal_weighted_sum_naive(build_plane_cells(plane, height, width, offsets, cfg.pad),
                                        height, width, acc.stride(), cfg.omega);
  return acc;
}

AccumulatorState accumulate_fast(const std::vector<double>& plane, int height, int width,
                                 const LasiConfig& cfg) {
  cfg.validate();
  NeighborOffsets offsets = build_offsets(cfg.n);
  AccumulatorState acc;
  acc.height = height;
  acc.width = width;
  acc.dim = cfg.n;
  acc.targets = 1;
  acc.cells = causal_weighted_sum_fast(build_plane_cells(plane, height, width, offsets, cfg.pad),
                                       height, width, acc.stride(), cfg.omega);
  return acc;
}

SymmetricPinv::SymmetricPinv(Eigen::Ref<const MatrixXd> a, double rcond) {
  init(a.cast<long double>(), rcond);
}

SymmetricPinv::SymmetricPinv(Eigen::Ref<const MatrixXld> a, double rcond) { init(a, rcond); }

void SymmetricPinv::init(const MatrixXld& a, double rcond) {
  Eigen::SelfAdjointEigenSolver<MatrixXld> es(a);
  if (es.info() != Eigen::Success)
    throw NumericalError("symmetric eigendecomposition did not converge");
  vecs_ = es.eigenvectors();
  const VectorXld& vals = es.eigenvalues();
  long double max_val = vals.size() > 0 ? std::max<long double>(0.0L, vals(vals.size() - 1)) : 0.0L;
  long double cutoff = static_cast<long double>(rcond) * max_val;
  inv_vals_ = VectorXld::Zero(vals.size());
  for (int m = 0; m < vals.size(); ++m) {
    if (vals(m) > cutoff && vals(m) > 0.0L) {
      inv_vals_(m) = 1.0L / vals(m);
      ++rank_;
    }
  }
}

VectorXd SymmetricPinv::pinv_apply(Eigen::Ref<const VectorXd> v) const {
  VectorXld vx = v.cast<long double>();
  return (vecs_ * inv_vals_.cwiseProduct(vecs_.transpose() * vx)).cast<double>();
}

VectorXd SymmetricPinv::solve(Eigen::Ref<const MatrixXd> a,
                              Eigen::Ref<const VectorXd> b) const {
  return solve(a.cast<long double>().eval(), b.cast<long double>().eval()).cast<double>();
}

VectorXld SymmetricPinv::solve(Eigen::Ref<const MatrixXld> a,
                               Eigen::Ref<const VectorXld> b) const {
  VectorXld w = vecs_ * inv_vals_.cwiseProduct(vecs_.transpose() * b);
  VectorXld r = b - a * w;
  w += vecs_ * inv_vals_.cwiseProduct(vecs_.transpose() * r);
  return w;
}

VectorXd SymmetricPinv::range_project(Eigen::Ref<const VectorXd> v) const {
  VectorXld coeff = vecs_.transpose() * v.cast<long double>();
  for (int m = 0; m < coeff.size(); ++m)
    if (inv_vals_(m) == 0.0L) coeff(m) = 0.0L;
  return (vecs_ * coeff).cast<double>();
}

EmbeddingMatrix solve_embeddings(const ImageTensor& img, const LasiConfig& cfg, int threads) {
  cfg.validate();
  NeighborOffsets offsets = build_offsets(cfg.n);
  const int ch_count = img.channels;
  const std::size_t sites = static_cast<std::size_t>(img.height) * img.width;

  EmbeddingMatrix emb;
  emb.columns = static_cast<std::int64_t>(sites) * ch_count;
  emb.dim = cfg.mode == ChannelMode::PerChannel ? cfg.n : cfg.n * ch_count;
  emb.data.assign(static_cast<std::size_t>(emb.columns) * emb.dim, 0.0);

  if (cfg.mode == ChannelMode::PerChannel) {
    const int dim = cfg.n;
    const int stride = dim * dim + dim + 1;
    for (int ch = 0; ch < ch_count; ++ch) {
      std::vector<long double> acc =
          scan_fast(plane_cells<long double>(img.plane(ch), img.height, img.width, offsets,
                                             cfg.pad),
                    img.height, img.width, stride, static_cast<long double>(cfg.omega));
      parallel_for(sites, threads, [&](std::size_t s) {
        const long double* cell = acc.data() + s * stride;
        Map<const MatrixXld> a(cell, dim, dim);
        Map<const VectorXld> b(cell + dim * dim, dim);
        SymmetricPinv pinv(a, cfg.pinv_rcond);
        VectorXd w = pinv.solve(a, b).cast<double>();
        std::int64_t col = static_cast<std::int64_t>(s) * ch_count + ch;
        std::memcpy(emb.col(col), w.data(), sizeof(double) * dim);
        check_finite_column(emb.col(col), dim, col);
      });
    }
  } else {
    const int dim = cfg.n * ch_count;
    const int stride = dim * dim + dim * ch_count + ch_count;
    std::vector<long double> acc =
        scan_fast(joint_cells<long double>(img, offsets, cfg.pad), img.height, img.width,
                  stride, static_cast<long double>(cfg.omega));
    parallel_for(sites, threads, [&](std::size_t s) {
      const long double* cell = acc.data() + s * stride;
      Map<const MatrixXld> a(cell, dim, dim);
      SymmetricPinv pinv(a, cfg.pinv_rcond);
      for (int t = 0; t < ch_count; ++t) {
        Map<const VectorXld> b(cell + dim * dim + static_cast<std::size_t>(t) * dim, dim);
        VectorXd w = pinv.solve(a, b).cast<double>();
        std::int64_t col = static_cast<std::int64_t>(s) * ch_count + t;
        std::memcpy(emb.col(col), w.data(), sizeof(double) * dim);
        check_finite_column(emb.col(col), dim, col);
      }
    });
  }
  return emb;
}

Prediction predict(const ImageTensor& img, const EmbeddingMatrix& emb, const LasiConfig& cfg) {
  cfg.validate();
  const int ch_count = img.channels;
  const std::size_t sites = static_cast<std::size_t>(img.height) * img.width;
  const std::int64_t k = static_cast<std::int64_t>(sites) * ch_count;
  const int want_dim = cfg.mode == ChannelMode::PerChannel ? cfg.n : cfg.n * ch_count;
  if (emb.columns != k || emb.dim != want_dim)
    throw ValidationError("embedding shape does not match image/config");

  NeighborOffsets offsets = build_offsets(cfg.n);
  Prediction out;
  out.predicted = ImageTensor(img.height, img.width, ch_count);
  out.residual = ImageTensor(img.height, img.width, ch_count);
  out.train_loss.assign(static_cast<std::size_t>(k), 0.0);

  auto emit = [&](std::size_t s, int ch, const long double* cell, int dim, int t,
                  Eigen::Ref<const VectorXd> feat) {
    std::int64_t col = static_cast<std::int64_t>(s) * ch_count + ch;
    Map<const VectorXd> w(emb.col(col), dim);
    double xhat = w.dot(feat);
    double x = img.data[static_cast<std::size_t>(col)];
    out.predicted.data[static_cast<std::size_t>(col)] = xhat;
    out.residual.data[static_cast<std::size_t>(col)] = (x - xhat) * (x - xhat);
    Map<const MatrixXld> a(cell, dim, dim);
    Map<const VectorXld> b(cell + dim * dim + static_cast<std::size_t>(t) * dim, dim);
    long double csum =
        cell[dim * dim + dim * (cfg.mode == ChannelMode::PerChannel ? 1 : ch_count) + t];
    // The three terms nearly cancel when the fit is good, so evaluate the
    // quadratic form in extended precision before rounding the result.
    VectorXld wx = w.cast<long double>();
    long double quad = wx.dot(a * wx) - 2.0L * wx.dot(b) + csum;
    out.train_loss[static_cast<std::size_t>(col)] = static_cast<double>(quad);
  };

  if (cfg.mode == ChannelMode::PerChannel) {
    const int dim = cfg.n;
    const int stride = dim * dim + dim + 1;
    VectorXd neigh(dim);
    for (int ch = 0; ch < ch_count; ++ch) {
      std::vector<double> plane = img.plane(ch);
      std::vector<long double> acc =
          scan_fast(plane_cells<long double>(plane, img.height, img.width, offsets, cfg.pad),
                    img.height, img.width, stride, static_cast<long double>(cfg.omega));
      for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
          std::size_t s = static_cast<std::size_t>(r) * img.width + c;
          gather_neighborhood(plane, img.height, img.width, r, c, offsets, cfg.pad,
                              {neigh.data(), static_cast<std::size_t>(dim)});
          emit(s, ch, acc.data() + s * stride, dim, 0, neigh);
        }
      }
    }
  } else {
    const int dim = cfg.n * ch_count;
    const int stride = dim * dim + dim * ch_count + ch_count;
    std::vector<long double> acc =
        scan_fast(joint_cells<long double>(img, offsets, cfg.pad), img.height, img.width,
                  stride, static_cast<long double>(cfg.omega));
    VectorXd feat(dim);
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        std::size_t s = static_cast<std::size_t>(r) * img.width + c;
        for (int j = 0; j < cfg.n; ++j) {
          int rr = r + offsets.offsets[j].first;
          int cc = c + offsets.offsets[j].second;
          bool in = rr >= 0 && rr < img.height && cc >= 0 && cc < img.width;
          for (int ch = 0; ch < ch_count; ++ch)
            feat(j * ch_count + ch) = in ? img.at(rr, cc, ch) : cfg.pad;
        }
        for (int t = 0; t < ch_count; ++t) emit(s, t, acc.data() + s * stride, dim, t, feat);
      }
    }
  }

  double total = 0.0;
  double comp = 0.0;
  for (double z : out.residual.data) {  // Kahan sum
    double yk = z - comp;
    double tk = total + yk;
    comp = (tk - total) - yk;
    total = tk;
  }
  out.mse = total / static_cast<double>(k);
  return out;
}

}  // namespace lasi
