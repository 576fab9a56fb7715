#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lasi/errors.hpp"
#include "lasi/image.hpp"
#include "lasi/neighborhood.hpp"

namespace lasi {

enum class ChannelMode { PerChannel, Joint };

struct LasiConfig {
  int n = 12;            // neighborhood size / embedding dimension
  double omega = 0.8;    // weight decay per unit Manhattan distance
  ChannelMode mode = ChannelMode::PerChannel;
  double pinv_rcond = 1e-10;  // relative eigenvalue cutoff for the pseudo-inverse
  double pad = 0.5;      // value gathered for out-of-bounds neighbors

  void validate() const {
    if (n < 1) throw ValidationError("LasiConfig: n must be >= 1");
    if (!(omega > 0.0 && omega <= 1.0))
      throw ValidationError("LasiConfig: omega must be in (0,1]");
    if (!(pinv_rcond > 0.0)) throw ValidationError("LasiConfig: pinv_rcond must be > 0");
    if (pad < 0.0 || pad > 1.0) throw ValidationError("LasiConfig: pad must be in [0,1]");
  }
};

// Per-pixel embedding vectors, concatenated column-wise. `dim` is N in
// per-channel mode and N*C in joint mode; `columns` equals H*W*C in both,
// indexed in raster order, channel-fastest.
struct EmbeddingMatrix {
  int dim = 0;
  std::int64_t columns = 0;
  std::vector<double> data;  // column-major dim x columns

  double* col(std::int64_t i) { return data.data() + static_cast<std::size_t>(i) * dim; }
  const double* col(std::int64_t i) const {
    return data.data() + static_cast<std::size_t>(i) * dim;
  }
  Eigen::Map<const Eigen::VectorXd> column(std::int64_t i) const {
    return Eigen::Map<const Eigen::VectorXd>(col(i), dim);
  }
};

// Per-site weighted sums of the rank-one statistics of all strictly-previous
// sites. Each site stores [A (dim x dim, col-major) | b_0..b_{T-1} | c_0..c_{T-1}]
// where c_t carries the weighted sum of squared targets (used to evaluate the
// attained objective as a quadratic form).
struct AccumulatorState {
  int height = 0;
  int width = 0;
  int dim = 0;
  int targets = 1;
  std::vector<double> cells;

  int stride() const { return dim * dim + dim * targets + targets; }
  const double* site(int s) const { return cells.data() + static_cast<std::size_t>(s) * stride(); }
  double* site(int s) { return cells.data() + static_cast<std::size_t>(s) * stride(); }
  const double* a(int s) const { return site(s); }
  const double* b(int s, int t) const { return site(s) + dim * dim + static_cast<std::size_t>(t) * dim; }
  double c(int s, int t) const { return site(s)[dim * dim + dim * targets + t]; }
};

// Step 1 of the solve: (n n^T, x * n) for one pixel.
void rank_one_transform(Eigen::Ref<const Eigen::VectorXd> neigh, double value,
                        Eigen::Ref<Eigen::MatrixXd> a_out,
                        Eigen::Ref<Eigen::VectorXd> b_out);

// Raster-causal weighted sums out_i = sum_{j<i} omega^{l1(i,j)} cell_j, where
// each cell is a flat payload of `stride` doubles laid out on an H x W grid.
// The naive variant is the O((HW)^2) reference; the fast variant exploits
// omega^{|dr|+|dc|} = omega^{|dr|} * omega^{|dc|} and runs in O(HW * stride).
std::vector<double> causal_weighted_sum_naive(const std::vector<double>& cells, int height,
                                              int width, int stride, double omega);
std::vector<double> causal_weighted_sum_fast(const std::vector<double>& cells, int height,
                                             int width, int stride, double omega);
// Transpose scan: out_j = sum_{i>j} omega^{l1(i,j)} cell_i (used by adjoints).
std::vector<double> anticausal_weighted_sum_fast(const std::vector<double>& cells, int height,
                                                 int width, int stride, double omega);

// Per-site rank-one payloads for one channel plane (dim = N, one target).
std::vector<double> build_plane_cells(const std::vector<double>& plane, int height, int width,
                                      const NeighborOffsets& offsets, double pad);
// Joint-mode payloads: features gather all channels at each spatial offset
// (dim = N*C) and every channel of a site is a separate target sharing them.
std::vector<double> build_joint_cells(const ImageTensor& img, const NeighborOffsets& offsets,
                                      double pad);

// Extended-precision twins of the builders and the fast scan, used by the
// solve and gradient paths so both see bit-identical per-site systems.
std::vector<long double> build_plane_cells_ld(const std::vector<double>& plane, int height,
                                              int width, const NeighborOffsets& offsets,
                                              double pad);
std::vector<long double> build_joint_cells_ld(const ImageTensor& img,
                                              const NeighborOffsets& offsets, double pad);
std::vector<long double> causal_weighted_sum_fast_ld(const std::vector<long double>& cells,
                                                     int height, int width, int stride,
                                                     double omega);

AccumulatorState accumulate_naive(const std::vector<double>& plane, int height, int width,
                                  const LasiConfig& cfg);
AccumulatorState accumulate_fast(const std::vector<double>& plane, int height, int width,
                                 const LasiConfig& cfg);

// Extended-precision types for the solve path. The normal-equation systems can
// be conditioned near 1/rcond, where plain doubles lose too many digits.
using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Minimum-norm solver for symmetric PSD systems via eigendecomposition with a
// relative cutoff; eigenvalues below rcond * lambda_max are treated as zero.
class SymmetricPinv {
 public:
  SymmetricPinv(Eigen::Ref<const Eigen::MatrixXd> a, double rcond);
  SymmetricPinv(Eigen::Ref<const MatrixXld> a, double rcond);

  Eigen::VectorXd pinv_apply(Eigen::Ref<const Eigen::VectorXd> v) const;   // A+ v
  Eigen::VectorXd range_project(Eigen::Ref<const Eigen::VectorXd> v) const;  // A+ A v
  // A+ b followed by one step of iterative refinement against the original
  // matrix, which recovers most of the accuracy lost in the eigensolve.
  Eigen::VectorXd solve(Eigen::Ref<const Eigen::MatrixXd> a,
                        Eigen::Ref<const Eigen::VectorXd> b) const;
  VectorXld solve(Eigen::Ref<const MatrixXld> a, Eigen::Ref<const VectorXld> b) const;
  int rank() const { return rank_; }

 private:
  void init(const MatrixXld& a, double rcond);

  MatrixXld vecs_;
  VectorXld inv_vals_;  // zero where truncated
  int rank_ = 0;
};

// Step 3: w_i = pinv(A_i) b_i for every pixel of every channel. Solves run in
// parallel across pixels; the result is independent of the thread count.
EmbeddingMatrix solve_embeddings(const ImageTensor& img, const LasiConfig& cfg,
                                 int threads = 0);

struct Prediction {
  ImageTensor predicted;         // x_hat
  ImageTensor residual;          // z_i = (x_i - x_hat_i)^2
  std::vector<double> train_loss;  // attained WLS objective per pixel
  double mse = 0.0;              // mean of residual
};

Prediction predict(const ImageTensor& img, const EmbeddingMatrix& emb, const LasiConfig& cfg);

}  // namespace lasi
