#pragma once

#include "lasi/image.hpp"
#include "lasi/metric.hpp"

namespace lasi {

enum class Wrt { First, Second };

// Gradient of evaluate(metric, x, y) with respect to the chosen argument.
// LASI gradients are computed with hand-derived adjoints through the
// accumulation and pseudo-inverse solve; the contract is agreement with
// central finite differences.
ImageTensor grad_metric(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                        Wrt wrt, int threads = 0);

// Gradient of ranking_distance(metric, x, y); flips sign for similarity
// metrics. Used by the MAD competition.
ImageTensor ranking_distance_grad(const MetricId& metric, const ImageTensor& x,
                                  const ImageTensor& y, Wrt wrt, int threads = 0);

// Gradient of embedding_distance(solve(img), other) with respect to img;
// `other` is the fixed embedding of the second image.
ImageTensor lasi_distance_grad(const ImageTensor& img, const EmbeddingMatrix& other,
                               const LasiConfig& cfg, int threads = 0);

struct GradientReport {
  ImageTensor analytic;
  ImageTensor fd;
  double max_abs_err = 0.0;
  // Maximum of |analytic-fd|/|fd| over coordinates where |fd| > 1e-6.
  double max_rel_err = 0.0;
};

GradientReport fd_check(const MetricId& metric, const ImageTensor& x, const ImageTensor& y,
                        Wrt wrt, double step = 1e-4, int threads = 0);

}  // namespace lasi
