#pragma once

#include <cstdint>
#include <vector>

#include "lasi/image.hpp"
#include "lasi/metric.hpp"

namespace lasi {

// Maximum Differentiation competition: hold one metric's distance to a
// reference fixed while a second metric is maximized/minimized with projected
// gradient steps in sigmoid parameter space, plus a Newton correction back to
// the fixed metric's level set.
struct MadConfig {
  MetricId fixed_metric;
  MetricId moving_metric;
  int steps = 50;
  double step_size = 1e-2;
  double noise_sigma = 0.3;     // parameter-space corruption amplitude
  double correction_tol = 1e-3;  // relative tolerance on the fixed distance
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
};

enum class MadDirection { Max, Min };

struct MadStepRecord {
  double d_fixed = 0.0;
  double d_moving = 0.0;
};

struct MadTrajectory {
  // iterates[0] is the corrupted reference for both branches.
  std::vector<ImageTensor> max_iterates;
  std::vector<ImageTensor> min_iterates;
  std::vector<MadStepRecord> max_values;
  std::vector<MadStepRecord> min_values;
};

// r_tilde = sigmoid(logit(clamp(r)) + eps), eps ~ N(0, sigma^2) i.i.d.
// Deterministic given the seed.
ImageTensor corrupt_reference(const ImageTensor& r, double sigma, std::uint64_t seed);

// One projected gradient step with level-set correction, in parameter space.
// `params` holds the pre-sigmoid tensor of the current iterate; the returned
// tensor is the updated parameter image. d_target is the fixed-metric level.
ImageTensor mad_step(const ImageTensor& r, const ImageTensor& params, const MadConfig& cfg,
                     MadDirection direction, double d_target);

MadTrajectory run_mad(const ImageTensor& r, const MadConfig& cfg);

// CSV (`step,d_fixed,d_moving`) plus numbered PGM/PPM dumps per direction.
void write_trajectory(const MadTrajectory& traj, const std::string& out_dir);

}  // namespace lasi
