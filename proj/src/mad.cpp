#include "lasi/mad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "lasi/gradient.hpp"

namespace lasi {

namespace {

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

ImageTensor to_image(const ImageTensor& params) {
  ImageTensor x = params;
  for (double& v : x.data) v = sigmoid(v);
  return x;
}

// Chain an image-space gradient through the sigmoid parameterization.
ImageTensor to_param_grad(const ImageTensor& img_grad, const ImageTensor& image) {
  ImageTensor g = img_grad;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double x = image.data[i];
    g.data[i] *= x * (1.0 - x);
  }
  return g;
}

double dot(const ImageTensor& a, const ImageTensor& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a.data[i] * b.data[i];
  return total;
}

// Distance and gradient against a fixed reference; LASI reference embeddings
// are computed once and reused.
class RefMetric {
 public:
  RefMetric(const MetricId& id, const ImageTensor& r, int threads)
      : id_(id), r_(r), threads_(threads) {
    if (id_.kind == MetricId::Kind::Lasi)
      emb_r_ = solve_embeddings(r_, id_.lasi, threads_);
  }

  double dist(const ImageTensor& x) const {
    if (id_.kind == MetricId::Kind::Lasi)
      return embedding_distance(emb_r_, solve_embeddings(x, id_.lasi, threads_));
    return ranking_distance(id_, r_, x, threads_);
  }

  ImageTensor grad(const ImageTensor& x) const {
    if (id_.kind == MetricId::Kind::Lasi)
      return lasi_distance_grad(x, emb_r_, id_.lasi, threads_);
    return ranking_distance_grad(id_, r_, x, Wrt::Second, threads_);
  }

 private:
  MetricId id_;
  ImageTensor r_;
  int threads_;
  EmbeddingMatrix emb_r_;
};

ImageTensor correct_to_level_set(const RefMetric& fixed, ImageTensor params,
                                 const MadConfig& cfg, double d_target) {
  if (!(d_target > 0.0)) return params;
  for (int iter = 0; iter < 10; ++iter) {
    ImageTensor x = to_image(params);
    double d = fixed.dist(x);
    if (std::abs(d - d_target) <= cfg.correction_tol * d_target) break;
    ImageTensor f = to_param_grad(fixed.grad(x), x);
    double ff = dot(f, f);
    if (ff < 1e-20)
      throw NumericalError("MAD correction: fixed-metric gradient is degenerate");
    double scale = (d - d_target) / ff;
    for (std::size_t i = 0; i < params.size(); ++i) params.data[i] -= scale * f.data[i];
  }
  return params;
}

ImageTensor step_impl(const RefMetric& fixed, const RefMetric& moving, ImageTensor params,
                      const MadConfig& cfg, MadDirection direction, double d_target) {
  ImageTensor x = to_image(params);
  ImageTensor g = to_param_grad(moving.grad(x), x);
  ImageTensor f = to_param_grad(fixed.grad(x), x);
  double ff = dot(f, f);
  if (ff < 1e-20) throw NumericalError("MAD step: fixed-metric gradient is degenerate");
  double coef = dot(g, f) / ff;
  double sign = direction == MadDirection::Max ? 1.0 : -1.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    params.data[i] += sign * cfg.step_size * (g.data[i] - coef * f.data[i]);
  return correct_to_level_set(fixed, std::move(params), cfg, d_target);
}

}  // namespace

void MadConfig::validate() const {
  if (fixed_metric.kind == moving_metric.kind)
    throw ValidationError("MadConfig: fixed and moving metric must differ");
  if (steps < 0) throw ValidationError("MadConfig: steps must be >= 0");
  if (!(step_size > 0.0)) throw ValidationError("MadConfig: step_size must be > 0");
  if (!(noise_sigma >= 0.0)) throw ValidationError("MadConfig: noise_sigma must be >= 0");
  if (!(correction_tol > 0.0)) throw ValidationError("MadConfig: correction_tol must be > 0");
}

ImageTensor corrupt_reference(const ImageTensor& r, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  ImageTensor out = r;
  for (double& v : out.data) {
    double p = std::clamp(v, 1.0 / 255.0, 254.0 / 255.0);
    v = sigmoid(logit(p) + sigma * noise(rng));
  }
  return out;
}

ImageTensor mad_step(const ImageTensor& r, const ImageTensor& params, const MadConfig& cfg,
                     MadDirection direction, double d_target) {
  cfg.validate();
  RefMetric fixed(cfg.fixed_metric, r, cfg.threads);
  RefMetric moving(cfg.moving_metric, r, cfg.threads);
  return step_impl(fixed, moving, params, cfg, direction, d_target);
}

MadTrajectory run_mad(const ImageTensor& r, const MadConfig& cfg) {
  cfg.validate();
  RefMetric fixed(cfg.fixed_metric, r, cfg.threads);
  RefMetric moving(cfg.moving_metric, r, cfg.threads);

  ImageTensor corrupted = corrupt_reference(r, cfg.noise_sigma, cfg.seed);
  ImageTensor params0 = corrupted;
  for (double& v : params0.data) v = logit(std::clamp(v, 1e-12, 1.0 - 1e-12));
  double d_target = fixed.dist(corrupted);
  MadStepRecord start{d_target, moving.dist(corrupted)};

  MadTrajectory traj;
  for (MadDirection dir : {MadDirection::Max, MadDirection::Min}) {
    auto& iterates = dir == MadDirection::Max ? traj.max_iterates : traj.min_iterates;
    auto& values = dir == MadDirection::Max ? traj.max_values : traj.min_values;
    iterates.push_back(corrupted);
    values.push_back(start);
    ImageTensor params = params0;
    for (int step = 0; step < cfg.steps; ++step) {
      params = step_impl(fixed, moving, std::move(params), cfg, dir, d_target);
      ImageTensor x = to_image(params);
      values.push_back({fixed.dist(x), moving.dist(x)});
      iterates.push_back(std::move(x));
    }
  }
  return traj;
}

void write_trajectory(const MadTrajectory& traj, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto dump = [&](const std::vector<ImageTensor>& iterates,
                  const std::vector<MadStepRecord>& values, const std::string& tag) {
    std::ofstream csv(out_dir + "/trajectory_" + tag + ".csv");
    if (!csv) throw IoError("cannot write trajectory CSV in '" + out_dir + "'");
    csv << "step,d_fixed,d_moving\n";
    for (std::size_t s = 0; s < iterates.size(); ++s) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03zu.%s", tag.c_str(), s,
                    iterates[s].channels == 1 ? "pgm" : "ppm");
      save_image(iterates[s], out_dir + "/" + name);
      char line[128];
      std::snprintf(line, sizeof(line), "%zu,%.12g,%.12g\n", s, values[s].d_fixed,
                    values[s].d_moving);
      csv << line;
    }
  };
  dump(traj.max_iterates, traj.max_values, "max");
  dump(traj.min_iterates, traj.min_values, "min");
}

}  // namespace lasi
