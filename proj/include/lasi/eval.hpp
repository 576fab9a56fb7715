#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lasi/image.hpp"
#include "lasi/metric.hpp"

namespace lasi {

// Distance callback used by the scorers; lower means "more similar".
using DistanceFn = std::function<double(const ImageTensor&, const ImageTensor&)>;

struct TwoAfcResult {
  double score = 0.0;          // mean of p^a (1-p)^(1-a), ties credit 0.5
  double majority_bound = 0.0;  // mean of max{p, 1-p}
  double human_level = 0.0;     // mean of p^2 + (1-p)^2
  struct PerExample {
    double d0 = 0.0;  // d(alt0, ref)
    double d1 = 0.0;  // d(alt1, ref)
    double a = 0.0;   // 1 if d1 < d0, 0 if d0 < d1, 0.5 on ties
    double credit = 0.0;
  };
  std::vector<PerExample> per_example;
};

TwoAfcResult score_2afc(const DatasetManifest& manifest, const DistanceFn& distance,
                        int threads = 0);
TwoAfcResult score_2afc(const DatasetManifest& manifest, const MetricId& metric,
                        int threads = 0);

struct JndResult {
  double map_score = 0.0;
  std::vector<std::pair<double, double>> pr_curve;  // (recall, precision) per rank
};

// Soft-label mean average precision: pairs sorted ascending by distance
// (predicted-same first, ties broken by manifest order), fractional p as
// true-positive mass.
JndResult score_jnd(const DatasetManifest& manifest, const DistanceFn& distance,
                    int threads = 0);
JndResult score_jnd(const DatasetManifest& manifest, const MetricId& metric, int threads = 0);

struct SweepRow {
  int n = 0;
  double prediction_mse = 0.0;  // held-out reconstruction MSE over references
  double afc_score = 0.0;
};

// Fig-style N sweep: LASI 2-AFC score and reference prediction MSE per N.
std::vector<SweepRow> sweep_n(const DatasetManifest& manifest, const std::vector<int>& n_values,
                              const LasiConfig& cfg_template, int threads = 0);

void write_2afc_csv(const TwoAfcResult& result, const std::string& path);
void write_pr_csv(const JndResult& result, const std::string& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace lasi
