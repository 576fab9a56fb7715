#include "lasi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lasi/parallel.hpp"

namespace lasi {

namespace {

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

void require_kind(const DatasetManifest& m, ManifestKind kind, const char* who) {
  if (m.kind != kind)
    throw ValidationError(std::string(who) + ": manifest has the wrong kind");
  if (m.record_count() == 0)
    throw ValidationError(std::string(who) + ": manifest is empty");
}

}  // namespace

TwoAfcResult score_2afc(const DatasetManifest& manifest, const DistanceFn& distance,
                        int threads) {
  require_kind(manifest, ManifestKind::TwoAfc, "score_2afc");
  const std::size_t count = manifest.two_afc.size();
  TwoAfcResult result;
  result.per_example.resize(count);

  parallel_for(count, threads, [&](std::size_t i) {
    const TwoAfcExample& ex = manifest.two_afc[i];
    ImageTensor ref = load_image(manifest.resolve(ex.reference));
    ImageTensor alt0 = load_image(manifest.resolve(ex.alt0));
    ImageTensor alt1 = load_image(manifest.resolve(ex.alt1));
    auto& pe = result.per_example[i];
    pe.d0 = distance(alt0, ref);
    pe.d1 = distance(alt1, ref);
    if (pe.d1 < pe.d0) {
      pe.a = 1.0;
      pe.credit = ex.p;
    } else if (pe.d0 < pe.d1) {
      pe.a = 0.0;
      pe.credit = 1.0 - ex.p;
    } else {
      pe.a = 0.5;
      pe.credit = 0.5;
    }
  });

  std::vector<double> credits(count), bounds(count), human(count);
  for (std::size_t i = 0; i < count; ++i) {
    double p = manifest.two_afc[i].p;
    credits[i] = result.per_example[i].credit;
    bounds[i] = std::max(p, 1.0 - p);
    human[i] = p * p + (1.0 - p) * (1.0 - p);
  }
  result.score = kahan_mean(credits);
  result.majority_bound = kahan_mean(bounds);
  result.human_level = kahan_mean(human);
  return result;
}

TwoAfcResult score_2afc(const DatasetManifest& manifest, const MetricId& metric, int threads) {
  return score_2afc(
      manifest,
      [&](const ImageTensor& a, const ImageTensor& b) { return ranking_distance(metric, a, b); },
      threads);
}

JndResult score_jnd(const DatasetManifest& manifest, const DistanceFn& distance, int threads) {
  require_kind(manifest, ManifestKind::Jnd, "score_jnd");
  const std::size_t count = manifest.jnd.size();
  std::vector<double> dist(count);
  parallel_for(count, threads, [&](std::size_t i) {
    const JndExample& ex = manifest.jnd[i];
    dist[i] = distance(load_image(manifest.resolve(ex.img_a)),
                       load_image(manifest.resolve(ex.img_b)));
  });

  double total_p = 0.0;
  for (const JndExample& ex : manifest.jnd) total_p += ex.p;
  if (total_p == 0.0)
    throw ValidationError("score_jnd: all labels are zero, recall is undefined");

  // Ascending distance = "predicted same" first; stable sort keeps manifest
  // order on ties.
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  JndResult result;
  double cum_p = 0.0;
  double prev_recall = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    cum_p += manifest.jnd[order[t]].p;
    double precision = cum_p / static_cast<double>(t + 1);
    double recall = cum_p / total_p;
    result.map_score += (recall - prev_recall) * precision;
    prev_recall = recall;
    result.pr_curve.emplace_back(recall, precision);
  }
  return result;
}

JndResult score_jnd(const DatasetManifest& manifest, const MetricId& metric, int threads) {
  return score_jnd(
      manifest,
      [&](const ImageTensor& a, const ImageTensor& b) { return ranking_distance(metric, a, b); },
      threads);
}

std::vector<SweepRow> sweep_n(const DatasetManifest& manifest, const std::vector<int>& n_values,
                              const LasiConfig& cfg_template, int threads) {
  require_kind(manifest, ManifestKind::TwoAfc, "sweep_n");
  for (std::size_t i = 1; i < n_values.size(); ++i)
    if (n_values[i] <= n_values[i - 1])
      throw ValidationError("sweep_n: n_values must be strictly ascending");

  std::vector<SweepRow> rows;
  for (int n : n_values) {
    LasiConfig cfg = cfg_template;
    cfg.n = n;
    cfg.validate();

    std::vector<double> ref_mse(manifest.two_afc.size());
    parallel_for(manifest.two_afc.size(), threads, [&](std::size_t i) {
      ImageTensor ref = load_image(manifest.resolve(manifest.two_afc[i].reference));
      EmbeddingMatrix emb = solve_embeddings(ref, cfg, 1);
      ref_mse[i] = predict(ref, emb, cfg).mse;
    });

    MetricId metric = MetricId::make(MetricId::Kind::Lasi, cfg);
    TwoAfcResult afc = score_2afc(manifest, metric, threads);
    rows.push_back({n, kahan_mean(ref_mse), afc.score});
  }
  return rows;
}

void write_2afc_csv(const TwoAfcResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "index,d0,d1,a,credit\n";
  for (std::size_t i = 0; i < result.per_example.size(); ++i) {
    const auto& pe = result.per_example[i];
    char line[160];
    std::snprintf(line, sizeof(line), "%zu,%.12g,%.12g,%g,%.12g\n", i, pe.d0, pe.d1, pe.a,
                  pe.credit);
    out << line;
  }
}

void write_pr_csv(const JndResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "recall,precision\n";
  for (const auto& [recall, precision] : result.pr_curve) {
    char line[80];
    std::snprintf(line, sizeof(line), "%.12g,%.12g\n", recall, precision);
    out << line;
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "n,prediction_mse,afc_score\n";
  for (const SweepRow& row : rows) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d,%.12g,%.12g\n", row.n, row.prediction_mse,
                  row.afc_score);
    out << line;
  }
}

}  // namespace lasi
