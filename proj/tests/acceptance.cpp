// Acceptance gate: every core guarantee of the toolkit, one line per check.
// Exits nonzero if any criterion fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "lasi/eval.hpp"
#include "lasi/gradient.hpp"
#include "lasi/mad.hpp"
#include "lasi/metric.hpp"
#include "test_util.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lasi::ImageTensor;
using lasi::LasiConfig;
using lasi::MetricId;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail = "") {
  std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name, detail.empty() ? "" : ": ",
              detail.c_str());
  if (!ok) ++failures;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// Explicit design-matrix least squares, evaluated in extended precision so the
// oracle's own rounding stays far below the comparison tolerance. The singular
// value threshold sqrt(rcond) matches the solver's eigenvalue cutoff rcond.
VectorXd design_oracle(const std::vector<double>& plane, int height, int width, int site,
                       const LasiConfig& cfg) {
  using MatrixXld = lasi::MatrixXld;
  using VectorXld = lasi::VectorXld;
  auto offs = lasi::build_offsets(cfg.n);
  int ri = site / width, ci = site % width;
  if (site == 0) return VectorXd::Zero(cfg.n);
  MatrixXld design(site, cfg.n);
  VectorXld target(site);
  std::vector<double> neigh(cfg.n);
  for (int j = 0; j < site; ++j) {
    int rj = j / width, cj = j % width;
    int dist = std::abs(ri - rj) + std::abs(ci - cj);
    long double wgt = 1.0L;
    for (int q = 0; q < dist; ++q) wgt *= static_cast<long double>(cfg.omega);
    long double sw = sqrtl(wgt);
    lasi::gather_neighborhood(plane, height, width, rj, cj, offs, cfg.pad, neigh);
    for (int m = 0; m < cfg.n; ++m) design(j, m) = sw * static_cast<long double>(neigh[m]);
    target(j) = sw * static_cast<long double>(plane[j]);
  }
  Eigen::JacobiSVD<MatrixXld> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(static_cast<long double>(std::sqrt(cfg.pinv_rcond)));
  return svd.solve(target).cast<double>();
}

void check_solver_oracle() {
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  const int n_values[] = {1, 2, 4, 8};
  for (int trial = 0; trial < 100; ++trial) {
    int h = 1 + static_cast<int>(rng() % 12);
    int w = 1 + static_cast<int>(rng() % 12);
    LasiConfig cfg;
    cfg.n = n_values[trial % 4];
    ImageTensor img = testutil::random_image(rng, h, w);
    auto emb = lasi::solve_embeddings(img, cfg);
    auto plane = img.plane(0);
    for (int site = 0; site < h * w; ++site) {
      VectorXd oracle = design_oracle(plane, h, w, site, cfg);
      for (int m = 0; m < cfg.n; ++m)
        worst = std::max(worst, std::abs(emb.col(site)[m] - oracle(m)));
    }
  }
  report("solver matches the explicit-design-matrix oracle (100 images)", worst <= 1e-8,
         "max err " + num(worst));
}

void check_fast_naive() {
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    LasiConfig cfg;
    cfg.n = 1 + static_cast<int>(rng() % 8);
    cfg.omega = 0.4 + 0.6 * (rng() % 100) / 100.0;
    auto plane = testutil::random_plane(rng, 16, 16);
    auto naive = lasi::accumulate_naive(plane, 16, 16, cfg);
    auto fast = lasi::accumulate_fast(plane, 16, 16, cfg);
    for (std::size_t m = 0; m < naive.cells.size(); ++m) {
      double denom = std::max(1.0, std::abs(naive.cells[m]));
      worst = std::max(worst, std::abs(naive.cells[m] - fast.cells[m]) / denom);
    }
  }
  report("fast accumulation equals the quadratic-time path (100 planes)", worst <= 1e-9,
         "max rel err " + num(worst));
}

void check_causality() {
  std::mt19937_64 rng(1003);
  bool ok = true;
  for (int trial = 0; trial < 20 && ok; ++trial) {
    LasiConfig cfg;
    cfg.n = 1 + static_cast<int>(rng() % 8);
    int h = 4 + static_cast<int>(rng() % 5);
    int w = 4 + static_cast<int>(rng() % 5);
    ImageTensor img = testutil::random_image(rng, h, w);
    auto base = lasi::solve_embeddings(img, cfg);
    std::size_t j = rng() % img.size();
    img.data[j] = 1.0 - img.data[j];
    auto perturbed = lasi::solve_embeddings(img, cfg);
    for (std::size_t i = 0; i <= j && ok; ++i)
      for (int m = 0; m < cfg.n; ++m)
        if (perturbed.col(static_cast<std::int64_t>(i))[m] !=
            base.col(static_cast<std::int64_t>(i))[m])
          ok = false;
  }
  report("later pixels never influence earlier embeddings (20 trials)", ok);
}

void check_nested_loss() {
  std::mt19937_64 rng(1004);
  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    ImageTensor img = testutil::random_image(rng, 6, 6);
    std::vector<double> prev;
    for (int n = 1; n <= 8; ++n) {
      LasiConfig cfg;
      cfg.n = n;
      // A tight cutoff keeps the comparison about the nested-prefix property:
      // at looser cutoffs a direction kept at size N can fall below the
      // truncation threshold at N+1, which forfeits its (real) fit gain.
      cfg.pinv_rcond = 1e-12;
      auto emb = lasi::solve_embeddings(img, cfg);
      auto pred = lasi::predict(img, emb, cfg);
      if (!prev.empty())
        for (std::size_t i = 0; i < pred.train_loss.size(); ++i)
          if (pred.train_loss[i] > prev[i] + 1e-12) ok = false;
      prev = pred.train_loss;
    }
  }
  report("training loss never increases with neighborhood size (10 images)", ok);
}

void check_constant_image() {
  bool ok = true;
  double worst_w = 0.0, worst_z = 0.0;
  for (int n : {2, 4, 12}) {
    LasiConfig cfg;
    cfg.n = n;
    ImageTensor img(8, 8, 1, 0.5);
    auto emb = lasi::solve_embeddings(img, cfg);
    for (std::int64_t i = 1; i < emb.columns; ++i)
      for (int m = 0; m < n; ++m)
        worst_w = std::max(worst_w, std::abs(emb.col(i)[m] - 1.0 / n));
    auto pred = lasi::predict(img, emb, cfg);
    for (std::size_t i = 1; i < pred.residual.data.size(); ++i)
      worst_z = std::max(worst_z, pred.residual.data[i]);
  }
  ok = worst_w <= 1e-9 && worst_z <= 1e-12;
  report("constant image embeds as 1/N with zero residual", ok,
         "w err " + num(worst_w) + ", residual " + num(worst_z));
}

void check_gradients() {
  std::mt19937_64 rng(1006);
  double worst_lasi = 0.0, worst_mse = 0.0;
  LasiConfig cfg;
  cfg.n = 3;
  for (int trial = 0; trial < 20; ++trial) {
    ImageTensor x = testutil::random_image(rng, 6, 6);
    ImageTensor y = testutil::random_image(rng, 6, 6);
    auto lasi_rep =
        lasi::fd_check(MetricId::make(MetricId::Kind::Lasi, cfg), x, y, lasi::Wrt::Second, 1e-5);
    auto mse_rep = lasi::fd_check(MetricId::parse("mse"), x, y, lasi::Wrt::Second, 1e-3);
    worst_lasi = std::max(worst_lasi, lasi_rep.max_rel_err);
    worst_mse = std::max(worst_mse, mse_rep.max_rel_err);
  }
  report("analytic gradients match finite differences (20 instances)",
         worst_lasi <= 1e-3 && worst_mse <= 1e-7,
         "lasi " + num(worst_lasi) + ", mse " + num(worst_mse));
}

void check_mad() {
  ImageTensor nat = lasi::load_image(testutil::fixture("natural64.pgm"));
  double worst_drift = 0.0, worst_sep = 1e30;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ImageTensor ref = testutil::crop_gray(nat, 8 * (seed % 4), 8 * ((seed / 2) % 4), 32, 32);
    lasi::MadConfig cfg;
    cfg.fixed_metric = MetricId::parse("lasi");
    cfg.moving_metric = MetricId::parse("mse");
    cfg.steps = 20;
    cfg.step_size = 150.0;  // tuned so the competition visibly separates
    cfg.seed = seed;
    auto traj = lasi::run_mad(ref, cfg);
    double target = traj.max_values[0].d_fixed;
    for (const auto& v : traj.max_values)
      worst_drift = std::max(worst_drift, std::abs(v.d_fixed - target) / target);
    for (const auto& v : traj.min_values)
      worst_drift = std::max(worst_drift, std::abs(v.d_fixed - target) / target);
    worst_sep =
        std::min(worst_sep, traj.max_values.back().d_moving / traj.min_values.back().d_moving);
  }
  report("held metric drifts under 1% while the moving one separates 2x (5 seeds)",
         worst_drift <= 0.01 && worst_sep >= 2.0,
         "drift " + num(worst_drift) + ", separation " + num(worst_sep));
}

void check_2afc() {
  lasi::DatasetManifest fixture = lasi::load_manifest(testutil::fixture("afc3/manifest.csv"));
  auto fixed = lasi::score_2afc(fixture, MetricId::parse("mse"));
  bool ok = std::abs(fixed.score - 0.6) <= 1e-12;

  testutil::TempDir tmp("afc_pool");
  std::vector<std::string> pool;
  for (int i = 0; i < 64; ++i) {
    std::string name = "p" + std::to_string(i) + ".pgm";
    lasi::save_image(ImageTensor(1, 1, 1, i / 255.0), tmp.path(name));
    pool.push_back(name);
  }
  std::mt19937_64 rng(1008);
  std::uniform_int_distribution<int> pick(0, 63);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  // Absolute byte difference of the 1x1 pool images. Equal differences give
  // bit-identical distances and distinct ones are >= 1/255 apart, so exp()
  // is exactly order-preserving on the values that actually occur; a metric
  // whose outputs are 1 ulp apart could collapse to a tie under a transform
  // and turn a decided example into a coin flip.
  auto plain = [](const ImageTensor& a, const ImageTensor& b) {
    return std::abs(std::lround(255.0 * a.data[0]) - std::lround(255.0 * b.data[0])) / 255.0;
  };
  auto warped = [&](const ImageTensor& a, const ImageTensor& b) {
    return std::exp(plain(a, b));
  };
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    lasi::DatasetManifest m;
    m.kind = lasi::ManifestKind::TwoAfc;
    m.root = tmp.str();
    int count = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < count; ++i)
      m.two_afc.push_back({pool[pick(rng)], pool[pick(rng)], pool[pick(rng)], uni(rng)});
    auto a = lasi::score_2afc(m, plain);
    if (a.score > a.majority_bound + 1e-12) ok = false;
    if (lasi::score_2afc(m, warped).score != a.score) ok = false;
  }
  report("forced-choice scorer: fixture value, bound, transform invariance (1000 manifests)",
         ok, "fixture score " + num(fixed.score));
}

void check_jnd_oracle() {
  testutil::TempDir tmp("jnd_pool");
  std::vector<std::string> pool;
  for (int i = 0; i < 64; ++i) {
    std::string name = "p" + std::to_string(i) + ".pgm";
    lasi::save_image(ImageTensor(1, 1, 1, i / 255.0), tmp.path(name));
    pool.push_back(name);
  }
  std::mt19937_64 rng(1009);
  std::uniform_int_distribution<int> pick(0, 63);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  bool ok = true;
  for (int trial = 0; trial < 200 && ok; ++trial) {
    lasi::DatasetManifest m;
    m.kind = lasi::ManifestKind::Jnd;
    m.root = tmp.str();
    int count = 1 + static_cast<int>(rng() % 50);
    for (int i = 0; i < count; ++i)
      m.jnd.push_back({pool[pick(rng)], pool[pick(rng)], uni(rng)});
    auto r = lasi::score_jnd(m, MetricId::parse("mse"));

    // brute-force prefix evaluation
    std::vector<std::pair<double, double>> scored;
    for (const auto& ex : m.jnd)
      scored.emplace_back(lasi::mse(lasi::load_image(m.resolve(ex.img_a)),
                                    lasi::load_image(m.resolve(ex.img_b))),
                          ex.p);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    double total = 0.0;
    for (const auto& [d, p] : scored) total += p;
    double map = 0.0, prev_recall = 0.0, cum = 0.0;
    for (std::size_t t = 1; t <= scored.size(); ++t) {
      cum += scored[t - 1].second;
      map += (cum / total - prev_recall) * (cum / static_cast<double>(t));
      prev_recall = cum / total;
    }
    if (std::abs(r.map_score - map) > 1e-13) ok = false;
  }
  report("ranking mAP equals the brute-force prefix computation (200 manifests)", ok);
}

// Synthetic noise-discrimination manifest. Two example flavors: diagonal
// 3-phase stripes at 1.5x amplitude against white noise (labels favor white),
// and white noise against box-smoothed noise at 1.1x (labels favor smooth).
// The tiny-context metric mistakes loud-but-predictable stripes for benign;
// plain MSE cannot see past total energy. Construction frozen at this seed.
struct AfcExampleSet {
  std::vector<std::array<ImageTensor, 3>> examples;  // ref, alt0, alt1
  std::vector<double> p;
};

void normalize_field(std::vector<double>& s) {
  double m = 0, var = 0;
  for (double x : s) m += x;
  m /= static_cast<double>(s.size());
  for (double x : s) var += (x - m) * (x - m);
  var = std::sqrt(var / static_cast<double>(s.size()));
  for (double& x : s) x = (x - m) / var;
}

AfcExampleSet build_noise_manifest(const ImageTensor& nat, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> pos(0, 32);
  AfcExampleSet out;
  auto white = [&]() {
    std::vector<double> s(32 * 32);
    for (auto& v : s) v = gauss(rng);
    normalize_field(s);
    return s;
  };
  auto smooth = [&]() {
    auto w = white();
    std::vector<double> s(32 * 32, 0.0);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        double acc = 0;
        int cnt = 0;
        for (int dr = -3; dr <= 3; ++dr)
          for (int dc = -3; dc <= 3; ++dc) {
            int rr = r + dr, cc = c + dc;
            if (rr >= 0 && rr < 32 && cc >= 0 && cc < 32) {
              acc += w[rr * 32 + cc];
              ++cnt;
            }
          }
        s[r * 32 + c] = acc / cnt;
      }
    normalize_field(s);
    return s;
  };
  auto stripes = [&]() {
    double a[3] = {gauss(rng), gauss(rng), gauss(rng)};
    std::vector<double> s(32 * 32);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) s[r * 32 + c] = a[(r + c) % 3];
    normalize_field(s);
    return s;
  };
  auto apply = [](const ImageTensor& ref, const std::vector<double>& f, double amp) {
    ImageTensor y = ref;
    for (std::size_t k = 0; k < y.data.size(); ++k)
      y.data[k] = std::clamp(y.data[k] + amp * f[k], 0.0, 1.0);
    return y;
  };
  for (int i = 0; i < 50; ++i) {
    ImageTensor ref = testutil::crop_gray(nat, pos(rng), pos(rng), 32, 32);
    const double amp = 0.07;
    if (i % 2 == 0) {
      out.examples.push_back({ref, apply(ref, stripes(), amp * 1.5), apply(ref, white(), amp)});
    } else {
      out.examples.push_back({ref, apply(ref, white(), amp), apply(ref, smooth(), amp * 1.1)});
    }
    out.p.push_back(0.7);
  }
  return out;
}

double score_examples(const AfcExampleSet& set, const lasi::DistanceFn& dist) {
  double s = 0;
  for (std::size_t i = 0; i < set.examples.size(); ++i) {
    double d0 = dist(set.examples[i][1], set.examples[i][0]);
    double d1 = dist(set.examples[i][2], set.examples[i][0]);
    s += d1 < d0 ? set.p[i] : (d0 < d1 ? 1.0 - set.p[i] : 0.5);
  }
  return s / static_cast<double>(set.examples.size());
}

void check_context_trend() {
  ImageTensor nat = lasi::load_image(testutil::fixture("natural64.pgm"));
  std::vector<double> mses;
  for (int n : {2, 6, 12}) {
    LasiConfig cfg;
    cfg.n = n;
    auto emb = lasi::solve_embeddings(nat, cfg);
    mses.push_back(lasi::predict(nat, emb, cfg).mse);
  }
  bool mse_trend = mses[0] > mses[1] && mses[1] > mses[2];

  AfcExampleSet set = build_noise_manifest(nat, 4);
  auto lasi_dist = [](int n) {
    return [n](const ImageTensor& a, const ImageTensor& b) {
      LasiConfig cfg;
      cfg.n = n;
      return lasi::lasi_distance(a, b, cfg);
    };
  };
  double s_mse =
      score_examples(set, [](const ImageTensor& a, const ImageTensor& b) { return lasi::mse(a, b); });
  double s_n2 = score_examples(set, lasi_dist(2));
  double s_n12 = score_examples(set, lasi_dist(12));
  bool afc_trend = s_n12 > s_n2 && s_n12 > s_mse;

  report("wider context predicts better and scores higher on noise discrimination",
         mse_trend && afc_trend,
         "reconstruction mse " + num(mses[0]) + " > " + num(mses[1]) + " > " + num(mses[2]) +
             "; scores n12 " + num(s_n12) + ", n2 " + num(s_n2) + ", mse " + num(s_mse));
}

void check_performance() {
  std::mt19937_64 rng(1011);
  ImageTensor x = testutil::random_image(rng, 64, 64, 3);
  ImageTensor y = testutil::random_image(rng, 64, 64, 3);
  LasiConfig cfg;  // defaults: n 12, per-channel
  auto start = std::chrono::steady_clock::now();
  double d = lasi::lasi_distance(x, y, cfg);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report("64x64 color distance with default settings stays under 10 seconds",
         secs <= 10.0 && d > 0.0, num(secs) + "s");
}

void check_ssim_reference() {
  ImageTensor a = lasi::load_image(testutil::fixture("natural64.pgm"));
  ImageTensor b = lasi::load_image(testutil::fixture("natural64_noisy.pgm"));
  double self = lasi::ssim(a, a);
  double self_ms = lasi::ms_ssim(a, a);
  double cross = lasi::ssim(a, b);
  bool ok = std::abs(self - 1.0) <= 1e-12 && std::abs(self_ms - 1.0) <= 1e-12 &&
            std::abs(cross - 0.774134093374566) <= 1e-10;
  report("structural similarity: identity and frozen reference pair", ok,
         "ssim " + num(cross));
}

}  // namespace

int main() {
  check_solver_oracle();
  check_fast_naive();
  check_causality();
  check_nested_loss();
  check_constant_image();
  check_gradients();
  check_mad();
  check_2afc();
  check_jnd_oracle();
  check_context_trend();
  check_performance();
  check_ssim_reference();
  std::printf("%d of 12 criteria passed\n", 12 - failures);
  return failures == 0 ? 0 : 1;
}
