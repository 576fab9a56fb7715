// Command-line front-end for the LASI perceptual similarity toolkit.
//
// Exit codes: 0 ok, 1 I/O failure, 2 validation failure, 3 numerical failure.
// Results go to stdout, diagnostics to stderr.

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "lasi/eval.hpp"
#include "lasi/gradient.hpp"
#include "lasi/mad.hpp"
#include "lasi/metric.hpp"

namespace {

struct MetricFlags {
  std::string metric = "lasi";
  int n = 12;
  double omega = 0.8;
  std::string mode = "per-channel";
  int threads = 0;
};

void add_metric_flags(CLI::App* cmd, MetricFlags& flags, bool with_metric = true) {
  if (with_metric)
    cmd->add_option("--metric", flags.metric, "lasi|mse|psnr|ssim|msssim")
        ->check(CLI::IsMember({"lasi", "mse", "psnr", "ssim", "msssim"}));
  cmd->add_option("--n", flags.n, "LASI neighborhood size");
  cmd->add_option("--omega", flags.omega, "LASI weight decay");
  cmd->add_option("--mode", flags.mode, "LASI channel mode")
      ->check(CLI::IsMember({"per-channel", "joint"}));
  cmd->add_option("--threads", flags.threads, "worker thread cap (0 = all cores)");
}

lasi::LasiConfig lasi_config(const MetricFlags& flags) {
  lasi::LasiConfig cfg;
  cfg.n = flags.n;
  cfg.omega = flags.omega;
  cfg.mode = flags.mode == "joint" ? lasi::ChannelMode::Joint : lasi::ChannelMode::PerChannel;
  cfg.validate();
  return cfg;
}

lasi::MetricId metric_id(const MetricFlags& flags) {
  return lasi::MetricId::parse(flags.metric, lasi_config(flags));
}

void print_value(double v) {
  if (std::isinf(v)) {
    std::printf(v > 0 ? "inf\n" : "-inf\n");
  } else {
    std::printf("%.9f\n", v);
  }
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<int> parse_n_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw lasi::ValidationError("--n-list: malformed entry '" + item + "'");
    }
  }
  if (out.empty()) throw lasi::ValidationError("--n-list: no values given");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"LASI perceptual image similarity toolkit"};
  app.require_subcommand(1);

  // compare
  MetricFlags cmp_flags;
  std::string cmp_a, cmp_b;
  CLI::App* cmp = app.add_subcommand("compare", "distance between two images");
  add_metric_flags(cmp, cmp_flags);
  cmp->add_option("imgA", cmp_a)->required();
  cmp->add_option("imgB", cmp_b)->required();

  // embed
  MetricFlags emb_flags;
  std::string emb_img, emb_out;
  CLI::App* emb = app.add_subcommand("embed", "write the embedding matrix");
  add_metric_flags(emb, emb_flags, false);
  emb->add_option("img", emb_img)->required();
  emb->add_option("--out", emb_out)->required();

  // residual
  MetricFlags res_flags;
  std::string res_img, res_out;
  CLI::App* res = app.add_subcommand("residual", "prediction and residual maps");
  add_metric_flags(res, res_flags, false);
  res->add_option("img", res_img)->required();
  res->add_option("--out", res_out, "output path prefix")->required();

  // eval-2afc / eval-jnd
  MetricFlags afc_flags;
  std::string afc_manifest, afc_csv;
  CLI::App* afc = app.add_subcommand("eval-2afc", "score a metric on a 2-AFC manifest");
  add_metric_flags(afc, afc_flags);
  afc->add_option("manifest", afc_manifest)->required();
  afc->add_option("--csv", afc_csv, "per-example CSV output");

  MetricFlags jnd_flags;
  std::string jnd_manifest, jnd_csv;
  CLI::App* jnd = app.add_subcommand("eval-jnd", "score a metric on a JND manifest");
  add_metric_flags(jnd, jnd_flags);
  jnd->add_option("manifest", jnd_manifest)->required();
  jnd->add_option("--csv", jnd_csv, "PR-curve CSV output");

  // mad
  MetricFlags mad_flags;
  std::string mad_ref, mad_fixed = "lasi", mad_moving = "mse", mad_out = "mad_out";
  int mad_steps = 50;
  double mad_sigma = 0.3, mad_lambda = 1e-2, mad_tol = 1e-3;
  std::uint64_t mad_seed = 0;
  CLI::App* mad = app.add_subcommand("mad", "maximum differentiation competition");
  add_metric_flags(mad, mad_flags, false);
  mad->add_option("ref", mad_ref)->required();
  mad->add_option("--fixed", mad_fixed, "metric held fixed");
  mad->add_option("--moving", mad_moving, "metric being maximized/minimized");
  mad->add_option("--steps", mad_steps);
  mad->add_option("--step-size", mad_lambda);
  mad->add_option("--sigma", mad_sigma, "parameter-space noise amplitude");
  mad->add_option("--tol", mad_tol, "level-set correction tolerance");
  mad->add_option("--seed", mad_seed);
  mad->add_option("--out", mad_out, "output directory");

  // sweep
  MetricFlags sweep_flags;
  std::string sweep_manifest, sweep_nlist = "1,2,4,8,12", sweep_csv = "sweep.csv";
  CLI::App* sweep = app.add_subcommand("sweep", "LASI neighborhood-size sweep");
  add_metric_flags(sweep, sweep_flags, false);
  sweep->add_option("manifest", sweep_manifest)->required();
  sweep->add_option("--n-list", sweep_nlist, "comma-separated ascending N values");
  sweep->add_option("--csv", sweep_csv);

  // gradcheck
  MetricFlags gc_flags;
  std::string gc_a, gc_b, gc_wrt = "second";
  double gc_step = 1e-4;
  CLI::App* gc = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  add_metric_flags(gc, gc_flags);
  gc->add_option("imgA", gc_a)->required();
  gc->add_option("imgB", gc_b)->required();
  gc->add_option("--step", gc_step);
  gc->add_option("--wrt", gc_wrt)->check(CLI::IsMember({"first", "second"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  if (cmp->parsed()) {
    lasi::ImageTensor a = lasi::load_image(cmp_a);
    lasi::ImageTensor b = lasi::load_image(cmp_b);
    print_value(lasi::evaluate(metric_id(cmp_flags), a, b, cmp_flags.threads));
  } else if (emb->parsed()) {
    lasi::ImageTensor img = lasi::load_image(emb_img);
    lasi::EmbeddingMatrix m =
        lasi::solve_embeddings(img, lasi_config(emb_flags), emb_flags.threads);
    std::ofstream out(emb_out, std::ios::binary | std::ios::trunc);
    if (!out) throw lasi::IoError("cannot open '" + emb_out + "' for writing");
    out.write("LASI", 4);
    write_u32(out, static_cast<std::uint32_t>(m.dim));
    write_u32(out, static_cast<std::uint32_t>(m.columns));
    write_u32(out, 0);  // reserved, pads the header to 16 bytes
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!out) throw lasi::IoError("write failed for '" + emb_out + "'");
  } else if (res->parsed()) {
    lasi::ImageTensor img = lasi::load_image(res_img);
    lasi::LasiConfig cfg = lasi_config(res_flags);
    lasi::EmbeddingMatrix m = lasi::solve_embeddings(img, cfg, res_flags.threads);
    lasi::Prediction pred = lasi::predict(img, m, cfg);
    std::string ext = img.channels == 1 ? ".pgm" : ".ppm";
    lasi::ImageTensor clamped = pred.predicted;
    for (double& v : clamped.data) v = std::min(1.0, std::max(0.0, v));
    lasi::save_image(clamped, res_out + "_predicted" + ext);
    double zmax = 0.0;
    for (double z : pred.residual.data) zmax = std::max(zmax, z);
    lasi::ImageTensor vis = pred.residual;  // rescaled for visualization
    if (zmax > 0.0)
      for (double& z : vis.data) z /= zmax;
    lasi::save_image(vis, res_out + "_residual" + ext);
    print_value(pred.mse);
  } else if (afc->parsed()) {
    lasi::DatasetManifest m = lasi::load_manifest(afc_manifest);
    lasi::TwoAfcResult r = lasi::score_2afc(m, metric_id(afc_flags), afc_flags.threads);
    if (!afc_csv.empty()) lasi::write_2afc_csv(r, afc_csv);
    print_value(r.score);
  } else if (jnd->parsed()) {
    lasi::DatasetManifest m = lasi::load_manifest(jnd_manifest);
    lasi::JndResult r = lasi::score_jnd(m, metric_id(jnd_flags), jnd_flags.threads);
    if (!jnd_csv.empty()) lasi::write_pr_csv(r, jnd_csv);
    print_value(r.map_score);
  } else if (mad->parsed()) {
    lasi::ImageTensor ref = lasi::load_image(mad_ref);
    lasi::MadConfig cfg;
    cfg.fixed_metric = lasi::MetricId::parse(mad_fixed, lasi_config(mad_flags));
    cfg.moving_metric = lasi::MetricId::parse(mad_moving, lasi_config(mad_flags));
    cfg.steps = mad_steps;
    cfg.step_size = mad_lambda;
    cfg.noise_sigma = mad_sigma;
    cfg.correction_tol = mad_tol;
    cfg.seed = mad_seed;
    cfg.threads = mad_flags.threads;
    lasi::MadTrajectory traj = lasi::run_mad(ref, cfg);
    lasi::write_trajectory(traj, mad_out);
  } else if (sweep->parsed()) {
    lasi::DatasetManifest m = lasi::load_manifest(sweep_manifest);
    std::vector<lasi::SweepRow> rows =
        lasi::sweep_n(m, parse_n_list(sweep_nlist), lasi_config(sweep_flags),
                      sweep_flags.threads);
    lasi::write_sweep_csv(rows, sweep_csv);
  } else if (gc->parsed()) {
    lasi::ImageTensor a = lasi::load_image(gc_a);
    lasi::ImageTensor b = lasi::load_image(gc_b);
    lasi::GradientReport rep =
        lasi::fd_check(metric_id(gc_flags), a, b,
                       gc_wrt == "first" ? lasi::Wrt::First : lasi::Wrt::Second, gc_step,
                       gc_flags.threads);
    std::printf("max_rel_err %.9g\nmax_abs_err %.9g\n", rep.max_rel_err, rep.max_abs_err);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const lasi::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const lasi::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const lasi::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
