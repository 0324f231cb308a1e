// Command-line driver: synthetic data generation, training, evaluation,
// deployment sweeps, and the full experiment grid.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "plume/experiment.hpp"
#include "plume/impute.hpp"
#include "plume/metrics.hpp"
#include "plume/model.hpp"
#include "plume/rng.hpp"
#include "plume/sweep.hpp"
#include "plume/synthgen.hpp"
#include "plume/tiles.hpp"

namespace {

using namespace plume;

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

int cmd_gen(const std::string& out, const std::string& kind, GenConfig cfg, int px, double deg) {
  if (kind == "tiles") {
    Dataset ds = generate_dataset(cfg);
    save_dataset(ds, out);
    std::cout << "wrote " << ds.tiles.size() << " tiles to " << out << "\n";
  } else if (kind == "scene") {
    Scene scene = generate_scene(deg, deg, px, px, cfg);
    save_scene(scene, out);
    std::cout << "wrote " << px << "x" << px << " scene (" << scene.truths.size()
              << " plumes) to " << out << "\n";
  } else {
    std::cerr << "gen: kind must be tiles or scene\n";
    return 1;
  }
  return 0;
}

int cmd_train(const std::string& data, const std::string& model, const std::string& out,
              const TrainConfig& cfg) {
  Dataset ds = load_dataset(data);
  ModelParams params = train(ds, parse_model_kind(model), cfg);
  save_checkpoint(params, cfg, out);
  std::cout << "trained " << model << " (" << params.param_count() << " params) on "
            << ds.tiles.size() << " tiles -> " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt, double threshold,
             double coverage_split, std::uint64_t seed) {
  Dataset ds = load_dataset(data);
  auto [params, cfg] = load_checkpoint(ckpt);

  std::vector<double> scores, coverages;
  std::vector<int> labels;
  const std::uint64_t eval_seed = derive_seed(seed, "eval");
  for (const auto& t : ds.tiles) {
    if (!t.label) throw std::runtime_error("eval: unlabeled tile '" + t.id + "'");
    labels.push_back(*t.label);
    coverages.push_back(compute_coverage(t).value);
    scores.push_back(forward(params, impute(t, cfg.imputation, eval_seed).tile));
  }
  ConfusionCounts c = confusion(scores, labels, threshold);
  DeltaRates d = delta_rates(scores, labels, coverages, threshold, coverage_split);
  std::cout << "tiles " << ds.tiles.size() << "\n"
            << "bacc " << opt_str(balanced_accuracy(c)) << "\n"
            << "precision " << opt_str(precision(c)) << "\n"
            << "recall " << opt_str(recall(c)) << "\n"
            << "dfpr " << opt_str(d.delta_fpr) << "\n"
            << "dtpr " << opt_str(d.delta_tpr) << "\n"
            << "flags " << count_flags(scores, threshold) << "\n";
  return 0;
}

int cmd_sweep(const std::string& scene_path, const std::string& ckpt, const std::string& out_dir,
              const WindowSpec& window, double threshold, double coverage_split,
              std::uint64_t seed) {
  Scene scene = load_scene(scene_path);
  auto [params, cfg] = load_checkpoint(ckpt);
  std::filesystem::create_directories(out_dir);

  auto tiles = tile_scene(scene, window);
  auto records =
      score_and_flag(tiles, params, cfg.imputation, threshold, derive_seed(seed, "deploy"));

  std::vector<double> scores, coverages;
  for (const auto& r : records) {
    scores.push_back(r.score);
    coverages.push_back(r.coverage);
  }
  std::string tag = to_string(ConfigKey{params.shape.kind, cfg.imputation.kind, cfg.resample});
  write_flags_csv(records, tag, out_dir + "/flags.csv");
  write_grid_csv(aggregate_grid(records), out_dir + "/grid.csv");
  std::cout << "tiles " << tiles.size() << "\n"
            << "flags " << count_flags(scores, threshold) << "\n"
            << "parity " << opt_str(parity(scores, coverages, threshold, coverage_split)) << "\n";
  return 0;
}

int cmd_grid(const std::string& train_path, const std::string& test_path,
             const std::string& scene_path, const std::string& out_dir, int seed_count,
             std::uint64_t seed, const RunOptions& opts) {
  Dataset train_ds = load_dataset(train_path);
  Dataset test_ds = load_dataset(test_path);
  Scene scene = load_scene(scene_path);
  std::filesystem::create_directories(out_dir);

  ExperimentGrid grid;
  grid.seeds = expand_seeds(seed, seed_count);
  GridReport report = run_grid(train_ds, test_ds, scene, grid, opts);

  emit_report_csv(report, out_dir + "/report.csv");
  emit_report_json(report, out_dir + "/report.json");
  write_grid_csv(resampling_disagreement(report), out_dir + "/disagreement.csv");

  // resampling on-vs-off significance per (model, imputation)
  std::ofstream cmp(out_dir + "/comparisons.csv");
  cmp << "model,imputation,metric,difference,p_value,significant\n";
  for (ModelKind m : grid.models) {
    for (ImputeKind imp : grid.imputations) {
      ConfigKey on{m, imp, true}, off{m, imp, false};
      for (const std::string metric : {"bacc", "dfpr", "dtpr", "parity"}) {
        try {
          CompareResult r = compare(report, metric, on, off);
          char line[192];
          std::snprintf(line, sizeof(line), "%s,%s,%s,%.6f,%.6g,%d\n", to_string(m).c_str(),
                        to_string(imp).c_str(), metric.c_str(), r.difference, r.p_value,
                        r.significant ? 1 : 0);
          cmp << line;
        } catch (const std::exception&) {
          cmp << to_string(m) << "," << to_string(imp) << "," << metric << ",n/a,n/a,n/a\n";
        }
      }
    }
  }

  int failed = 0;
  for (const auto& r : report.rows)
    if (r.failed) {
      ++failed;
      std::cerr << "config " << to_string(r.key) << " failed: " << r.error_msg << "\n";
    }
  std::cout << report.rows.size() << " configurations, " << failed << " failed; reports in "
            << out_dir << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_report(const std::string& in, const std::string& format, const std::string& out) {
  GridReport report = load_report_json(in);
  if (format == "csv")
    emit_report_csv(report, out);
  else if (format == "json")
    emit_report_json(report, out);
  else {
    std::cerr << "report: format must be csv or json\n";
    return 1;
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tile classification debiasing pipeline: imputation, coverage-binned "
               "resampling, fairness metrics, and sliding-window deployment"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Top-level seed; all component streams derive from it");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset or deployment scene");
  std::string gen_out = "data.tds", gen_kind = "tiles";
  GenConfig gcfg;
  int gen_px = 512;
  double gen_deg = 24.0;
  gen->add_option("--out", gen_out, "Output path (.tds stem)")->required();
  gen->add_option("--kind", gen_kind, "tiles | scene");
  gen->add_option("--n", gcfg.n_tiles, "Number of tiles");
  gen->add_option("--channels", gcfg.channels, "Channel count");
  gen->add_option("--plume-rate", gcfg.plume_rate, "Base plume probability");
  gen->add_option("--bias", gcfg.bias, "Label-coverage coupling in [0,1]");
  gen->add_option("--split", gcfg.split_tag, "train | val | test | deploy");
  gen->add_option("--amplitude", gcfg.plume_amplitude, "Plume peak amplitude");
  gen->add_option("--width", gcfg.plume_width, "Plume Gaussian sigma, px");
  gen->add_option("--noise", gcfg.background_noise, "Per-pixel background sigma");
  gen->add_option("--level-sigma", gcfg.background_level_sigma, "Per-tile brightness sigma");
  gen->add_option("--blob-size", gcfg.cloud_blob_size, "Mean cloud ellipse semi-axis, px");
  gen->add_option("--px", gen_px, "Scene size in pixels (scene kind)");
  gen->add_option("--deg", gen_deg, "Scene extent in degrees (scene kind)");

  // train
  auto* tr = app.add_subcommand("train", "Train one model and write a checkpoint");
  std::string tr_data, tr_model = "vanilla", tr_out = "model.ckpt", tr_imp = "zero";
  TrainConfig tcfg;
  bool tr_resample = false;
  tr->add_option("--data", tr_data, "Training .tds")->required();
  tr->add_option("--model", tr_model, "vanilla | multibranch");
  tr->add_option("--out", tr_out, "Checkpoint path");
  tr->add_option("--imputation", tr_imp, "zero | median | sample | noise");
  tr->add_option("--noise-scale", tcfg.imputation.noise_scale, "Noise-augmented scale");
  tr->add_flag("--resample", tr_resample, "Coverage-binned class-balanced resampling");
  tr->add_option("--bins", tcfg.bins.bin_count, "Coverage bin count");
  tr->add_option("--epochs", tcfg.epochs, "SGD epochs");
  tr->add_option("--batch", tcfg.batch_size, "Minibatch size");
  tr->add_option("--lr", tcfg.learning_rate, "Learning rate");
  tr->add_option("--threshold", tcfg.threshold, "Decision threshold");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled dataset");
  std::string ev_data, ev_ckpt;
  double ev_threshold = 0.5, ev_split = 0.5;
  ev->add_option("--data", ev_data, "Labeled .tds")->required();
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint path")->required();
  ev->add_option("--threshold", ev_threshold, "Decision threshold");
  ev->add_option("--coverage-split", ev_split, "Low/high coverage group split");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Sliding-window deployment sweep over a scene");
  std::string sw_scene, sw_ckpt, sw_out = "sweep_out";
  WindowSpec sw_window;
  double sw_threshold = 0.5, sw_split = 0.5;
  sw->add_option("--scene", sw_scene, "Scene .tds")->required();
  sw->add_option("--ckpt", sw_ckpt, "Checkpoint path")->required();
  sw->add_option("--out", sw_out, "Output directory");
  sw->add_option("--window", sw_window.size, "Window size, px");
  sw->add_option("--stride", sw_window.stride, "Window stride, px");
  sw->add_option("--threshold", sw_threshold, "Decision threshold");
  sw->add_option("--coverage-split", sw_split, "Low/high coverage group split");

  // grid
  auto* gr = app.add_subcommand("grid", "Run the full configuration grid and emit reports");
  std::string gr_train, gr_test, gr_scene, gr_out = "grid_out";
  int gr_seeds = 5;
  RunOptions opts;
  gr->add_option("--train", gr_train, "Training .tds")->required();
  gr->add_option("--test", gr_test, "Test .tds")->required();
  gr->add_option("--scene", gr_scene, "Deployment scene .tds")->required();
  gr->add_option("--out", gr_out, "Output directory");
  gr->add_option("--seeds", gr_seeds, "Seeds per configuration");
  gr->add_option("--jobs", opts.jobs, "Concurrent configurations");
  gr->add_option("--bins", opts.bins.bin_count, "Coverage bin count");
  gr->add_option("--threshold", opts.threshold, "Decision threshold");
  gr->add_option("--coverage-split", opts.coverage_split, "Low/high coverage group split");
  gr->add_option("--noise-scale", opts.noise_scale, "Noise-augmented scale");
  gr->add_option("--epochs", opts.epochs, "SGD epochs");
  gr->add_option("--batch", opts.batch_size, "Minibatch size");
  gr->add_option("--lr", opts.learning_rate, "Learning rate");
  gr->add_option("--window", opts.window.size, "Window size, px");
  gr->add_option("--stride", opts.window.stride, "Window stride, px");

  // report
  auto* rp = app.add_subcommand("report", "Re-emit a stored report");
  std::string rp_in, rp_format = "csv", rp_out = "report.csv";
  rp->add_option("--in", rp_in, "report.json path")->required();
  rp->add_option("--format", rp_format, "csv | json");
  rp->add_option("--out", rp_out, "Output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gcfg.seed = derive_seed(seed, "gen");
      return cmd_gen(gen_out, gen_kind, gcfg, gen_px, gen_deg);
    }
    if (*tr) {
      tcfg.seed = derive_seed(seed, "train");
      tcfg.imputation.kind = parse_impute_kind(tr_imp);
      tcfg.resample = tr_resample;
      return cmd_train(tr_data, tr_model, tr_out, tcfg);
    }
    if (*ev) return cmd_eval(ev_data, ev_ckpt, ev_threshold, ev_split, seed);
    if (*sw) return cmd_sweep(sw_scene, sw_ckpt, sw_out, sw_window, sw_threshold, sw_split, seed);
    if (*gr) return cmd_grid(gr_train, gr_test, gr_scene, gr_out, gr_seeds, seed, opts);
    if (*rp) return cmd_report(rp_in, rp_format, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
