#include "plume/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "plume/rng.hpp"
#include "plume/tiles.hpp"

namespace plume {

std::vector<std::uint64_t> expand_seeds(std::uint64_t top_seed, int count) {
  if (count < 1) throw std::runtime_error("expand_seeds: count must be >= 1");
  std::vector<std::uint64_t> seeds(count);
  for (int i = 0; i < count; ++i)
    seeds[i] = derive_seed(derive_seed(top_seed, "seed"), static_cast<std::uint64_t>(i));
  return seeds;
}

std::string to_string(const ConfigKey& key) {
  return to_string(key.model) + "/" + to_string(key.imputation) + "/" +
         (key.resample ? "on" : "off");
}

namespace {

int model_order(ModelKind m) { return m == ModelKind::Vanilla ? 0 : 1; }
int impute_order(ImputeKind k) { return static_cast<int>(k); }

bool row_before(const ReportRow& a, const ReportRow& b) {
  auto ka = std::tuple(model_order(a.key.model), impute_order(a.key.imputation), a.key.resample);
  auto kb = std::tuple(model_order(b.key.model), impute_order(b.key.imputation), b.key.resample);
  return ka < kb;
}

void merge_cells(std::map<std::pair<int, int>, GridCellStats>& into,
                 const std::vector<GridCellStats>& cells, double scale) {
  for (const auto& c : cells) {
    auto& m = into[{c.lat_idx, c.lon_idx}];
    m.lat_idx = c.lat_idx;
    m.lon_idx = c.lon_idx;
    m.cell_lat = c.cell_lat;
    m.cell_lon = c.cell_lon;
    m.count_a += scale * c.count_a;
  }
}

std::vector<GridCellStats> to_cells(const std::map<std::pair<int, int>, GridCellStats>& m) {
  std::vector<GridCellStats> out;
  out.reserve(m.size());
  for (const auto& [k, c] : m) out.push_back(c);
  return out;
}

void push_if_defined(std::vector<double>& dst, const std::optional<double>& v) {
  if (v && std::isfinite(*v)) dst.push_back(*v);
}

ReportRow run_config(const Dataset& train_ds, const Dataset& test_ds,
                     const std::vector<Tile>& deploy_tiles, const ConfigKey& key,
                     std::span<const std::uint64_t> seeds, const RunOptions& opts) {
  ReportRow row;
  row.key = key;

  std::vector<double> test_coverages;
  test_coverages.reserve(test_ds.tiles.size());
  std::vector<int> test_labels;
  for (const auto& t : test_ds.tiles) {
    if (!t.label) throw std::runtime_error("run_grid: unlabeled test tile '" + t.id + "'");
    test_labels.push_back(*t.label);
    test_coverages.push_back(compute_coverage(t).value);
  }

  ImputationStrategy strategy{key.imputation, opts.noise_scale};
  std::map<std::pair<int, int>, GridCellStats> grid_acc;

  for (std::uint64_t seed : seeds) {
    const std::uint64_t run_seed = derive_seed(seed, to_string(key));
    TrainConfig cfg;
    cfg.epochs = opts.epochs;
    cfg.batch_size = opts.batch_size;
    cfg.learning_rate = opts.learning_rate;
    cfg.seed = run_seed;
    cfg.imputation = strategy;
    cfg.resample = key.resample;
    cfg.bins = opts.bins;
    cfg.threshold = opts.threshold;

    ModelParams params = train(train_ds, key.model, cfg);

    // Q1: hold-out test metrics
    const std::uint64_t eval_seed = derive_seed(run_seed, "eval");
    std::vector<double> scores;
    scores.reserve(test_ds.tiles.size());
    for (const auto& t : test_ds.tiles)
      scores.push_back(forward(params, impute(t, strategy, eval_seed).tile));

    ConfusionCounts c = confusion(scores, test_labels, opts.threshold);
    push_if_defined(row.bacc_seeds, balanced_accuracy(c));
    push_if_defined(row.prec_seeds, precision(c));
    push_if_defined(row.rec_seeds, recall(c));
    DeltaRates d =
        delta_rates(scores, test_labels, test_coverages, opts.threshold, opts.coverage_split);
    push_if_defined(row.dfpr_seeds, d.delta_fpr);
    push_if_defined(row.dtpr_seeds, d.delta_tpr);

    // Q2: deployment sweep
    auto records = score_and_flag(deploy_tiles, params, strategy, opts.threshold,
                                  derive_seed(run_seed, "deploy"));
    std::vector<double> dscores, dcoverages;
    dscores.reserve(records.size());
    for (const auto& r : records) {
      dscores.push_back(r.score);
      dcoverages.push_back(r.coverage);
    }
    push_if_defined(row.par_seeds, parity(dscores, dcoverages, opts.threshold, opts.coverage_split));
    row.flag_seeds.push_back(static_cast<double>(count_flags(dscores, opts.threshold)));

    merge_cells(grid_acc, aggregate_grid(records), 1.0);
  }

  auto agg = [](const std::vector<double>& v) {
    return v.empty() ? MeanStd{} : aggregate_seeds(v);
  };
  row.bacc = agg(row.bacc_seeds);
  row.prec = agg(row.prec_seeds);
  row.rec = agg(row.rec_seeds);
  row.dfpr = agg(row.dfpr_seeds);
  row.dtpr = agg(row.dtpr_seeds);
  row.par = agg(row.par_seeds);
  row.flags = row.flag_seeds.empty() ? 0.0 : agg(row.flag_seeds).mean;
  row.grid_counts = to_cells(grid_acc);
  return row;
}

}  // namespace

GridReport run_grid(const Dataset& train_ds, const Dataset& test_ds, const Scene& deploy,
                    const ExperimentGrid& grid, const RunOptions& opts) {
  if (grid.models.empty() || grid.imputations.empty() || grid.resampling.empty() ||
      grid.seeds.empty())
    throw std::runtime_error("run_grid: every grid dimension must be nonempty");

  const std::vector<Tile> deploy_tiles = tile_scene(deploy, opts.window);

  std::vector<ConfigKey> keys;
  for (ModelKind m : grid.models)
    for (ImputeKind imp : grid.imputations)
      for (bool r : grid.resampling) keys.push_back({m, imp, r});

  GridReport report;
  report.seed_count = static_cast<int>(grid.seeds.size());
  report.rows.resize(keys.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= keys.size()) return;
      ReportRow& row = report.rows[i];
      try {
        row = run_config(train_ds, test_ds, deploy_tiles, keys[i], grid.seeds, opts);
      } catch (const std::exception& e) {
        // one failed configuration becomes an error row, not a grid abort
        row = ReportRow{};
        row.key = keys[i];
        row.failed = true;
        row.error_msg = e.what();
      }
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::sort(report.rows.begin(), report.rows.end(), row_before);
  return report;
}

CompareResult welch_compare(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::runtime_error("welch_compare: need >= 2 seeds per side");

  auto moments = [](std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair(m, ss / static_cast<double>(v.size() - 1));
  };
  auto [ma, va] = moments(a);
  auto [mb, vb] = moments(b);

  CompareResult res;
  res.difference = ma - mb;
  double sa = va / static_cast<double>(a.size());
  double sb = vb / static_cast<double>(b.size());
  if (sa + sb == 0.0) {
    // zero variance on both sides: infinite t unless the means coincide
    res.p_value = (ma == mb) ? 1.0 : 0.0;
    res.significant = ma != mb;
    return res;
  }
  double t = (ma - mb) / std::sqrt(sa + sb);
  double df = (sa + sb) * (sa + sb) /
              (sa * sa / static_cast<double>(a.size() - 1) +
               sb * sb / static_cast<double>(b.size() - 1));
  res.p_value = student_t_two_sided_p(t, df);
  res.significant = res.p_value < 0.05;
  return res;
}

namespace {

// Continued-fraction evaluation of the regularized incomplete beta function.
double betacf(double a, double b, double x) {
  const int max_iter = 200;
  const double eps = 1e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log(1.0 - x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) throw std::runtime_error("student_t_two_sided_p: df must be positive");
  double x = df / (df + t * t);
  return reg_inc_beta(0.5 * df, 0.5, x);
}

namespace {

const std::vector<double>* seed_vector(const ReportRow& row, const std::string& metric) {
  if (metric == "bacc") return &row.bacc_seeds;
  if (metric == "precision") return &row.prec_seeds;
  if (metric == "recall") return &row.rec_seeds;
  if (metric == "dfpr") return &row.dfpr_seeds;
  if (metric == "dtpr") return &row.dtpr_seeds;
  if (metric == "parity") return &row.par_seeds;
  throw std::runtime_error("compare: unknown metric '" + metric + "'");
}

const ReportRow& find_row(const GridReport& report, const ConfigKey& key) {
  for (const auto& row : report.rows)
    if (row.key == key) return row;
  throw std::runtime_error("compare: configuration " + to_string(key) + " not in report");
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string mean_or_na(const ReportRow& row, const std::vector<double>& seeds, double mean) {
  return (row.failed || seeds.empty()) ? "n/a" : fmt(mean);
}

}  // namespace

CompareResult compare(const GridReport& report, const std::string& metric, const ConfigKey& a,
                      const ConfigKey& b) {
  return welch_compare(*seed_vector(find_row(report, a), metric),
                       *seed_vector(find_row(report, b), metric));
}

void emit_report_csv(const GridReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("emit_report_csv: cannot open '" + path + "'");
  out << "model,imputation,resampling,bacc_mean,bacc_std,precision_mean,precision_std,"
         "recall_mean,recall_std,dfpr_mean,dfpr_std,dtpr_mean,dtpr_std,parity_mean,parity_std,"
         "flags\n";
  for (const auto& r : report.rows) {
    auto cell = [&](const std::vector<double>& seeds, const MeanStd& ms) {
      return mean_or_na(r, seeds, ms.mean) + "," + mean_or_na(r, seeds, ms.stddev);
    };
    out << to_string(r.key.model) << "," << to_string(r.key.imputation) << ","
        << (r.key.resample ? "on" : "off") << "," << cell(r.bacc_seeds, r.bacc) << ","
        << cell(r.prec_seeds, r.prec) << "," << cell(r.rec_seeds, r.rec) << ","
        << cell(r.dfpr_seeds, r.dfpr) << "," << cell(r.dtpr_seeds, r.dtpr) << ","
        << cell(r.par_seeds, r.par) << ","
        << (r.failed || r.flag_seeds.empty() ? "n/a" : std::to_string(std::llround(r.flags)))
        << "\n";
  }
  if (!out) throw std::runtime_error("emit_report_csv: write failed");
}

void emit_report_json(const GridReport& report, const std::string& path) {
  nlohmann::json j;
  j["seed_count"] = report.seed_count;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row;
    row["model"] = to_string(r.key.model);
    row["imputation"] = to_string(r.key.imputation);
    row["resampling"] = r.key.resample ? "on" : "off";
    row["failed"] = r.failed;
    if (r.failed) row["error"] = r.error_msg;
    auto metric = [](const std::vector<double>& seeds, const MeanStd& ms) {
      nlohmann::json m;
      m["seeds"] = seeds;
      if (!seeds.empty()) {
        m["mean"] = ms.mean;
        m["std"] = ms.stddev;
      }
      return m;
    };
    row["bacc"] = metric(r.bacc_seeds, r.bacc);
    row["precision"] = metric(r.prec_seeds, r.prec);
    row["recall"] = metric(r.rec_seeds, r.rec);
    row["dfpr"] = metric(r.dfpr_seeds, r.dfpr);
    row["dtpr"] = metric(r.dtpr_seeds, r.dtpr);
    row["parity"] = metric(r.par_seeds, r.par);
    row["flags"] = metric(r.flag_seeds, r.flag_seeds.empty() ? MeanStd{} : MeanStd{r.flags, 0.0});
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.grid_counts)
      cells.push_back({{"lat_idx", c.lat_idx},
                       {"lon_idx", c.lon_idx},
                       {"cell_lat", c.cell_lat},
                       {"cell_lon", c.cell_lon},
                       {"count", c.count_a}});
    row["grid_counts"] = cells;
    j["rows"].push_back(row);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("emit_report_json: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("emit_report_json: write failed");
}

GridReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_report_json: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;

  GridReport report;
  report.seed_count = j.at("seed_count").get<int>();
  for (const auto& row : j.at("rows")) {
    ReportRow r;
    r.key.model = parse_model_kind(row.at("model").get<std::string>());
    r.key.imputation = parse_impute_kind(row.at("imputation").get<std::string>());
    r.key.resample = row.at("resampling").get<std::string>() == "on";
    r.failed = row.at("failed").get<bool>();
    if (r.failed) r.error_msg = row.value("error", "");
    auto metric = [&](const char* name, std::vector<double>& seeds, MeanStd& ms) {
      seeds = row.at(name).at("seeds").get<std::vector<double>>();
      if (!seeds.empty()) ms = aggregate_seeds(seeds);
    };
    metric("bacc", r.bacc_seeds, r.bacc);
    metric("precision", r.prec_seeds, r.prec);
    metric("recall", r.rec_seeds, r.rec);
    metric("dfpr", r.dfpr_seeds, r.dfpr);
    metric("dtpr", r.dtpr_seeds, r.dtpr);
    metric("parity", r.par_seeds, r.par);
    r.flag_seeds = row.at("flags").at("seeds").get<std::vector<double>>();
    if (!r.flag_seeds.empty()) r.flags = aggregate_seeds(r.flag_seeds).mean;
    for (const auto& cell : row.at("grid_counts")) {
      GridCellStats c;
      c.lat_idx = cell.at("lat_idx").get<int>();
      c.lon_idx = cell.at("lon_idx").get<int>();
      c.cell_lat = cell.at("cell_lat").get<double>();
      c.cell_lon = cell.at("cell_lon").get<double>();
      c.count_a = cell.at("count").get<double>();
      r.grid_counts.push_back(c);
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::vector<GridCellStats> resampling_disagreement(const GridReport& report) {
  std::map<std::pair<int, int>, GridCellStats> on_acc, off_acc;
  int on_runs = 0, off_runs = 0;
  for (const auto& r : report.rows) {
    if (r.failed) continue;
    auto& acc = r.key.resample ? on_acc : off_acc;
    merge_cells(acc, r.grid_counts, 1.0);
    (r.key.resample ? on_runs : off_runs) += report.seed_count;
  }
  auto normalize = [](std::map<std::pair<int, int>, GridCellStats>& m, int runs) {
    if (runs == 0) return;
    for (auto& [k, c] : m) c.count_a /= static_cast<double>(runs);
  };
  normalize(on_acc, on_runs);
  normalize(off_acc, off_runs);
  return disagreement_map(to_cells(on_acc), to_cells(off_acc));
}

}  // namespace plume
