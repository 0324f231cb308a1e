#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "plume/experiment.hpp"

using namespace plume;

namespace {

// High-precision reference for the two-sided t-tail via Simpson integration of
// the t density on [|t|, cutoff].
double oracle_t_two_sided(double t, double df) {
  const double at = std::abs(t);
  const double norm = std::exp(std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df)) /
                      std::sqrt(df * 3.14159265358979323846);
  auto pdf = [&](double x) { return norm * std::pow(1.0 + x * x / df, -0.5 * (df + 1.0)); };
  const double cutoff = std::max(at, 1.0) * 1e4;
  const int n = 400000;  // even
  const double h = (cutoff - at) / n;
  double s = pdf(at) + pdf(cutoff);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(at + i * h);
  return 2.0 * s * h / 3.0;
}

struct SmallFixture {
  Dataset train, test;
  Scene scene;

  SmallFixture() {
    GenConfig cfg;
    cfg.bias = 1.0;
    cfg.n_tiles = 120;
    cfg.seed = 81;
    cfg.split_tag = "train";
    train = generate_dataset(cfg);
    cfg.n_tiles = 80;
    cfg.seed = 82;
    cfg.split_tag = "test";
    test = generate_dataset(cfg);
    GenConfig scfg;
    scfg.seed = 83;
    scene = generate_scene(3.0, 3.0, 64, 64, scfg);
  }

  RunOptions fast_opts() const {
    RunOptions opts;
    opts.epochs = 5;
    return opts;
  }
};

}  // namespace

TEST_CASE("expand_seeds: deterministic, distinct, validated") {
  auto a = expand_seeds(7, 5);
  auto b = expand_seeds(7, 5);
  CHECK(a == b);
  CHECK(a.size() == 5);
  CHECK(std::set<std::uint64_t>(a.begin(), a.end()).size() == 5);
  CHECK(expand_seeds(8, 5) != a);
  CHECK_THROWS(expand_seeds(7, 0));
}

TEST_CASE("welch_compare: degenerate inputs") {
  std::vector<double> same{0.7, 0.8, 0.9};
  auto r = welch_compare(same, same);
  CHECK(r.difference == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(!r.significant);

  // zero variance on both sides with distinct means: infinite t, significant
  std::vector<double> zeros{0.0, 0.0, 0.0}, ones{1.0, 1.0, 1.0};
  auto z = welch_compare(zeros, ones);
  CHECK(z.p_value == 0.0);
  CHECK(z.significant);
  CHECK(z.difference == -1.0);

  auto zz = welch_compare(zeros, zeros);
  CHECK(zz.p_value == 1.0);
  CHECK(!zz.significant);

  std::vector<double> one{0.5};
  CHECK_THROWS(welch_compare(one, same));
}

TEST_CASE("welch p-values match a quadrature oracle") {
  // direct check of the t-distribution tail used by the test
  for (auto [t, df] : std::vector<std::pair<double, double>>{
           {0.0, 4.0}, {0.5, 2.7}, {1.3, 4.0}, {2.1, 7.3}, {3.0, 4.0}, {4.5, 8.0}}) {
    CHECK(student_t_two_sided_p(t, df) == doctest::Approx(oracle_t_two_sided(t, df)).epsilon(1e-6));
  }

  // and through welch_compare on normal samples with a known separation
  Rng rng(91);
  for (double sep : {0.0, 0.5, 1.5}) {
    std::vector<double> a, b;
    for (int i = 0; i < 8; ++i) a.push_back(rng.next_normal());
    for (int i = 0; i < 6; ++i) b.push_back(sep + 1.3 * rng.next_normal());

    auto moments = [](const std::vector<double>& v) {
      double m = 0.0;
      for (double x : v) m += x;
      m /= v.size();
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      return std::pair(m, ss / (v.size() - 1.0));
    };
    auto [ma, va] = moments(a);
    auto [mb, vb] = moments(b);
    double sa = va / a.size(), sb = vb / b.size();
    double t = (ma - mb) / std::sqrt(sa + sb);
    double df = (sa + sb) * (sa + sb) / (sa * sa / (a.size() - 1.0) + sb * sb / (b.size() - 1.0));

    auto r = welch_compare(a, b);
    CHECK(std::abs(r.p_value - oracle_t_two_sided(t, df)) < 0.02);
    CHECK(r.difference == doctest::Approx(ma - mb).epsilon(1e-12));
  }
}

TEST_CASE("run_grid: single configuration, single seed") {
  SmallFixture fx;
  ExperimentGrid grid;
  grid.models = {ModelKind::Vanilla};
  grid.imputations = {ImputeKind::Median};
  grid.resampling = {false};
  grid.seeds = {42};

  GridReport report = run_grid(fx.train, fx.test, fx.scene, grid, fx.fast_opts());
  REQUIRE(report.rows.size() == 1);
  const ReportRow& row = report.rows[0];
  CHECK(!row.failed);
  CHECK(row.key.model == ModelKind::Vanilla);
  CHECK(row.bacc_seeds.size() == 1);
  CHECK(row.bacc.stddev == 0.0);
  CHECK(row.bacc.single_seed);
  CHECK(row.flag_seeds.size() == 1);
  CHECK(row.flags == row.flag_seeds[0]);
}

TEST_CASE("run_grid: full default grid shape, report schema, config completeness") {
  SmallFixture fx;
  ExperimentGrid grid;
  grid.seeds = expand_seeds(3, 2);
  RunOptions opts = fx.fast_opts();
  opts.epochs = 2;

  GridReport report = run_grid(fx.train, fx.test, fx.scene, grid, opts);
  REQUIRE(report.rows.size() == 16);
  std::set<std::string> keys;
  for (const auto& r : report.rows) {
    CHECK(!r.failed);
    CHECK(keys.insert(to_string(r.key)).second);  // every configuration exactly once
  }

  auto dir = testutil::scratch_dir("exp_schema");
  emit_report_csv(report, dir + "/report.csv");
  std::string csv = testutil::slurp(dir + "/report.csv");
  CHECK(csv.rfind("model,imputation,resampling,bacc_mean,bacc_std,precision_mean,precision_std,"
                  "recall_mean,recall_std,dfpr_mean,dfpr_std,dtpr_mean,dtpr_std,parity_mean,"
                  "parity_std,flags\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);  // header + 16 rows

  // stable (model, imputation, resampling) row order
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  std::vector<std::string> prefix;
  while (std::getline(lines, line)) prefix.push_back(line.substr(0, line.find(',', line.find(',', line.find(',') + 1) + 1)));
  for (std::size_t i = 0; i + 1 < prefix.size(); ++i) CHECK(prefix[i] != prefix[i + 1]);
  CHECK(prefix.front().rfind("vanilla,zero,off", 0) == 0);
  CHECK(prefix.back().rfind("multibranch,noise,on", 0) == 0);
}

TEST_CASE("run_grid is deterministic and job-count independent") {
  SmallFixture fx;
  ExperimentGrid grid;
  grid.models = {ModelKind::Vanilla};
  grid.imputations = {ImputeKind::Zero, ImputeKind::PixelSample};
  grid.resampling = {false, true};
  grid.seeds = expand_seeds(5, 2);
  RunOptions opts = fx.fast_opts();

  auto dir = testutil::scratch_dir("exp_det");
  GridReport r1 = run_grid(fx.train, fx.test, fx.scene, grid, opts);
  opts.jobs = 3;
  GridReport r2 = run_grid(fx.train, fx.test, fx.scene, grid, opts);

  emit_report_csv(r1, dir + "/a.csv");
  emit_report_csv(r2, dir + "/b.csv");
  emit_report_json(r1, dir + "/a.json");
  emit_report_json(r2, dir + "/b.json");
  CHECK(testutil::slurp(dir + "/a.csv") == testutil::slurp(dir + "/b.csv"));
  CHECK(testutil::slurp(dir + "/a.json") == testutil::slurp(dir + "/b.json"));

  // compare() on identical seed vectors says "no difference"
  ConfigKey key{ModelKind::Vanilla, ImputeKind::Zero, false};
  auto self = compare(r1, "bacc", key, key);
  CHECK(self.difference == 0.0);
  CHECK(!self.significant);
  CHECK_THROWS(compare(r1, "magic", key, key));
  CHECK_THROWS(compare(r1, "bacc", key, ConfigKey{ModelKind::MultiBranch, ImputeKind::Zero, false}));
}

TEST_CASE("json round-trip preserves the report; csv and json agree") {
  SmallFixture fx;
  ExperimentGrid grid;
  grid.models = {ModelKind::MultiBranch};
  grid.imputations = {ImputeKind::Zero, ImputeKind::NoiseAugmented};
  grid.resampling = {false, true};
  grid.seeds = expand_seeds(9, 2);
  GridReport report = run_grid(fx.train, fx.test, fx.scene, grid, fx.fast_opts());

  auto dir = testutil::scratch_dir("exp_json");
  emit_report_json(report, dir + "/r.json");
  GridReport back = load_report_json(dir + "/r.json");

  REQUIRE(back.rows.size() == report.rows.size());
  CHECK(back.seed_count == report.seed_count);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i];
    const auto& b = back.rows[i];
    CHECK(b.key == a.key);
    CHECK(b.failed == a.failed);
    CHECK(b.bacc_seeds == a.bacc_seeds);
    CHECK(b.prec_seeds == a.prec_seeds);
    CHECK(b.rec_seeds == a.rec_seeds);
    CHECK(b.dfpr_seeds == a.dfpr_seeds);
    CHECK(b.dtpr_seeds == a.dtpr_seeds);
    CHECK(b.par_seeds == a.par_seeds);
    CHECK(b.flag_seeds == a.flag_seeds);
    CHECK(b.bacc.mean == a.bacc.mean);
    CHECK(b.bacc.stddev == a.bacc.stddev);
    REQUIRE(b.grid_counts.size() == a.grid_counts.size());
    for (std::size_t c = 0; c < a.grid_counts.size(); ++c) {
      CHECK(b.grid_counts[c].lat_idx == a.grid_counts[c].lat_idx);
      CHECK(b.grid_counts[c].lon_idx == a.grid_counts[c].lon_idx);
      CHECK(b.grid_counts[c].count_a == a.grid_counts[c].count_a);
    }
  }

  // emitting the loaded report reproduces the same csv as the original
  emit_report_csv(report, dir + "/orig.csv");
  emit_report_csv(back, dir + "/back.csv");
  CHECK(testutil::slurp(dir + "/orig.csv") == testutil::slurp(dir + "/back.csv"));
}

TEST_CASE("empty report emits a header-only csv") {
  auto dir = testutil::scratch_dir("exp_empty");
  GridReport report;
  emit_report_csv(report, dir + "/empty.csv");
  std::string csv = testutil::slurp(dir + "/empty.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
  CHECK(csv.rfind("model,", 0) == 0);
}

TEST_CASE("resampling_disagreement produces finite percentages over the union grid") {
  SmallFixture fx;
  ExperimentGrid grid;
  grid.models = {ModelKind::Vanilla};
  grid.imputations = {ImputeKind::Zero};
  grid.resampling = {false, true};
  grid.seeds = expand_seeds(11, 2);
  GridReport report = run_grid(fx.train, fx.test, fx.scene, grid, fx.fast_opts());

  auto cells = resampling_disagreement(report);
  for (const auto& c : cells) {
    CHECK(c.abs_pct_diff >= 0.0);
    CHECK(c.abs_pct_diff <= 200.0);
    CHECK(std::isfinite(c.abs_pct_diff));
    CHECK(c.count_a >= 0.0);
    CHECK(c.count_b >= 0.0);
  }
}
