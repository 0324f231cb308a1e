#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "plume/resample.hpp"
#include "plume/synthgen.hpp"

using namespace plume;

namespace {

// Dataset of 1-pixel tiles with prescribed (coverage in {0,1}, label) pairs is
// too coarse for bin tests, so build 10x10 tiles with an exact valid count.
Tile tile_with(double coverage, int label, const std::string& id) {
  Tile t;
  t.id = id;
  t.channels = 1;
  t.height = 10;
  t.width = 10;
  t.pixels.assign(100, 1.0f);
  t.mask.assign(100, 0);
  auto valid = static_cast<std::size_t>(std::lround(coverage * 100.0));
  for (std::size_t i = 0; i < valid; ++i) t.mask[i] = 1;
  t.label = label;
  return t;
}

Dataset dataset_of(const std::vector<std::pair<double, int>>& cov_label) {
  Dataset ds;
  ds.channels = 1;
  ds.height = 10;
  ds.width = 10;
  int i = 0;
  for (auto [cov, y] : cov_label) ds.tiles.push_back(tile_with(cov, y, "t" + std::to_string(i++)));
  return ds;
}

}  // namespace

TEST_CASE("assign_bin: edges and clamp") {
  BinSpec spec{10};
  CHECK(assign_bin(Coverage{0.0}, spec) == 0);
  CHECK(assign_bin(Coverage{1.0}, spec) == 9);
  CHECK(assign_bin(Coverage{0.25}, spec) == 2);
  CHECK(assign_bin(Coverage{0.999}, spec) == 9);
  CHECK(assign_bin(Coverage{0.1}, spec) == 1);  // lower-inclusive bin edges
}

TEST_CASE("build_plan: one positive, three negatives in a single bin") {
  Dataset ds = dataset_of({{0.9, 1}, {0.92, 0}, {0.94, 0}, {0.96, 0}});
  SamplerPlan plan = build_plan(ds, BinSpec{10});
  REQUIRE(plan.weights.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(plan.bin_of[i] == 9);

  CHECK(plan.weights[0] == doctest::Approx(3.0 * plan.weights[1]).epsilon(1e-12));
  CHECK(plan.weights[1] == doctest::Approx(plan.weights[2]).epsilon(1e-12));
  CHECK(plan.weights[0] == doctest::Approx(0.5).epsilon(1e-12));  // P(draw positive) = 1/2
}

TEST_CASE("build_plan: balanced bins give uniform weights") {
  Dataset ds = dataset_of({{0.1, 0}, {0.12, 1}, {0.8, 0}, {0.82, 1}});
  SamplerPlan plan = build_plan(ds, BinSpec{10});
  for (double w : plan.weights) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("build_plan: single-class bin keeps its mass, no error") {
  Dataset ds = dataset_of({{0.1, 0}, {0.15, 0}, {0.9, 1}, {0.92, 0}});
  SamplerPlan plan = build_plan(ds, BinSpec{10});
  // bin 1 holds 2 of 4 tiles -> mass 0.5 split uniformly over its negatives
  CHECK(plan.weights[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(plan.weights[1] == doctest::Approx(0.25).epsilon(1e-12));
  // bin 9 holds both classes -> 0.25 each
  CHECK(plan.weights[2] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(plan.weights[3] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("build_plan: unlabeled tile is a hard error; empty dataset too") {
  Dataset ds = dataset_of({{0.5, 1}});
  ds.tiles[0].label.reset();
  CHECK_THROWS(build_plan(ds, BinSpec{10}));
  Dataset empty;
  empty.channels = 1;
  empty.height = 10;
  empty.width = 10;
  CHECK_THROWS(build_plan(empty, BinSpec{10}));
}

TEST_CASE("plan invariants on generated data") {
  GenConfig cfg;
  cfg.n_tiles = 2000;
  cfg.bias = 1.0;
  cfg.seed = 13;
  Dataset ds = generate_dataset(cfg);
  BinSpec spec{10};
  SamplerPlan plan = build_plan(ds, spec);

  double total = 0.0;
  std::map<int, double> bin_mass;
  std::map<std::pair<int, int>, double> class_mass;
  std::map<int, std::size_t> bin_count;
  std::map<std::pair<int, int>, std::size_t> class_count;
  for (std::size_t i = 0; i < plan.weights.size(); ++i) {
    CHECK(plan.weights[i] > 0.0);
    int b = plan.bin_of[i];
    CHECK(b == assign_bin(compute_coverage(ds.tiles[i]), spec));
    total += plan.weights[i];
    bin_mass[b] += plan.weights[i];
    bin_count[b] += 1;
    class_mass[{b, *ds.tiles[i].label}] += plan.weights[i];
    class_count[{b, *ds.tiles[i].label}] += 1;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  for (auto [b, mass] : bin_mass) {
    // across-bin mass proportional to tile count
    CHECK(mass == doctest::Approx(static_cast<double>(bin_count[b]) / ds.tiles.size())
                      .epsilon(1e-12));
    // within-bin class balance when both classes present
    bool both = class_count.count({b, 0}) && class_count.count({b, 1});
    if (both)
      CHECK(class_mass[{b, 0}] == doctest::Approx(class_mass[{b, 1}]).epsilon(1e-12));
  }
}

TEST_CASE("draw_epoch: degenerate plan, determinism, empty draw") {
  Dataset one = dataset_of({{0.5, 1}});
  SamplerPlan plan = build_plan(one, BinSpec{10});
  CHECK(draw_epoch(plan, 5, 3) == std::vector<std::size_t>{0, 0, 0, 0, 0});
  CHECK(draw_epoch(plan, 0, 3).empty());

  Dataset ds = dataset_of({{0.9, 1}, {0.92, 0}, {0.94, 0}, {0.96, 0}});
  SamplerPlan plan4 = build_plan(ds, BinSpec{10});
  CHECK(draw_epoch(plan4, 1000, 11) == draw_epoch(plan4, 1000, 11));
  CHECK(draw_epoch(plan4, 1000, 11) != draw_epoch(plan4, 1000, 12));
}

TEST_CASE("draw_epoch: 1-pos/3-neg positive fraction near one half") {
  Dataset ds = dataset_of({{0.9, 1}, {0.92, 0}, {0.94, 0}, {0.96, 0}});
  SamplerPlan plan = build_plan(ds, BinSpec{10});
  auto idx = draw_epoch(plan, 10000, 21);
  std::size_t pos = 0;
  for (auto i : idx) pos += (i == 0);
  double frac = static_cast<double>(pos) / 10000.0;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
}

TEST_CASE("draw_epoch: empirical frequencies match the plan within 3 sigma") {
  Dataset ds = dataset_of(
      {{0.1, 0}, {0.15, 0}, {0.18, 1}, {0.55, 1}, {0.58, 0}, {0.9, 1}, {0.95, 0}, {0.99, 0}});
  SamplerPlan plan = build_plan(ds, BinSpec{10});
  const std::size_t n = 100000;
  auto idx = draw_epoch(plan, n, 31);
  std::vector<std::size_t> hits(plan.weights.size(), 0);
  for (auto i : idx) hits[i]++;
  for (std::size_t i = 0; i < plan.weights.size(); ++i) {
    double p = plan.weights[i];
    double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(std::abs(static_cast<double>(hits[i]) - n * p) <= 3.0 * sigma);
  }
}

TEST_CASE("resampling removes the label-coverage correlation") {
  GenConfig cfg;
  cfg.n_tiles = 4000;
  cfg.bias = 1.0;
  cfg.seed = 19;
  Dataset ds = generate_dataset(cfg);

  std::vector<double> cov(ds.tiles.size()), lab(ds.tiles.size());
  for (std::size_t i = 0; i < ds.tiles.size(); ++i) {
    cov[i] = compute_coverage(ds.tiles[i]).value;
    lab[i] = *ds.tiles[i].label;
  }
  CHECK(testutil::pearson(lab, cov) > 0.3);  // raw data is biased

  SamplerPlan plan = build_plan(ds, BinSpec{10});
  auto idx = draw_epoch(plan, 10000, 41);
  std::vector<double> dcov, dlab;
  for (auto i : idx) {
    dcov.push_back(cov[i]);
    dlab.push_back(lab[i]);
  }
  CHECK(std::abs(testutil::pearson(dlab, dcov)) < 0.05);
}
