#include "plume/resample.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "plume/rng.hpp"

namespace plume {

int assign_bin(Coverage coverage, const BinSpec& spec) {
  if (spec.bin_count <= 0) throw std::runtime_error("assign_bin: bin_count must be positive");
  if (coverage.value < 0.0 || coverage.value > 1.0)
    throw std::runtime_error("assign_bin: coverage out of [0, 1]");
  int idx = static_cast<int>(std::floor(coverage.value * spec.bin_count));
  return std::min(idx, spec.bin_count - 1);
}

SamplerPlan build_plan(const Dataset& ds, const BinSpec& spec) {
  if (ds.tiles.empty()) throw std::runtime_error("build_plan: empty dataset");

  const std::size_t n = ds.tiles.size();
  SamplerPlan plan;
  plan.weights.resize(n);
  plan.bin_of.resize(n);

  // per-bin class counts
  std::vector<std::array<std::size_t, 2>> counts(spec.bin_count, {0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    const Tile& t = ds.tiles[i];
    if (!t.label)
      throw std::runtime_error("build_plan: tile '" + t.id + "' is unlabeled");
    plan.bin_of[i] = assign_bin(compute_coverage(t), spec);
    counts[plan.bin_of[i]][*t.label] += 1;
  }

  // Bin mass proportional to bin tile count; within a bin holding both
  // classes, each class takes half the mass, spread uniformly over its tiles.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = counts[plan.bin_of[i]];
    int y = *ds.tiles[i].label;
    double bin_mass = static_cast<double>(c[0] + c[1]) / static_cast<double>(n);
    double class_share = (c[0] > 0 && c[1] > 0) ? 0.5 : 1.0;
    plan.weights[i] = bin_mass * class_share / static_cast<double>(c[y]);
  }

  double total = 0.0;
  for (double w : plan.weights) total += w;
  for (double& w : plan.weights) w /= total;
  return plan;
}

std::vector<std::size_t> draw_epoch(const SamplerPlan& plan, std::size_t n, std::uint64_t seed) {
  if (plan.weights.empty()) throw std::runtime_error("draw_epoch: empty plan");

  std::vector<double> cumulative(plan.weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < plan.weights.size(); ++i) {
    acc += plan.weights[i];
    cumulative[i] = acc;
  }
  cumulative.back() = 1.0;

  Rng rng(derive_seed(seed, "draw_epoch"));
  std::vector<std::size_t> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double u = rng.next_double();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    out[k] = static_cast<std::size_t>(it - cumulative.begin());
  }
  return out;
}

}  // namespace plume
