#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "plume/tiles.hpp"

namespace plume {

// Equal-width partition of [0, 1]; coverage 1.0 goes to the last bin.
struct BinSpec {
  int bin_count = 10;
};

int assign_bin(Coverage coverage, const BinSpec& spec);

// Per-tile sampling weights enforcing class balance within each coverage bin.
// Each bin keeps total weight proportional to its tile count; within a bin
// holding both classes, each class gets half the bin's mass.
struct SamplerPlan {
  std::vector<double> weights;  // positive, sum to 1
  std::vector<int> bin_of;
};

SamplerPlan build_plan(const Dataset& ds, const BinSpec& spec);

// n i.i.d. draws (with replacement) from the plan's categorical distribution.
std::vector<std::size_t> draw_epoch(const SamplerPlan& plan, std::size_t n, std::uint64_t seed);

}  // namespace plume
