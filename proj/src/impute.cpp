#include "plume/impute.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "plume/rng.hpp"

namespace plume {

ImputeKind parse_impute_kind(const std::string& name) {
  if (name == "zero") return ImputeKind::Zero;
  if (name == "median") return ImputeKind::Median;
  if (name == "sample") return ImputeKind::PixelSample;
  if (name == "noise") return ImputeKind::NoiseAugmented;
  throw std::runtime_error("unknown imputation strategy '" + name + "'");
}

std::string to_string(ImputeKind kind) {
  switch (kind) {
    case ImputeKind::Zero: return "zero";
    case ImputeKind::Median: return "median";
    case ImputeKind::PixelSample: return "sample";
    case ImputeKind::NoiseAugmented: return "noise";
  }
  return "?";
}

namespace {

double median_of(std::vector<float>& v) {
  // even count: mean of the two central order statistics
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2]));
}

double stddev_of(const std::vector<float>& v) {
  // population std of the channel's valid pixels
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (float x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

ImputeResult impute(const Tile& tile, const ImputationStrategy& strategy, std::uint64_t seed) {
  if (strategy.noise_scale < 0.0) throw std::runtime_error("impute: noise_scale must be >= 0");
  if (tile.mask.size() != tile.pixel_count())
    throw std::runtime_error("impute: mask shape does not match H*W");

  ImputeResult result{tile, {}};
  Tile& out = result.tile;

  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < tile.mask.size(); ++i)
    if (tile.mask[i] == 0) missing.push_back(i);
  if (missing.empty()) return result;

  const std::size_t hw = tile.pixel_count();
  Rng rng(derive_seed(derive_seed(seed, "impute"), fnv1a(tile.id)));

  for (int c = 0; c < tile.channels; ++c) {
    float* plane = out.pixels.data() + static_cast<std::size_t>(c) * hw;

    if (strategy.kind == ImputeKind::Zero) {
      for (auto i : missing) plane[i] = 0.0f;
      continue;
    }

    std::vector<float> valid;
    valid.reserve(hw - missing.size());
    for (std::size_t i = 0; i < hw; ++i)
      if (tile.mask[i] != 0) valid.push_back(plane[i]);

    if (valid.empty()) {
      // fully cloud-covered channel: no source statistics, fall back to zero
      for (auto i : missing) plane[i] = 0.0f;
      result.fallback_channels.push_back(c);
      continue;
    }

    switch (strategy.kind) {
      case ImputeKind::Median: {
        float fill = static_cast<float>(median_of(valid));
        for (auto i : missing) plane[i] = fill;
        break;
      }
      case ImputeKind::PixelSample: {
        for (auto i : missing) plane[i] = valid[rng.next_index(valid.size())];
        break;
      }
      case ImputeKind::NoiseAugmented: {
        double med = median_of(valid);
        double sigma = strategy.noise_scale * stddev_of(valid);
        for (auto i : missing)
          plane[i] = static_cast<float>(med + (sigma > 0.0 ? sigma * rng.next_normal() : 0.0));
        break;
      }
      default: break;
    }
  }
  return result;
}

}  // namespace plume
