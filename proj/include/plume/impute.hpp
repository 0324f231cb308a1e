#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plume/tiles.hpp"

namespace plume {

enum class ImputeKind { Zero, Median, PixelSample, NoiseAugmented };

ImputeKind parse_impute_kind(const std::string& name);  // zero|median|sample|noise
std::string to_string(ImputeKind kind);

struct ImputationStrategy {
  ImputeKind kind = ImputeKind::Zero;
  double noise_scale = 1.0;  // used only by NoiseAugmented
};

struct ImputeResult {
  Tile tile;
  // Channels that had zero valid pixels and fell back to 0.0 fill. Empty on
  // the normal path.
  std::vector<int> fallback_channels;
};

// Fills every missing pixel; valid pixels are preserved bit-exactly. Zero and
// Median ignore the seed. PixelSample and NoiseAugmented draw from a stream
// derived from (seed, tile.id), so results do not depend on the order tiles
// are processed in.
ImputeResult impute(const Tile& tile, const ImputationStrategy& strategy, std::uint64_t seed);

}  // namespace plume
