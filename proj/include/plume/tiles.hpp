#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace plume {

// One multi-channel raster patch with a validity mask. The mask is shared by
// all channels: a pixel is missing in every channel or in none.
struct Tile {
  std::string id;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;       // C*H*W, row-major
  std::vector<std::uint8_t> mask;  // H*W, 1 = valid, 0 = missing
  std::optional<int> label;        // 0 = no plume, 1 = plume; absent for deployment tiles
  double lat = 0.0;
  double lon = 0.0;

  float& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  std::uint8_t& mask_at(int y, int x) { return mask[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t mask_at(int y, int x) const { return mask[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

// Fraction of valid pixels, exactly count/(H*W).
struct Coverage {
  double value = 0.0;
};

Coverage compute_coverage(const Tile& tile);

// Ordered tile collection sharing one shape.
struct Dataset {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::string split_tag = "train";  // train | val | test | deploy
  std::vector<Tile> tiles;
};

// On-disk `.tds` format: text manifest at `path`, binary payload at
// `path + ".bin"`. Payload per tile: C*H*W little-endian float32 followed by
// H*W mask bytes (strictly 0 or 1).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Partition by coverage: low = coverage < threshold, high = coverage >= threshold.
std::pair<std::vector<Tile>, std::vector<Tile>> split_groups(const std::vector<Tile>& tiles,
                                                             double threshold);

}  // namespace plume
