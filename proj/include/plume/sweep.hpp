#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plume/impute.hpp"
#include "plume/model.hpp"
#include "plume/synthgen.hpp"
#include "plume/tiles.hpp"

namespace plume {

struct WindowSpec {
  int size = 32;
  int stride = 16;
};

// Windows at offsets {0, stride, 2*stride, ...} per axis while the full
// window fits: floor((dim - size)/stride) + 1 per axis. Tiles inherit
// interpolated geolocation from the scene and masks cropped from its
// validity field.
std::vector<Tile> tile_scene(const Scene& scene, const WindowSpec& spec);

struct FlagRecord {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  double score = 0.0;
  bool flagged = false;
  double coverage = 0.0;
};

// impute -> forward -> threshold per tile; flagged iff score >= threshold.
std::vector<FlagRecord> score_and_flag(const std::vector<Tile>& tiles, const ModelParams& params,
                                       const ImputationStrategy& strategy, double threshold,
                                       std::uint64_t seed);

// One grid cell, lower-inclusive and anchored at (-90, -180).
struct GridCellStats {
  int lat_idx = 0;
  int lon_idx = 0;
  double cell_lat = 0.0;  // lower edge, degrees
  double cell_lon = 0.0;
  double count_a = 0.0;
  double count_b = 0.0;
  double abs_pct_diff = 0.0;
};

// Per-cell flag counts for one configuration (stored in count_a). Cells are
// emitted in (lat_idx, lon_idx) order; only non-empty cells appear.
std::vector<GridCellStats> aggregate_grid(const std::vector<FlagRecord>& records,
                                          double cell_deg = 3.0);

// Per-cell absolute percentage difference |a-b| / mean(a,b) * 100 over the
// union of cells; cells where both counts are zero give 0.
std::vector<GridCellStats> disagreement_map(const std::vector<GridCellStats>& stats_a,
                                            const std::vector<GridCellStats>& stats_b);

void write_flags_csv(const std::vector<FlagRecord>& records, const std::string& config_tag,
                     const std::string& path);
void write_grid_csv(const std::vector<GridCellStats>& cells, const std::string& path);

}  // namespace plume
