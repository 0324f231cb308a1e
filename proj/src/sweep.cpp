#include "plume/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "plume/rng.hpp"

namespace plume {

std::vector<Tile> tile_scene(const Scene& scene, const WindowSpec& spec) {
  if (spec.size <= 0 || spec.stride <= 0)
    throw std::runtime_error("tile_scene: size and stride must be positive");
  const Tile& r = scene.raster;
  if (r.height < spec.size || r.width < spec.size)
    throw std::runtime_error("tile_scene: scene smaller than the window");

  const int ny = (r.height - spec.size) / spec.stride + 1;
  const int nx = (r.width - spec.size) / spec.stride + 1;
  std::vector<Tile> tiles;
  tiles.reserve(static_cast<std::size_t>(ny) * nx);
  char idbuf[48];
  for (int wy = 0; wy < ny; ++wy) {
    for (int wx = 0; wx < nx; ++wx) {
      const int y0 = wy * spec.stride, x0 = wx * spec.stride;
      Tile t;
      std::snprintf(idbuf, sizeof(idbuf), "w_%04d_%04d", wy, wx);
      t.id = idbuf;
      t.channels = r.channels;
      t.height = spec.size;
      t.width = spec.size;
      t.pixels.resize(static_cast<std::size_t>(r.channels) * spec.size * spec.size);
      t.mask.resize(static_cast<std::size_t>(spec.size) * spec.size);
      for (int c = 0; c < r.channels; ++c)
        for (int y = 0; y < spec.size; ++y)
          for (int x = 0; x < spec.size; ++x) t.at(c, y, x) = r.at(c, y0 + y, x0 + x);
      for (int y = 0; y < spec.size; ++y)
        for (int x = 0; x < spec.size; ++x) t.mask_at(y, x) = r.mask_at(y0 + y, x0 + x);
      t.lat = scene.lat0 + (y0 + spec.size / 2.0) * scene.deg_per_px_lat;
      t.lon = scene.lon0 + (x0 + spec.size / 2.0) * scene.deg_per_px_lon;
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

std::vector<FlagRecord> score_and_flag(const std::vector<Tile>& tiles, const ModelParams& params,
                                       const ImputationStrategy& strategy, double threshold,
                                       std::uint64_t seed) {
  std::vector<FlagRecord> out;
  out.reserve(tiles.size());
  for (const auto& tile : tiles) {
    Tile imputed = impute(tile, strategy, seed).tile;
    double score = forward(params, imputed);
    out.push_back({tile.id, tile.lat, tile.lon, score, score >= threshold,
                   compute_coverage(tile).value});
  }
  return out;
}

std::vector<GridCellStats> aggregate_grid(const std::vector<FlagRecord>& records,
                                          double cell_deg) {
  if (cell_deg <= 0.0) throw std::runtime_error("aggregate_grid: cell size must be positive");
  const int n_lat = static_cast<int>(std::ceil(180.0 / cell_deg));
  const int n_lon = static_cast<int>(std::ceil(360.0 / cell_deg));

  std::map<std::pair<int, int>, double> counts;
  for (const auto& rec : records) {
    if (rec.lat < -90.0 || rec.lat > 90.0 || rec.lon < -180.0 || rec.lon >= 180.0)
      throw std::runtime_error("aggregate_grid: coordinates out of range for '" + rec.id + "'");
    if (!rec.flagged) continue;
    // lower-inclusive cells anchored at (-90, -180); lat = 90 clamps into the
    // last row
    int li = std::min(n_lat - 1, static_cast<int>(std::floor((rec.lat + 90.0) / cell_deg)));
    int lj = static_cast<int>(std::floor((rec.lon + 180.0) / cell_deg));
    counts[{li, lj}] += 1.0;
  }

  std::vector<GridCellStats> out;
  out.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    GridCellStats c;
    c.lat_idx = key.first;
    c.lon_idx = key.second;
    c.cell_lat = -90.0 + key.first * cell_deg;
    c.cell_lon = -180.0 + key.second * cell_deg;
    c.count_a = count;
    out.push_back(c);
  }
  return out;
}

std::vector<GridCellStats> disagreement_map(const std::vector<GridCellStats>& stats_a,
                                            const std::vector<GridCellStats>& stats_b) {
  std::map<std::pair<int, int>, GridCellStats> merged;
  for (const auto& c : stats_a) {
    auto& m = merged[{c.lat_idx, c.lon_idx}];
    m = c;
    m.count_b = 0.0;
  }
  for (const auto& c : stats_b) {
    auto& m = merged[{c.lat_idx, c.lon_idx}];
    m.lat_idx = c.lat_idx;
    m.lon_idx = c.lon_idx;
    m.cell_lat = c.cell_lat;
    m.cell_lon = c.cell_lon;
    m.count_b = c.count_a;
  }
  std::vector<GridCellStats> out;
  out.reserve(merged.size());
  for (auto& [key, c] : merged) {
    double mean = 0.5 * (c.count_a + c.count_b);
    c.abs_pct_diff = mean > 0.0 ? std::abs(c.count_a - c.count_b) / mean * 100.0 : 0.0;
    out.push_back(c);
  }
  return out;
}

void write_flags_csv(const std::vector<FlagRecord>& records, const std::string& config_tag,
                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_flags_csv: cannot open '" + path + "'");
  out << "id,lat,lon,score,flagged,coverage,config\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%d,%.6f,%s\n", r.id.c_str(), r.lat, r.lon,
                  r.score, r.flagged ? 1 : 0, r.coverage, config_tag.c_str());
    out << line;
  }
  if (!out) throw std::runtime_error("write_flags_csv: write failed");
}

void write_grid_csv(const std::vector<GridCellStats>& cells, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_grid_csv: cannot open '" + path + "'");
  out << "cell_lat,cell_lon,count_a,count_b,abs_pct_diff\n";
  char line[160];
  for (const auto& c : cells) {
    std::snprintf(line, sizeof(line), "%.1f,%.1f,%.6f,%.6f,%.6f\n", c.cell_lat, c.cell_lon,
                  c.count_a, c.count_b, c.abs_pct_diff);
    out << line;
  }
  if (!out) throw std::runtime_error("write_grid_csv: write failed");
}

}  // namespace plume
