#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plume/tiles.hpp"

namespace plume {

// Synthetic tile generator. Tiles are Gaussian background per channel; label-1
// tiles get an additive 2-D Gaussian plume blob in channel 0; the mask is the
// complement of random elliptical cloud blobs punched until a target coverage
// (drawn from a mixture over [0.05, 1.0]) is reached. With bias > 0 the
// label-1 probability rises linearly with the drawn coverage:
//   p(y=1 | cov) = plume_rate * (1 - bias + 2*bias*cov), clamped to [0, 1].
struct GenConfig {
  int n_tiles = 1000;
  int channels = 3;
  int height = 32;
  int width = 32;
  double plume_rate = 0.3;
  double bias = 0.0;  // 0 = label independent of coverage, 1 = maximal coupling
  int cloud_blob_count = 64;      // cap on ellipses punched per tile
  double cloud_blob_size = 5.0;   // mean ellipse semi-axis, px
  double plume_amplitude = 2.5;
  double plume_width = 3.0;       // Gaussian sigma, px
  double background_noise = 0.3;  // per-pixel sigma around the background level
  double background_mean = 1.0;
  // Per-tile brightness offset shared by all channels. Creates hard negatives
  // whose scores sit near the threshold instead of a cleanly separable
  // background.
  double background_level_sigma = 0.1;
  std::uint64_t seed = 0;
  std::string split_tag = "train";
};

Dataset generate_dataset(const GenConfig& cfg);

// A large raster with geographic extent for the deployment sweep. Plumes are
// placed independently of the cloud field; their ground-truth positions are
// returned for auditing. Pixel row 0 sits at the southern edge.
struct Scene {
  Tile raster;  // unlabeled; mask = validity field
  double lat0 = 0.0;  // southern edge, degrees
  double lon0 = 0.0;  // western edge, degrees
  double deg_per_px_lat = 0.0;
  double deg_per_px_lon = 0.0;

  struct Truth {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
  };
  std::vector<Truth> truths;
};

Scene generate_scene(double width_deg, double height_deg, int px_width, int px_height,
                     const GenConfig& cfg);

// Scene on disk: a single-tile `.tds` (manifest carries the geo extent in the
// tile's lat/lon plus a scene sidecar) and a ground-truth text file
// `path + ".truth"` with one "id lat lon" line per plume.
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace plume
