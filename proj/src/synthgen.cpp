#include "plume/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "plume/rng.hpp"

namespace plume {

namespace {

void fill_background(Tile& t, const GenConfig& cfg, Rng& rng) {
  // independent per-channel brightness levels: no fixed channel combination
  // cancels them, so they act as irreducible scene variability
  const std::size_t hw = t.pixel_count();
  for (int c = 0; c < t.channels; ++c) {
    double level = cfg.background_mean + cfg.background_level_sigma * rng.next_normal();
    float* plane = t.pixels.data() + static_cast<std::size_t>(c) * hw;
    for (std::size_t i = 0; i < hw; ++i)
      plane[i] = static_cast<float>(level + cfg.background_noise * rng.next_normal());
  }
}

// Punch one axis-aligned ellipse of missing pixels. Bounds are clamped to the
// given sub-rectangle so scene blocks stay independent.
void punch_ellipse(Tile& t, Rng& rng, double mean_size, int y0, int y1, int x0, int x1) {
  double cy = rng.next_uniform(y0, y1);
  double cx = rng.next_uniform(x0, x1);
  double ry = rng.next_uniform(0.4 * mean_size, 1.6 * mean_size);
  double rx = rng.next_uniform(0.4 * mean_size, 1.6 * mean_size);
  int ylo = std::max(y0, static_cast<int>(std::floor(cy - ry)));
  int yhi = std::min(y1 - 1, static_cast<int>(std::ceil(cy + ry)));
  int xlo = std::max(x0, static_cast<int>(std::floor(cx - rx)));
  int xhi = std::min(x1 - 1, static_cast<int>(std::ceil(cx + rx)));
  for (int y = ylo; y <= yhi; ++y) {
    for (int x = xlo; x <= xhi; ++x) {
      double dy = (y - cy) / ry, dx = (x - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) t.mask_at(y, x) = 0;
    }
  }
}

std::size_t count_valid(const Tile& t, int y0, int y1, int x0, int x1) {
  std::size_t n = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) n += t.mask_at(y, x);
  return n;
}

// Target coverage mixture over [0.05, 1.0]: a fully clear component, a
// mostly-clear component, and a heavily clouded tail. Skewed high, like
// operational scenes where most tiles keep a usable fraction of pixels.
double draw_target_coverage(Rng& rng) {
  double u = rng.next_double();
  if (u < 0.1) return 1.0;
  if (u < 0.35) return rng.next_uniform(0.05, 0.5);
  return rng.next_uniform(0.5, 1.0);
}

void mask_region_to_target(Tile& t, Rng& rng, const GenConfig& cfg, int y0, int y1, int x0,
                           int x1) {
  double target = draw_target_coverage(rng);
  const double area = static_cast<double>(y1 - y0) * (x1 - x0);
  std::size_t valid = count_valid(t, y0, y1, x0, x1);
  for (int i = 0; i < cfg.cloud_blob_count && valid / area > target; ++i) {
    punch_ellipse(t, rng, cfg.cloud_blob_size, y0, y1, x0, x1);
    valid = count_valid(t, y0, y1, x0, x1);
  }
}

void add_plume(Tile& t, double cy, double cx, const GenConfig& cfg) {
  const double s2 = 2.0 * cfg.plume_width * cfg.plume_width;
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      t.at(0, y, x) += static_cast<float>(cfg.plume_amplitude * std::exp(-d2 / s2));
    }
  }
}

void validate(const GenConfig& cfg) {
  if (cfg.channels < 1 || cfg.height < 1 || cfg.width < 1 || cfg.n_tiles < 0)
    throw std::runtime_error("synthgen: non-positive shape");
  if (cfg.plume_rate < 0.0 || cfg.plume_rate > 1.0 || cfg.bias < 0.0 || cfg.bias > 1.0)
    throw std::runtime_error("synthgen: plume_rate/bias out of range");
  if (cfg.plume_width <= 0.0 || cfg.plume_width > std::min(cfg.height, cfg.width))
    throw std::runtime_error("synthgen: infeasible plume width");
  if (cfg.background_noise < 0.0 || cfg.cloud_blob_size <= 0.0 || cfg.cloud_blob_count < 0)
    throw std::runtime_error("synthgen: bad cloud/noise parameters");
}

}  // namespace

Dataset generate_dataset(const GenConfig& cfg) {
  validate(cfg);
  Dataset ds;
  ds.channels = cfg.channels;
  ds.height = cfg.height;
  ds.width = cfg.width;
  ds.split_tag = cfg.split_tag;
  ds.tiles.reserve(cfg.n_tiles);

  const std::uint64_t base = derive_seed(cfg.seed, "generate_dataset");
  char idbuf[64];
  for (int i = 0; i < cfg.n_tiles; ++i) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(i)));
    Tile t;
    std::snprintf(idbuf, sizeof(idbuf), "%s_%06d", cfg.split_tag.c_str(), i);
    t.id = idbuf;
    t.channels = cfg.channels;
    t.height = cfg.height;
    t.width = cfg.width;
    t.pixels.resize(static_cast<std::size_t>(cfg.channels) * cfg.height * cfg.width);
    t.mask.assign(static_cast<std::size_t>(cfg.height) * cfg.width, 1);
    t.lat = rng.next_uniform(-60.0, 60.0);
    t.lon = rng.next_uniform(-180.0, 180.0);

    fill_background(t, cfg, rng);
    mask_region_to_target(t, rng, cfg, 0, cfg.height, 0, cfg.width);
    double cov = compute_coverage(t).value;

    double p = cfg.plume_rate * (1.0 - cfg.bias + 2.0 * cfg.bias * cov);
    p = std::clamp(p, 0.0, 1.0);
    if (rng.next_double() < p) {
      t.label = 1;
      double cy = rng.next_uniform(0.25 * cfg.height, 0.75 * cfg.height);
      double cx = rng.next_uniform(0.25 * cfg.width, 0.75 * cfg.width);
      add_plume(t, cy, cx, cfg);
    } else {
      t.label = 0;
    }
    ds.tiles.push_back(std::move(t));
  }
  return ds;
}

Scene generate_scene(double width_deg, double height_deg, int px_width, int px_height,
                     const GenConfig& cfg) {
  validate(cfg);
  if (px_width < 1 || px_height < 1 || width_deg <= 0.0 || height_deg <= 0.0)
    throw std::runtime_error("generate_scene: infeasible dims");

  Scene scene;
  scene.lat0 = 0.0;
  scene.lon0 = 0.0;
  scene.deg_per_px_lat = height_deg / px_height;
  scene.deg_per_px_lon = width_deg / px_width;

  Tile& t = scene.raster;
  t.id = "scene";
  t.channels = cfg.channels;
  t.height = px_height;
  t.width = px_width;
  t.pixels.resize(static_cast<std::size_t>(cfg.channels) * px_height * px_width);
  t.mask.assign(static_cast<std::size_t>(px_height) * px_width, 1);
  t.lat = scene.lat0 + height_deg / 2.0;
  t.lon = scene.lon0 + width_deg / 2.0;

  Rng rng(derive_seed(cfg.seed, "generate_scene"));
  {
    GenConfig flat = cfg;
    flat.background_level_sigma = 0.0;
    fill_background(t, flat, rng);
  }
  // brightness varies block by block, like the per-tile levels in training data
  for (int by = 0; by < px_height; by += 32) {
    for (int bx = 0; bx < px_width; bx += 32) {
      for (int c = 0; c < cfg.channels; ++c) {
        float level = static_cast<float>(cfg.background_level_sigma * rng.next_normal());
        for (int y = by; y < std::min(px_height, by + 32); ++y)
          for (int x = bx; x < std::min(px_width, bx + 32); ++x) t.at(c, y, x) += level;
      }
    }
  }

  // Plumes first, independent of the cloud field.
  const int block = 32;
  const double blocks = static_cast<double>(px_height) * px_width / (block * block);
  const int n_plumes = static_cast<int>(std::llround(cfg.plume_rate * blocks));
  char idbuf[32];
  for (int i = 0; i < n_plumes; ++i) {
    double cy = rng.next_uniform(0.0, px_height);
    double cx = rng.next_uniform(0.0, px_width);
    add_plume(t, cy, cx, cfg);
    std::snprintf(idbuf, sizeof(idbuf), "plume_%04d", i);
    scene.truths.push_back({idbuf, scene.lat0 + (cy + 0.5) * scene.deg_per_px_lat,
                            scene.lon0 + (cx + 0.5) * scene.deg_per_px_lon});
  }

  // Cloud field varies block by block so windows see a spread of coverages.
  for (int by = 0; by < px_height; by += block)
    for (int bx = 0; bx < px_width; bx += block)
      mask_region_to_target(t, rng, cfg, by, std::min(px_height, by + block), bx,
                            std::min(px_width, bx + block));
  return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
  Dataset ds;
  ds.channels = scene.raster.channels;
  ds.height = scene.raster.height;
  ds.width = scene.raster.width;
  ds.split_tag = "deploy";
  ds.tiles.push_back(scene.raster);
  save_dataset(ds, path);

  std::ofstream mf(path, std::ios::app);
  char line[160];
  std::snprintf(line, sizeof(line), "geo %.17g %.17g %.17g %.17g\n", scene.lat0, scene.lon0,
                scene.deg_per_px_lat, scene.deg_per_px_lon);
  mf << line;
  if (!mf) throw std::runtime_error("save_scene: manifest write failed");

  std::ofstream tf(path + ".truth", std::ios::trunc);
  if (!tf) throw std::runtime_error("save_scene: cannot open '" + path + ".truth'");
  for (const auto& p : scene.truths) {
    std::snprintf(line, sizeof(line), "%s %.17g %.17g\n", p.id.c_str(), p.lat, p.lon);
    tf << line;
  }
  if (!tf) throw std::runtime_error("save_scene: truth write failed");
}

Scene load_scene(const std::string& path) {
  Dataset ds = load_dataset(path);
  if (ds.tiles.size() != 1)
    throw std::runtime_error("load_scene: expected a single-tile dataset");

  Scene scene;
  scene.raster = std::move(ds.tiles[0]);

  std::ifstream mf(path);
  std::string key;
  bool have_geo = false;
  while (mf >> key) {
    if (key == "geo") {
      if (!(mf >> scene.lat0 >> scene.lon0 >> scene.deg_per_px_lat >> scene.deg_per_px_lon))
        throw std::runtime_error("load_scene: malformed geo line");
      have_geo = true;
    } else {
      std::string rest;
      std::getline(mf, rest);
    }
  }
  if (!have_geo) throw std::runtime_error("load_scene: manifest has no geo extent");

  std::ifstream tf(path + ".truth");
  if (!tf) throw std::runtime_error("load_scene: cannot open '" + path + ".truth'");
  Scene::Truth p;
  while (tf >> p.id >> p.lat >> p.lon) scene.truths.push_back(p);
  return scene;
}

}  // namespace plume
