#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "plume/rng.hpp"
#include "plume/tiles.hpp"

namespace testutil {

// Fresh per-test scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("plume_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Small tile with the given valid values in channel 0 (row-major) and
// `n_missing` masked-out pixels appended after them. Width is the total pixel
// count, height 1, so layouts stay easy to reason about.
inline plume::Tile row_tile(const std::vector<float>& valid_values, int n_missing,
                            const std::string& id = "t0") {
  plume::Tile t;
  t.id = id;
  t.channels = 1;
  t.height = 1;
  t.width = static_cast<int>(valid_values.size()) + n_missing;
  t.pixels.assign(static_cast<std::size_t>(t.width), -777.0f);  // placeholder for missing
  t.mask.assign(static_cast<std::size_t>(t.width), 0);
  for (std::size_t i = 0; i < valid_values.size(); ++i) {
    t.pixels[i] = valid_values[i];
    t.mask[i] = 1;
  }
  return t;
}

// Random multi-channel tile with roughly `missing_frac` of pixels masked out.
inline plume::Tile random_tile(plume::Rng& rng, int channels, int height, int width,
                               double missing_frac, const std::string& id) {
  plume::Tile t;
  t.id = id;
  t.channels = channels;
  t.height = height;
  t.width = width;
  t.pixels.resize(static_cast<std::size_t>(channels) * height * width);
  for (auto& p : t.pixels) p = static_cast<float>(rng.next_uniform(-2.0, 2.0));
  t.mask.resize(static_cast<std::size_t>(height) * width);
  for (auto& m : t.mask) m = rng.next_double() < missing_frac ? 0 : 1;
  t.lat = rng.next_uniform(-60.0, 60.0);
  t.lon = rng.next_uniform(-180.0, 180.0);
  return t;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline std::string slurp(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return {};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace testutil
