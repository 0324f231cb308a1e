#include "plume/tiles.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace plume {

namespace {

void encode_f32le(float v, std::string& out) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float decode_f32le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::size_t tile_stride(const Dataset& ds) {
  return static_cast<std::size_t>(ds.channels) * ds.height * ds.width * 4 +
         static_cast<std::size_t>(ds.height) * ds.width;
}

bool valid_split_tag(const std::string& tag) {
  return tag == "train" || tag == "val" || tag == "test" || tag == "deploy";
}

}  // namespace

Coverage compute_coverage(const Tile& tile) {
  if (tile.mask.size() != tile.pixel_count())
    throw std::runtime_error("compute_coverage: mask shape does not match H*W");
  std::size_t valid = 0;
  for (auto m : tile.mask) valid += (m != 0);
  return Coverage{static_cast<double>(valid) / static_cast<double>(tile.pixel_count())};
}

std::pair<std::vector<Tile>, std::vector<Tile>> split_groups(const std::vector<Tile>& tiles,
                                                             double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::runtime_error("split_groups: threshold must be in (0, 1)");
  std::vector<Tile> low, high;
  for (const auto& t : tiles) {
    if (compute_coverage(t).value < threshold)
      low.push_back(t);
    else
      high.push_back(t);
  }
  return {std::move(low), std::move(high)};
}

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.channels <= 0 || ds.height <= 0 || ds.width <= 0)
    throw std::runtime_error("save_dataset: non-positive shape");
  if (!valid_split_tag(ds.split_tag))
    throw std::runtime_error("save_dataset: bad split tag '" + ds.split_tag + "'");

  std::set<std::string> ids;
  const std::size_t stride = tile_stride(ds);
  std::ostringstream manifest;
  manifest << "tds 1\n";
  manifest << "count " << ds.tiles.size() << "\n";
  manifest << "channels " << ds.channels << "\n";
  manifest << "height " << ds.height << "\n";
  manifest << "width " << ds.width << "\n";
  manifest << "split " << ds.split_tag << "\n";

  std::string payload;
  payload.reserve(ds.tiles.size() * stride);
  std::size_t offset = 0;
  char line[256];
  for (const auto& t : ds.tiles) {
    if (t.channels != ds.channels || t.height != ds.height || t.width != ds.width)
      throw std::runtime_error("save_dataset: tile '" + t.id + "' shape differs from dataset");
    if (t.pixels.size() != static_cast<std::size_t>(ds.channels) * ds.height * ds.width ||
        t.mask.size() != static_cast<std::size_t>(ds.height) * ds.width)
      throw std::runtime_error("save_dataset: tile '" + t.id + "' buffer sizes inconsistent");
    if (t.id.empty() || t.id.find_first_of(" \t\n") != std::string::npos)
      throw std::runtime_error("save_dataset: tile id must be non-empty without whitespace");
    if (!ids.insert(t.id).second)
      throw std::runtime_error("save_dataset: duplicate tile id '" + t.id + "'");

    std::snprintf(line, sizeof(line), "tile %s %s %.17g %.17g %zu\n", t.id.c_str(),
                  t.label ? std::to_string(*t.label).c_str() : "-", t.lat, t.lon, offset);
    manifest << line;

    for (float v : t.pixels) encode_f32le(v, payload);
    for (auto m : t.mask) {
      if (m != 0 && m != 1) throw std::runtime_error("save_dataset: mask bytes must be 0 or 1");
      payload.push_back(static_cast<char>(m));
    }
    offset += stride;
  }

  std::ofstream mf(path, std::ios::binary | std::ios::trunc);
  if (!mf) throw std::runtime_error("save_dataset: cannot open '" + path + "'");
  mf << manifest.str();
  if (!mf) throw std::runtime_error("save_dataset: manifest write failed");

  std::ofstream pf(path + ".bin", std::ios::binary | std::ios::trunc);
  if (!pf) throw std::runtime_error("save_dataset: cannot open '" + path + ".bin'");
  pf.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!pf) throw std::runtime_error("save_dataset: payload write failed");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream mf(path);
  if (!mf) throw std::runtime_error("load_dataset: cannot open '" + path + "'");

  std::string key;
  int version = 0;
  if (!(mf >> key >> version) || key != "tds" || version != 1)
    throw std::runtime_error("load_dataset: malformed manifest (missing 'tds 1' header)");

  Dataset ds;
  std::size_t count = 0;
  bool have_count = false, have_shape = false;
  struct Entry {
    std::string id, label;
    double lat, lon;
    std::size_t offset;
  };
  std::vector<Entry> entries;

  while (mf >> key) {
    if (key == "count") {
      if (!(mf >> count)) throw std::runtime_error("load_dataset: malformed count");
      have_count = true;
    } else if (key == "channels") {
      if (!(mf >> ds.channels)) throw std::runtime_error("load_dataset: malformed channels");
    } else if (key == "height") {
      if (!(mf >> ds.height)) throw std::runtime_error("load_dataset: malformed height");
      have_shape = true;
    } else if (key == "width") {
      if (!(mf >> ds.width)) throw std::runtime_error("load_dataset: malformed width");
    } else if (key == "split") {
      if (!(mf >> ds.split_tag) || !valid_split_tag(ds.split_tag))
        throw std::runtime_error("load_dataset: malformed split tag");
    } else if (key == "geo") {
      // scene sidecar extent; parsed by load_scene, skipped here
      double d;
      for (int i = 0; i < 4; ++i)
        if (!(mf >> d)) throw std::runtime_error("load_dataset: malformed geo line");
    } else if (key == "tile") {
      Entry e;
      if (!(mf >> e.id >> e.label >> e.lat >> e.lon >> e.offset))
        throw std::runtime_error("load_dataset: malformed tile line");
      entries.push_back(std::move(e));
    } else {
      throw std::runtime_error("load_dataset: unknown manifest key '" + key + "'");
    }
  }
  if (!have_count || !have_shape || ds.channels <= 0 || ds.height <= 0 || ds.width <= 0)
    throw std::runtime_error("load_dataset: manifest incomplete");
  if (entries.size() != count)
    throw std::runtime_error("load_dataset: manifest count " + std::to_string(count) +
                             " does not match " + std::to_string(entries.size()) + " tile lines");

  std::ifstream pf(path + ".bin", std::ios::binary);
  if (!pf) throw std::runtime_error("load_dataset: cannot open '" + path + ".bin'");
  std::string payload((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());

  const std::size_t stride = tile_stride(ds);
  if (payload.size() != count * stride)
    throw std::runtime_error("load_dataset: payload size " + std::to_string(payload.size()) +
                             " does not match manifest (expected " + std::to_string(count * stride) +
                             " bytes)");

  std::set<std::string> ids;
  const std::size_t npix = static_cast<std::size_t>(ds.channels) * ds.height * ds.width;
  const std::size_t nmask = static_cast<std::size_t>(ds.height) * ds.width;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second)
      throw std::runtime_error("load_dataset: duplicate tile id '" + e.id + "'");
    if (e.offset + stride > payload.size())
      throw std::runtime_error("load_dataset: tile '" + e.id + "' offset out of range");

    Tile t;
    t.id = e.id;
    t.channels = ds.channels;
    t.height = ds.height;
    t.width = ds.width;
    t.lat = e.lat;
    t.lon = e.lon;
    if (e.label == "-")
      t.label.reset();
    else if (e.label == "0" || e.label == "1")
      t.label = e.label[0] - '0';
    else
      throw std::runtime_error("load_dataset: tile '" + e.id + "' has bad label '" + e.label + "'");

    const auto* base = reinterpret_cast<const unsigned char*>(payload.data()) + e.offset;
    t.pixels.resize(npix);
    for (std::size_t i = 0; i < npix; ++i) t.pixels[i] = decode_f32le(base + i * 4);
    t.mask.resize(nmask);
    for (std::size_t i = 0; i < nmask; ++i) {
      unsigned char m = base[npix * 4 + i];
      if (m != 0 && m != 1)
        throw std::runtime_error("load_dataset: tile '" + e.id + "' has mask byte != 0/1");
      t.mask[i] = m;
    }
    ds.tiles.push_back(std::move(t));
  }
  return ds;
}

}  // namespace plume
