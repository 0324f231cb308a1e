#include "plume/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "plume/rng.hpp"

namespace plume {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "vanilla") return ModelKind::Vanilla;
  if (name == "multibranch") return ModelKind::MultiBranch;
  throw std::runtime_error("unknown model kind '" + name + "'");
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::Vanilla ? "vanilla" : "multibranch";
}

ModelShape ModelShape::make(ModelKind kind, int channels) {
  if (channels < 1) throw std::runtime_error("ModelShape: channels must be >= 1");
  ModelShape s;
  s.kind = kind;
  s.channels = channels;
  if (kind == ModelKind::Vanilla) {
    s.branches = {{0, channels}};
  } else {
    if (channels < 2)
      throw std::runtime_error("ModelShape: MultiBranch needs >= 2 channels");
    s.branches = {{0, 1}, {1, channels - 1}};
  }
  return s;
}

std::size_t ModelShape::conv_w_offset(int b) const {
  std::size_t off = 0;
  for (int i = 0; i < b; ++i) off += conv_w_size(i) + kFiltersPerBranch;
  return off;
}

std::size_t ModelShape::conv_b_offset(int b) const { return conv_w_offset(b) + conv_w_size(b); }

std::size_t ModelShape::head_w_offset() const {
  return conv_w_offset(static_cast<int>(branches.size()));
}

std::size_t ModelShape::head_b_offset() const { return head_w_offset() + feature_count(); }

std::size_t ModelShape::param_count() const { return head_b_offset() + 1; }

ModelParams init_params(ModelKind kind, int channels, std::uint64_t seed) {
  ModelParams p;
  p.shape = ModelShape::make(kind, channels);
  p.values.assign(p.shape.param_count(), 0.0);
  Rng rng(derive_seed(seed, "init_params"));
  // weights uniform in [-0.1, 0.1], biases 0
  for (std::size_t b = 0; b < p.shape.branches.size(); ++b) {
    double* w = p.values.data() + p.shape.conv_w_offset(static_cast<int>(b));
    for (std::size_t i = 0; i < p.shape.conv_w_size(static_cast<int>(b)); ++i)
      w[i] = rng.next_uniform(-0.1, 0.1);
  }
  double* hw = p.values.data() + p.shape.head_w_offset();
  for (int j = 0; j < p.shape.feature_count(); ++j) hw[j] = rng.next_uniform(-0.1, 0.1);
  return p;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Shifted-sum tensor: T[c*9 + dy*3 + dx] = sum over all valid 3x3 window
// anchor positions of pixel (c, y+dy, x+dx). Convolution followed by global
// average pooling reduces to an inner product with this tensor, which makes
// repeated passes over a fixed tile cheap.
std::vector<double> shifted_sums(std::span<const float> pixels, int channels, int height,
                                 int width) {
  if (height < kKernel || width < kKernel)
    throw std::runtime_error("model: tile smaller than the 3x3 kernel");
  const int oh = height - kKernel + 1, ow = width - kKernel + 1;
  std::vector<double> t(static_cast<std::size_t>(channels) * 9, 0.0);
  for (int c = 0; c < channels; ++c) {
    const float* plane = pixels.data() + static_cast<std::size_t>(c) * height * width;
    for (int dy = 0; dy < kKernel; ++dy) {
      for (int dx = 0; dx < kKernel; ++dx) {
        double s = 0.0;
        for (int y = 0; y < oh; ++y) {
          const float* row = plane + static_cast<std::size_t>(y + dy) * width + dx;
          for (int x = 0; x < ow; ++x) s += row[x];
        }
        t[static_cast<std::size_t>(c) * 9 + dy * 3 + dx] = s;
      }
    }
  }
  return t;
}

struct Activation {
  std::vector<double> features;
  double logit = 0.0;
};

Activation activate(const ModelParams& p, std::span<const double> t, double inv_pool) {
  const ModelShape& s = p.shape;
  Activation a;
  a.features.resize(s.feature_count());
  for (std::size_t b = 0; b < s.branches.size(); ++b) {
    const auto& br = s.branches[b];
    const double* w = p.values.data() + s.conv_w_offset(static_cast<int>(b));
    const double* bias = p.values.data() + s.conv_b_offset(static_cast<int>(b));
    for (int k = 0; k < kFiltersPerBranch; ++k) {
      double acc = 0.0;
      const double* wk = w + static_cast<std::size_t>(k) * br.channel_count * 9;
      for (int cl = 0; cl < br.channel_count; ++cl) {
        const double* tc = t.data() + static_cast<std::size_t>(br.first_channel + cl) * 9;
        const double* wc = wk + static_cast<std::size_t>(cl) * 9;
        for (int i = 0; i < 9; ++i) acc += wc[i] * tc[i];
      }
      a.features[b * kFiltersPerBranch + k] = bias[k] + acc * inv_pool;
    }
  }
  const double* hw = p.values.data() + s.head_w_offset();
  a.logit = p.values[s.head_b_offset()];
  for (int j = 0; j < s.feature_count(); ++j) a.logit += hw[j] * a.features[j];
  return a;
}

double pool_inv(int height, int width) {
  return 1.0 / (static_cast<double>(height - kKernel + 1) * (width - kKernel + 1));
}

// BCE with logits: max(z,0) - z*y + log(1 + exp(-|z|)).
double bce_logit(double z, int y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

void accumulate_grad(const ModelParams& p, std::span<const double> t, const Activation& a, int y,
                     double scale, double inv_pool, std::vector<double>& grad) {
  const ModelShape& s = p.shape;
  const double g = scale * (sigmoid(a.logit) - y);
  const double* hw = p.values.data() + s.head_w_offset();
  double* ghw = grad.data() + s.head_w_offset();
  for (int j = 0; j < s.feature_count(); ++j) ghw[j] += g * a.features[j];
  grad[s.head_b_offset()] += g;
  for (std::size_t b = 0; b < s.branches.size(); ++b) {
    const auto& br = s.branches[b];
    double* gw = grad.data() + s.conv_w_offset(static_cast<int>(b));
    double* gb = grad.data() + s.conv_b_offset(static_cast<int>(b));
    for (int k = 0; k < kFiltersPerBranch; ++k) {
      const double gk = g * hw[b * kFiltersPerBranch + k];
      gb[k] += gk;
      double* gwk = gw + static_cast<std::size_t>(k) * br.channel_count * 9;
      for (int cl = 0; cl < br.channel_count; ++cl) {
        const double* tc = t.data() + static_cast<std::size_t>(br.first_channel + cl) * 9;
        double* gwc = gwk + static_cast<std::size_t>(cl) * 9;
        for (int i = 0; i < 9; ++i) gwc[i] += gk * tc[i] * inv_pool;
      }
    }
  }
}

}  // namespace

double forward(const ModelParams& params, std::span<const float> pixels, int channels, int height,
               int width) {
  if (channels != params.shape.channels)
    throw std::runtime_error("forward: channel count does not match model");
  if (pixels.size() != static_cast<std::size_t>(channels) * height * width)
    throw std::runtime_error("forward: pixel buffer size mismatch");
  for (float v : pixels)
    if (!std::isfinite(v)) throw std::runtime_error("forward: non-finite input");
  auto t = shifted_sums(pixels, channels, height, width);
  return sigmoid(activate(params, t, pool_inv(height, width)).logit);
}

double forward(const ModelParams& params, const Tile& imputed_tile) {
  return forward(params, imputed_tile.pixels, imputed_tile.channels, imputed_tile.height,
                 imputed_tile.width);
}

std::pair<double, std::vector<double>> loss_and_grad(const ModelParams& params,
                                                     std::span<const Tile> batch,
                                                     std::span<const int> labels) {
  if (batch.empty()) throw std::runtime_error("loss_and_grad: empty batch");
  if (batch.size() != labels.size())
    throw std::runtime_error("loss_and_grad: batch/label length mismatch");

  double loss = 0.0;
  std::vector<double> grad(params.values.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tile& tile = batch[i];
    for (float v : tile.pixels)
      if (!std::isfinite(v)) throw std::runtime_error("loss_and_grad: non-finite input");
    auto t = shifted_sums(tile.pixels, tile.channels, tile.height, tile.width);
    const double inv_pool = pool_inv(tile.height, tile.width);
    Activation a = activate(params, t, inv_pool);
    loss += scale * bce_logit(a.logit, labels[i]);
    accumulate_grad(params, t, a, labels[i], scale, inv_pool, grad);
  }
  return {loss, std::move(grad)};
}

ModelParams train(const Dataset& ds, ModelKind kind, const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size <= 0 || cfg.learning_rate <= 0.0)
    throw std::runtime_error("train: bad hyperparameters");
  if (ds.tiles.empty()) throw std::runtime_error("train: empty dataset");

  const std::size_t n = ds.tiles.size();
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!ds.tiles[i].label)
      throw std::runtime_error("train: tile '" + ds.tiles[i].id + "' is unlabeled");
    labels[i] = *ds.tiles[i].label;
  }

  // Impute once; imputed pixels are fixed for the whole run, so the pooled
  // convolution features can be cached per tile.
  const std::uint64_t impute_seed = derive_seed(cfg.seed, "train_impute");
  std::vector<std::vector<double>> cache(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tile imputed = impute(ds.tiles[i], cfg.imputation, impute_seed).tile;
    cache[i] = shifted_sums(imputed.pixels, imputed.channels, imputed.height, imputed.width);
  }
  const double inv_pool = pool_inv(ds.height, ds.width);

  ModelParams params = init_params(kind, ds.channels, cfg.seed);

  SamplerPlan plan;
  if (cfg.resample) plan = build_plan(ds, cfg.bins);

  std::vector<std::size_t> order(n);
  std::vector<double> grad(params.values.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed =
        derive_seed(derive_seed(cfg.seed, "train_epoch"), static_cast<std::uint64_t>(epoch));
    if (cfg.resample) {
      order = draw_epoch(plan, n, epoch_seed);
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(epoch_seed);
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_index(i)]);
    }

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        Activation a = activate(params, cache[i], inv_pool);
        accumulate_grad(params, cache[i], a, labels[i], scale, inv_pool, grad);
      }
      for (std::size_t j = 0; j < params.values.size(); ++j)
        params.values[j] -= cfg.learning_rate * grad[j];
    }
  }
  return params;
}

namespace {

void encode_f32le(float v, std::string& out) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float decode_f32le(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, const std::string& path) {
  std::ostringstream mf;
  char line[128];
  mf << "ckpt 1\n";
  mf << "kind " << to_string(params.shape.kind) << "\n";
  mf << "channels " << params.shape.channels << "\n";
  mf << "params " << params.values.size() << "\n";
  mf << "epochs " << cfg.epochs << "\n";
  mf << "batch " << cfg.batch_size << "\n";
  std::snprintf(line, sizeof(line), "lr %.17g\n", cfg.learning_rate);
  mf << line;
  mf << "seed " << cfg.seed << "\n";
  mf << "imputation " << to_string(cfg.imputation.kind) << "\n";
  std::snprintf(line, sizeof(line), "noise_scale %.17g\n", cfg.imputation.noise_scale);
  mf << line;
  mf << "resample " << (cfg.resample ? 1 : 0) << "\n";
  mf << "bins " << cfg.bins.bin_count << "\n";
  std::snprintf(line, sizeof(line), "threshold %.17g\n", cfg.threshold);
  mf << line;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
  out << mf.str();

  std::string payload;
  payload.reserve(params.values.size() * 4);
  for (double v : params.values) encode_f32le(static_cast<float>(v), payload);
  std::ofstream pf(path + ".bin", std::ios::binary | std::ios::trunc);
  if (!pf) throw std::runtime_error("save_checkpoint: cannot open '" + path + ".bin'");
  pf.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!pf) throw std::runtime_error("save_checkpoint: payload write failed");
}

std::pair<ModelParams, TrainConfig> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  std::string key, sval;
  int version = 0;
  if (!(in >> key >> version) || key != "ckpt" || version != 1)
    throw std::runtime_error("load_checkpoint: malformed header");

  ModelKind kind = ModelKind::Vanilla;
  int channels = 0;
  std::size_t count = 0;
  TrainConfig cfg;
  int resample_flag = 0;
  while (in >> key) {
    if (key == "kind") {
      in >> sval;
      kind = parse_model_kind(sval);
    } else if (key == "channels") in >> channels;
    else if (key == "params") in >> count;
    else if (key == "epochs") in >> cfg.epochs;
    else if (key == "batch") in >> cfg.batch_size;
    else if (key == "lr") in >> cfg.learning_rate;
    else if (key == "seed") in >> cfg.seed;
    else if (key == "imputation") {
      in >> sval;
      cfg.imputation.kind = parse_impute_kind(sval);
    } else if (key == "noise_scale") in >> cfg.imputation.noise_scale;
    else if (key == "resample") in >> resample_flag;
    else if (key == "bins") in >> cfg.bins.bin_count;
    else if (key == "threshold") in >> cfg.threshold;
    else throw std::runtime_error("load_checkpoint: unknown key '" + key + "'");
    if (!in) throw std::runtime_error("load_checkpoint: malformed value for '" + key + "'");
  }
  cfg.resample = resample_flag != 0;

  ModelParams params;
  params.shape = ModelShape::make(kind, channels);
  if (count != params.shape.param_count())
    throw std::runtime_error("load_checkpoint: parameter count does not match shape");

  std::ifstream pf(path + ".bin", std::ios::binary);
  if (!pf) throw std::runtime_error("load_checkpoint: cannot open '" + path + ".bin'");
  std::string payload((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());
  if (payload.size() != count * 4)
    throw std::runtime_error("load_checkpoint: payload size mismatch");
  params.values.resize(count);
  const auto* base = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < count; ++i) params.values[i] = decode_f32le(base + i * 4);
  return {std::move(params), cfg};
}

}  // namespace plume
