#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plume/impute.hpp"
#include "plume/resample.hpp"
#include "plume/tiles.hpp"

namespace plume {

// Two tiny scorers sharing one architecture family: 3x3 valid convolution
// with 4 filters per branch, global average pooling, linear head, sigmoid.
// Vanilla has a single branch over all channels; MultiBranch puts channel 0
// (the methane channel) in its own branch and the auxiliary channels in a
// second one.
enum class ModelKind { Vanilla, MultiBranch };

ModelKind parse_model_kind(const std::string& name);  // vanilla|multibranch
std::string to_string(ModelKind kind);

constexpr int kKernel = 3;
constexpr int kFiltersPerBranch = 4;

struct BranchShape {
  int first_channel = 0;
  int channel_count = 0;
};

struct ModelShape {
  ModelKind kind = ModelKind::Vanilla;
  int channels = 0;
  std::vector<BranchShape> branches;

  static ModelShape make(ModelKind kind, int channels);

  int feature_count() const { return kFiltersPerBranch * static_cast<int>(branches.size()); }
  std::size_t conv_w_size(int b) const {
    return static_cast<std::size_t>(kFiltersPerBranch) * branches[b].channel_count * kKernel * kKernel;
  }
  // Flat layout: per branch [conv weights, conv biases], then head weights,
  // then head bias.
  std::size_t conv_w_offset(int b) const;
  std::size_t conv_b_offset(int b) const;
  std::size_t head_w_offset() const;
  std::size_t head_b_offset() const;
  std::size_t param_count() const;
};

struct ModelParams {
  ModelShape shape;
  std::vector<double> values;

  std::size_t param_count() const { return values.size(); }
};

ModelParams init_params(ModelKind kind, int channels, std::uint64_t seed);

// Score in (0, 1). The tile must already be imputed: no missing placeholders.
double forward(const ModelParams& params, std::span<const float> pixels, int channels, int height,
               int width);
double forward(const ModelParams& params, const Tile& imputed_tile);

// Mean binary cross-entropy over the batch plus its analytic gradient, laid
// out identically to params.values.
std::pair<double, std::vector<double>> loss_and_grad(const ModelParams& params,
                                                     std::span<const Tile> batch,
                                                     std::span<const int> labels);

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  ImputationStrategy imputation;
  bool resample = false;
  BinSpec bins;
  double threshold = 0.5;
};

// Minibatch SGD; epochs drawn by the weighted sampler when cfg.resample is
// on, uniform shuffles otherwise. Deterministic given (ds, kind, cfg).
ModelParams train(const Dataset& ds, ModelKind kind, const TrainConfig& cfg);

// Checkpoint: text manifest at `path` (kind, shapes, full train config),
// float32 little-endian payload at `path + ".bin"`.
void save_checkpoint(const ModelParams& params, const TrainConfig& cfg, const std::string& path);
std::pair<ModelParams, TrainConfig> load_checkpoint(const std::string& path);

}  // namespace plume
