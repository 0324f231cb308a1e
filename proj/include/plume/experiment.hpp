#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plume/impute.hpp"
#include "plume/metrics.hpp"
#include "plume/model.hpp"
#include "plume/sweep.hpp"
#include "plume/synthgen.hpp"

namespace plume {

struct ExperimentGrid {
  std::vector<ModelKind> models{ModelKind::Vanilla, ModelKind::MultiBranch};
  std::vector<ImputeKind> imputations{ImputeKind::Zero, ImputeKind::Median, ImputeKind::PixelSample,
                                      ImputeKind::NoiseAugmented};
  std::vector<bool> resampling{false, true};
  std::vector<std::uint64_t> seeds;  // one training run per seed
};

// Expands a single top-level seed into per-run seeds.
std::vector<std::uint64_t> expand_seeds(std::uint64_t top_seed, int count);

struct RunOptions {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 0.05;
  BinSpec bins;
  double threshold = 0.5;
  double coverage_split = 0.5;
  double noise_scale = 1.0;
  WindowSpec window;
  int jobs = 1;
};

struct ConfigKey {
  ModelKind model = ModelKind::Vanilla;
  ImputeKind imputation = ImputeKind::Zero;
  bool resample = false;

  bool operator==(const ConfigKey&) const = default;
};

std::string to_string(const ConfigKey& key);

// One Table-style row: test-set metrics plus deployment parity and flags,
// aggregated over seeds. Per-seed values are kept for significance tests.
struct ReportRow {
  ConfigKey key;
  bool failed = false;
  std::string error_msg;

  MeanStd bacc, prec, rec, dfpr, dtpr, par;
  double flags = 0.0;  // mean flag count over seeds

  std::vector<double> bacc_seeds, prec_seeds, rec_seeds, dfpr_seeds, dtpr_seeds, par_seeds,
      flag_seeds;

  // Per-cell flag counts on the deployment grid, summed over seeds (used for
  // the resampled-vs-standard disagreement map).
  std::vector<GridCellStats> grid_counts;
};

struct GridReport {
  std::vector<ReportRow> rows;  // ordered by (model, imputation, resampling)
  int seed_count = 0;
};

GridReport run_grid(const Dataset& train_ds, const Dataset& test_ds, const Scene& deploy,
                    const ExperimentGrid& grid, const RunOptions& opts);

// Two-sided Welch t-test.
struct CompareResult {
  double difference = 0.0;  // mean(a) - mean(b)
  double p_value = 1.0;
  bool significant = false;  // at alpha = 0.05
};

CompareResult welch_compare(std::span<const double> a, std::span<const double> b);

// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// metric is one of bacc|precision|recall|dfpr|dtpr|parity.
CompareResult compare(const GridReport& report, const std::string& metric, const ConfigKey& a,
                      const ConfigKey& b);

void emit_report_csv(const GridReport& report, const std::string& path);
void emit_report_json(const GridReport& report, const std::string& path);
GridReport load_report_json(const std::string& path);

// Mean per-cell flag counts for resampled vs standard rows (aggregated over
// model kind and imputation strategy) plus their disagreement.
std::vector<GridCellStats> resampling_disagreement(const GridReport& report);

}  // namespace plume
