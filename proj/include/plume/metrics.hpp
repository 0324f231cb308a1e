#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace plume {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

// Prediction rule everywhere: predicted positive iff score >= threshold.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold);

// Undefined (zero denominator) is an explicit empty optional, never a silent 0.
std::optional<double> balanced_accuracy(const ConfusionCounts& c);
std::optional<double> precision(const ConfusionCounts& c);
std::optional<double> recall(const ConfusionCounts& c);

// Per-coverage-group rates. Group rule: low = coverage < split, high >= split.
struct GroupRates {
  std::optional<double> fpr_low, fpr_high, tpr_low, tpr_high;
};

GroupRates group_rates(std::span<const double> scores, std::span<const int> labels,
                       std::span<const double> coverages, double threshold, double split);

// Sign convention: delta = low-group rate minus high-group rate, so higher
// rates in high-coverage images give negative deltas. Equalized-odds ideal
// is 0 for both.
struct DeltaRates {
  std::optional<double> delta_fpr, delta_tpr;
};

DeltaRates delta_rates(std::span<const double> scores, std::span<const int> labels,
                       std::span<const double> coverages, double threshold, double split);

// Statistical-parity ratio max(r_low, r_high) / min(r_low, r_high) of group
// flag rates; >= 1, ideal 1, lower is better. Labels are not required. Both
// rates zero -> empty; exactly one zero -> +infinity.
std::optional<double> parity(std::span<const double> scores, std::span<const double> coverages,
                             double threshold, double split);

long count_flags(std::span<const double> scores, double threshold);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;     // sample std, (n-1) denominator; 0 for a single value
  bool single_seed = false;  // warning marker for the n = 1 case
};

MeanStd aggregate_seeds(std::span<const double> values);

}  // namespace plume
