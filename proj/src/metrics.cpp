#include "plume/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace plume {

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  if (scores.size() != labels.size())
    throw std::runtime_error("confusion: scores/labels length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::runtime_error("confusion: non-finite score");
    bool pred = scores[i] >= threshold;
    if (labels[i] == 1)
      (pred ? c.tp : c.fn) += 1;
    else
      (pred ? c.fp : c.tn) += 1;
  }
  return c;
}

std::optional<double> precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

std::optional<double> recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

std::optional<double> balanced_accuracy(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0) return std::nullopt;
  double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return 0.5 * (tpr + tnr);
}

GroupRates group_rates(std::span<const double> scores, std::span<const int> labels,
                       std::span<const double> coverages, double threshold, double split) {
  if (scores.size() != labels.size() || scores.size() != coverages.size())
    throw std::runtime_error("group_rates: input length mismatch");
  ConfusionCounts low, high;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::runtime_error("group_rates: non-finite score");
    ConfusionCounts& c = coverages[i] < split ? low : high;
    bool pred = scores[i] >= threshold;
    if (labels[i] == 1)
      (pred ? c.tp : c.fn) += 1;
    else
      (pred ? c.fp : c.tn) += 1;
  }
  GroupRates g;
  if (low.fp + low.tn > 0) g.fpr_low = static_cast<double>(low.fp) / (low.fp + low.tn);
  if (high.fp + high.tn > 0) g.fpr_high = static_cast<double>(high.fp) / (high.fp + high.tn);
  g.tpr_low = recall(low);
  g.tpr_high = recall(high);
  return g;
}

DeltaRates delta_rates(std::span<const double> scores, std::span<const int> labels,
                       std::span<const double> coverages, double threshold, double split) {
  GroupRates g = group_rates(scores, labels, coverages, threshold, split);
  DeltaRates d;
  if (g.fpr_low && g.fpr_high) d.delta_fpr = *g.fpr_low - *g.fpr_high;
  if (g.tpr_low && g.tpr_high) d.delta_tpr = *g.tpr_low - *g.tpr_high;
  return d;
}

std::optional<double> parity(std::span<const double> scores, std::span<const double> coverages,
                             double threshold, double split) {
  if (scores.size() != coverages.size())
    throw std::runtime_error("parity: input length mismatch");
  long n_low = 0, n_high = 0, f_low = 0, f_high = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::runtime_error("parity: non-finite score");
    bool flag = scores[i] >= threshold;
    if (coverages[i] < split) {
      ++n_low;
      f_low += flag;
    } else {
      ++n_high;
      f_high += flag;
    }
  }
  if (n_low == 0 || n_high == 0) return std::nullopt;
  double r_low = static_cast<double>(f_low) / n_low;
  double r_high = static_cast<double>(f_high) / n_high;
  if (r_low == 0.0 && r_high == 0.0) return std::nullopt;
  if (r_low == 0.0 || r_high == 0.0) return std::numeric_limits<double>::infinity();
  return std::max(r_low, r_high) / std::min(r_low, r_high);
}

long count_flags(std::span<const double> scores, double threshold) {
  long n = 0;
  for (double s : scores) n += (s >= threshold);
  return n;
}

MeanStd aggregate_seeds(std::span<const double> values) {
  if (values.empty()) throw std::runtime_error("aggregate_seeds: empty input");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() == 1) {
    out.single_seed = true;
    return out;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

}  // namespace plume
