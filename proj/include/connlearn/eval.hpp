#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace connlearn {

/// Binary classification metrics with label 1 as the positive class.
struct MetricsReport {
  double acc = 0.0;
  std::optional<double> sen;  // absent when there are no positives
  std::optional<double> spe;  // absent when there are no negatives
  std::optional<double> auc;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t n = 0;

  nlohmann::json to_json() const;
};

MetricsReport confusion_metrics(std::span<const int> predictions, std::span<const int> labels);

/// Mann-Whitney AUC; a positive/negative tie counts one half.
double auc(std::span<const double> scores, std::span<const int> labels);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Shuffles each class with the seed, then deals its members round-robin
/// over the k test folds.
std::vector<Fold> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t folds = 0;
  /// "mean(std)" in percent with one decimal, e.g. "86.0(1.4)".
  std::string formatted;
};

struct AggregateReport {
  MetricSummary acc;
  std::optional<MetricSummary> sen, spe, auc;

  nlohmann::json to_json() const;
};

MetricSummary summarize(std::span<const double> values);
/// Folds where a metric is undefined are left out of that metric's summary.
AggregateReport aggregate(std::span<const MetricsReport> per_fold);

}  // namespace connlearn
