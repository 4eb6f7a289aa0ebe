#include "connlearn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "connlearn/errors.hpp"
#include "connlearn/rng.hpp"

namespace connlearn {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json MetricsReport::to_json() const {
  return json{{"acc", acc},
              {"sen", optional_json(sen)},
              {"spe", optional_json(spe)},
              {"auc", optional_json(auc)},
              {"confusion", {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}}},
              {"n", n}};
}

MetricsReport confusion_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ContractError("predictions and labels differ in length");
  if (labels.empty()) throw ContractError("confusion_metrics needs at least one sample");
  MetricsReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == 1;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++r.tp;
    else if (pred) ++r.fp;
    else if (truth) ++r.fn;
    else ++r.tn;
  }
  r.n = labels.size();
  r.acc = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.n);
  if (r.tp + r.fn > 0) r.sen = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.tn + r.fp > 0) r.spe = static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp);
  return r;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) throw UndefinedMetricError("AUC needs both classes");
  double concordant = 0.0;
  for (double p : pos) {
    for (double q : neg) {
      if (p > q) concordant += 1.0;
      else if (p == q) concordant += 0.5;
    }
  }
  return concordant / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

std::vector<Fold> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (static_cast<int>(members.size()) < k) {
      throw ConfigError("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                        " members, fewer than k=" + std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> tests(static_cast<std::size_t>(k));
  std::size_t next = 0;  // continue dealing across classes so fold sizes stay balanced
  for (auto& [label, members] : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      tests[next % static_cast<std::size_t>(k)].push_back(idx);
      ++next;
    }
  }
  std::vector<Fold> folds;
  for (auto& test : tests) {
    std::sort(test.begin(), test.end());
    Fold f;
    f.test = test;
    std::vector<bool> in_test(labels.size(), false);
    for (std::size_t i : test) in_test[i] = true;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!in_test[i]) f.train.push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.folds = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f(%.1f)", 100.0 * s.mean, 100.0 * s.std);
  s.formatted = buf;
  return s;
}

namespace {

std::optional<MetricSummary> summarize_optional(std::span<const MetricsReport> folds,
                                                std::optional<double> MetricsReport::*field) {
  std::vector<double> values;
  for (const auto& f : folds) {
    if (f.*field) values.push_back(*(f.*field));
  }
  if (values.empty()) return std::nullopt;
  return summarize(values);
}

json summary_json(const std::optional<MetricSummary>& s) {
  if (!s) return nullptr;
  return json{{"mean", s->mean}, {"std", s->std}, {"folds", s->folds}, {"formatted", s->formatted}};
}

}  // namespace

AggregateReport aggregate(std::span<const MetricsReport> per_fold) {
  if (per_fold.empty()) throw ContractError("aggregate needs at least one fold");
  AggregateReport r;
  std::vector<double> acc;
  for (const auto& f : per_fold) acc.push_back(f.acc);
  r.acc = summarize(acc);
  r.sen = summarize_optional(per_fold, &MetricsReport::sen);
  r.spe = summarize_optional(per_fold, &MetricsReport::spe);
  r.auc = summarize_optional(per_fold, &MetricsReport::auc);
  return r;
}

json AggregateReport::to_json() const {
  return json{{"acc", summary_json(acc)}, {"sen", summary_json(sen)}, {"spe", summary_json(spe)},
              {"auc", summary_json(auc)}};
}

}  // namespace connlearn
