#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "connlearn/errors.hpp"
#include "connlearn/eval.hpp"
#include "connlearn/rng.hpp"

using namespace connlearn;

namespace {

/// Brute-force pair count: concordant 1, tied 0.5.
double auc_oracle(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0;
  for (double p : pos) {
    for (double n : neg) s += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return s / static_cast<double>(pos.size() * neg.size());
}

}  // namespace

TEST_CASE("confusion metrics examples") {
  SUBCASE("perfect") {
    const std::vector<int> y = {1, 1, 0, 0};
    const MetricsReport m = confusion_metrics(y, y);
    CHECK(m.acc == 1.0);
    CHECK(*m.sen == 1.0);
    CHECK(*m.spe == 1.0);
  }
  SUBCASE("all positive") {
    const std::vector<int> p = {1, 1}, y = {1, 0};
    const MetricsReport m = confusion_metrics(p, y);
    CHECK(m.acc == 0.5);
    CHECK(*m.sen == 1.0);
    CHECK(*m.spe == 0.0);
  }
  SUBCASE("one of each cell") {
    const std::vector<int> p = {1, 0, 1, 0}, y = {1, 1, 0, 0};
    const MetricsReport m = confusion_metrics(p, y);
    CHECK(m.tp == 1);
    CHECK(m.fn == 1);
    CHECK(m.fp == 1);
    CHECK(m.tn == 1);
    CHECK(m.n == 4);
    CHECK(m.acc == 0.5);
    CHECK(*m.sen == 0.5);
    CHECK(*m.spe == 0.5);
  }
  SUBCASE("undefined ratios are absent") {
    const std::vector<int> p = {0, 1}, y = {0, 0};
    const MetricsReport m = confusion_metrics(p, y);
    CHECK(!m.sen.has_value());
    CHECK(*m.spe == 0.5);
    CHECK(m.to_json()["sen"].is_null());
  }
  SUBCASE("length mismatch") {
    const std::vector<int> p = {0, 1}, y = {0};
    CHECK_THROWS_AS(confusion_metrics(p, y), ContractError);
  }
}

TEST_CASE("confusion metrics ignore the order of pairs") {
  std::vector<int> p = {1, 0, 0, 1, 1, 0, 1}, y = {1, 1, 0, 0, 1, 0, 0};
  const MetricsReport a = confusion_metrics(p, y);
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::vector<int> p2, y2;
  for (std::size_t i : order) {
    p2.push_back(p[i]);
    y2.push_back(y[i]);
  }
  const MetricsReport b = confusion_metrics(p2, y2);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("AUC examples") {
  const std::vector<int> y = {1, 1, 0, 0};
  CHECK(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y) == 1.0);
  CHECK(auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, y) == 0.5);
  CHECK(auc(std::vector<double>{0.8, 0.3, 0.5, 0.1}, y) == 0.75);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetricError);
}

TEST_CASE("AUC agrees with the pair count and ignores monotone transforms") {
  Rng rng(1);
  std::vector<double> s;
  std::vector<int> y;
  std::vector<double> pos, neg;
  for (int i = 0; i < 40; ++i) {
    const int label = static_cast<int>(rng.below(2));
    const double v = std::round(rng.normal() * 4) / 4 + 0.5 * label;  // coarse values force ties
    s.push_back(v);
    y.push_back(label);
    (label ? pos : neg).push_back(v);
  }
  const double a = auc(s, y);
  CHECK(a == doctest::Approx(auc_oracle(pos, neg)).epsilon(1e-15));
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3 * v) - 7);
  CHECK(auc(t, y) == a);
}

TEST_CASE("stratified k-fold") {
  SUBCASE("five and five over five folds") {
    const std::vector<int> y = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto folds = stratified_kfold(y, 5, 3);
    REQUIRE(folds.size() == 5);
    for (const auto& f : folds) {
      REQUIRE(f.test.size() == 2);
      CHECK(y[f.test[0]] + y[f.test[1]] == 1);
      CHECK(f.train.size() == 8);
    }
  }
  SUBCASE("partition, balance and determinism") {
    Rng rng(4);
    std::vector<int> y;
    for (int i = 0; i < 37; ++i) y.push_back(rng.uniform() < 0.4 ? 1 : 0);
    const auto folds = stratified_kfold(y, 5, 11);
    std::multiset<std::size_t> seen;
    std::vector<int> per_class[2];
    for (const auto& f : folds) {
      int count[2] = {0, 0};
      for (std::size_t i : f.test) {
        seen.insert(i);
        ++count[y[i]];
        CHECK(std::find(f.train.begin(), f.train.end(), i) == f.train.end());
      }
      CHECK(f.train.size() + f.test.size() == y.size());
      per_class[0].push_back(count[0]);
      per_class[1].push_back(count[1]);
    }
    CHECK(seen.size() == y.size());
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(seen.count(i) == 1);
    for (const auto& c : per_class) CHECK(*std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()) <= 1);
    const auto again = stratified_kfold(y, 5, 11);
    for (std::size_t f = 0; f < 5; ++f) CHECK(again[f].test == folds[f].test);
    const auto other = stratified_kfold(y, 5, 12);
    bool differs = false;
    for (std::size_t f = 0; f < 5; ++f) differs = differs || other[f].test != folds[f].test;
    CHECK(differs);
  }
  SUBCASE("sixty subjects give five test sets of twelve") {
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) y.push_back(i % 2);
    for (const auto& f : stratified_kfold(y, 5, 0)) {
      CHECK(f.test.size() == 12);
      CHECK(std::count_if(f.test.begin(), f.test.end(), [&](std::size_t i) { return y[i] == 1; }) == 6);
    }
  }
  SUBCASE("errors") {
    const std::vector<int> y = {0, 0, 0, 1, 1};
    CHECK_THROWS_AS(stratified_kfold(y, 3, 0), ConfigError);
    CHECK_THROWS_AS(stratified_kfold(y, 1, 0), ConfigError);
    CHECK_NOTHROW(stratified_kfold(y, 2, 0));
  }
}

TEST_CASE("aggregation") {
  CHECK(summarize(std::vector<double>{0.8, 0.8, 0.8}).formatted == "80.0(0.0)");
  const MetricSummary two = summarize(std::vector<double>{1.0, 0.0});
  CHECK(two.mean == 0.5);
  CHECK(two.std == 0.5);
  const std::vector<double> five = {0.86, 0.84, 0.88, 0.85, 0.87};
  const MetricSummary s = summarize(five);
  double mean = 0, var = 0;
  for (double v : five) mean += v / 5;
  for (double v : five) var += (v - mean) * (v - mean) / 5;
  CHECK(s.mean == doctest::Approx(mean).epsilon(1e-15));
  CHECK(s.std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  CHECK(s.formatted == "86.0(1.4)");

  std::vector<MetricsReport> folds(2);
  folds[0].acc = 1.0;
  folds[0].sen = 1.0;
  folds[0].auc = 0.9;
  folds[1].acc = 0.5;
  folds[1].auc = 0.7;
  const AggregateReport r = aggregate(folds);
  CHECK(r.acc.mean == 0.75);
  CHECK(r.sen->folds == 1);
  CHECK(!r.spe.has_value());
  CHECK(r.auc->mean == doctest::Approx(0.8));
  CHECK(r.to_json()["acc"]["formatted"] == "75.0(25.0)");
}
