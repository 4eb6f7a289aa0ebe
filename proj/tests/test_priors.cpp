#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "connlearn/errors.hpp"
#include "connlearn/priors.hpp"
#include "connlearn/signals.hpp"
#include "support.hpp"

using namespace connlearn;
namespace oracle = testing_support::oracle;

namespace {

std::vector<double> row_of(const Matrix& m, Eigen::Index i) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index t = 0; t < m.cols(); ++t) v[static_cast<std::size_t>(t)] = m(i, t);
  return v;
}

/// Row 0 copies row 1 with a one-step delay; row 1 is iid uniform binary.
Matrix binary_copy(std::uint64_t seed, int t) {
  Rng rng(seed);
  Matrix m(2, t);
  for (int k = 0; k < t; ++k) m(1, k) = static_cast<double>(rng.below(2));
  m(0, 0) = static_cast<double>(rng.below(2));
  for (int k = 1; k < t; ++k) m(0, k) = m(1, k - 1);
  return m;
}

}  // namespace

TEST_CASE("pearson hand value and sign conventions") {
  Matrix m(4, 4);
  m << 1, 2, 3, 4,  //
      1, 2, 3, 5,   //
      -1, -2, -3, -4, 7, 7, 7, 7;
  const PriorMatrix p = pearson_matrix(m);
  CHECK(p.kind == PriorKind::pearson);
  CHECK(p.values(0, 1) == doctest::Approx(6.5 / std::sqrt(43.75)).epsilon(1e-12));
  CHECK(p.values(0, 1) == doctest::Approx(0.9827).epsilon(1e-4));
  CHECK(p.values(0, 1) == doctest::Approx(oracle::pearson(row_of(m, 0), row_of(m, 1))).epsilon(1e-12));
  CHECK(p.values(0, 0) == 1.0);
  CHECK(p.values(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
  // Constant row: zero against everything else, one on the diagonal.
  CHECK(p.values(3, 3) == 1.0);
  for (int j = 0; j < 3; ++j) {
    CHECK(p.values(3, j) == 0.0);
    CHECK(p.values(j, 3) == 0.0);
  }
}

TEST_CASE("pearson matrix is symmetric, bounded and agrees with the oracle") {
  Rng rng(11);
  const Matrix x = testing_support::random_matrix(rng, 7, 30);
  const PriorMatrix p = pearson_matrix(x);
  for (Eigen::Index i = 0; i < 7; ++i) {
    CHECK(p.values(i, i) == 1.0);
    for (Eigen::Index j = 0; j < 7; ++j) {
      CHECK(std::abs(p.values(i, j) - p.values(j, i)) <= 1e-12);
      CHECK(std::abs(p.values(i, j)) <= 1.0);
      if (i != j) CHECK(p.values(i, j) == doctest::Approx(oracle::pearson(row_of(x, i), row_of(x, j))).epsilon(1e-10));
    }
  }
}

TEST_CASE("quantile bins are equal-frequency with ties broken by time index") {
  const std::vector<double> v = {5, 1, 5, 5, 2, 9, 5, 0};
  const std::vector<int> b = quantile_bins(v, 4);
  // Stable ranks: 0(7) 1(1) 2(4) 5(0) 5(2) 5(3) 5(6) 9(5).
  CHECK(b == std::vector<int>{1, 0, 2, 2, 1, 3, 3, 0});
  for (int k = 0; k < 4; ++k) CHECK(std::count(b.begin(), b.end(), k) == 2);
}

TEST_CASE("transfer entropy of a delayed binary copy approaches one bit in the true direction") {
  const Matrix m = binary_copy(1, 2000);
  const PriorMatrix te = transfer_entropy_matrix(m, 2, 1);
  CHECK(te.kind == PriorKind::transfer_entropy);
  CHECK(te.values(0, 1) >= 0.95);  // source row 1 -> target row 0
  CHECK(te.values(1, 0) <= 0.05);
  CHECK(te.values(0, 0) == 0.0);
  CHECK(te.values(1, 1) == 0.0);
}

TEST_CASE("transfer entropy matches the probability-form oracle") {
  Rng rng(4);
  const Matrix x = testing_support::random_matrix(rng, 3, 300);
  for (int bins : {2, 3, 8}) {
    for (int lag : {1, 2}) {
      const PriorMatrix te = transfer_entropy_matrix(x, bins, lag);
      std::vector<std::vector<int>> sym;
      for (Eigen::Index i = 0; i < 3; ++i) sym.push_back(quantile_bins(row_of(x, i), bins));
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (i == j) continue;
          const double want = std::max(0.0, oracle::transfer_entropy(sym[i], sym[j], lag));
          CHECK(te.values(i, j) == doctest::Approx(want).epsilon(1e-9).scale(1.0));
          CHECK(te.values(i, j) >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("independent series stay under the plug-in bias bound") {
  int below = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(seed, 77));
    const Matrix x = testing_support::random_matrix(rng, 2, 2000);
    if (transfer_entropy_matrix(x, 2, 1).values(0, 1) < 0.01) ++below;
  }
  CHECK(below >= 95);
}

TEST_CASE("transfer entropy follows the direction of a synthetic coupling") {
  // Ring template: region k drives region k+1 and nothing drives back.
  const Matrix c = coupling_template(16, 0);
  REQUIRE(c(1, 0) > 0.0);
  REQUIRE(c(0, 1) == 0.0);
  int correct = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthOptions o;
    o.n_subjects = 1;
    o.n_classes = 1;
    o.n_timepoints = 400;
    o.seed = seed;
    const Matrix x = synth_generate(o).subjects[0].bold.values;
    const auto src = quantile_bins(row_of(x, 0), 8);
    const auto dst = quantile_bins(row_of(x, 1), 8);
    if (transfer_entropy(dst, src, 8, 1) > transfer_entropy(src, dst, 8, 1)) ++correct;
  }
  CHECK(correct >= 95);
}

TEST_CASE("priors are permutation-equivariant and byte-stable") {
  Rng rng(9);
  const Matrix x = testing_support::random_matrix(rng, 6, 60);
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<int>(perm));
  Matrix px(6, 60);
  for (int i = 0; i < 6; ++i) px.row(i) = x.row(perm[i]);

  const PriorMatrix p = pearson_matrix(x), pp = pearson_matrix(px);
  const PriorMatrix t = transfer_entropy_matrix(x, 8, 1), tp = transfer_entropy_matrix(px, 8, 1);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      CHECK(pp.values(i, j) == p.values(perm[i], perm[j]));
      CHECK(tp.values(i, j) == t.values(perm[i], perm[j]));
    }
  }
  const PriorMatrix t2 = transfer_entropy_matrix(x, 8, 1);
  CHECK(std::memcmp(t.values.data(), t2.values.data(), sizeof(double) * 36) == 0);
  const PriorMatrix p2 = pearson_matrix(x);
  CHECK(std::memcmp(p.values.data(), p2.values.data(), sizeof(double) * 36) == 0);
}

TEST_CASE("transfer entropy argument checks") {
  Rng rng(2);
  const Matrix x = testing_support::random_matrix(rng, 2, 10);
  CHECK_THROWS_AS(transfer_entropy_matrix(x, 1, 1), ConfigError);
  CHECK_THROWS_AS(transfer_entropy_matrix(x, 11, 1), ConfigError);
  CHECK_THROWS_AS(transfer_entropy_matrix(x, 2, 0), ConfigError);
  CHECK_THROWS_AS(transfer_entropy_matrix(x, 2, 7), ConfigError);
  CHECK_NOTHROW(transfer_entropy_matrix(x, 2, 6));
}

TEST_CASE("prior cache computes once and persists to disk") {
  testing_support::TempDir dir("cache");
  Rng rng(8);
  const Matrix x = testing_support::random_matrix(rng, 4, 40);
  PriorCache cache(dir.path());
  const SubjectPriors first = cache.get(x, 8, 1);
  cache.get(x, 8, 1);
  CHECK(cache.computed() == 1);
  cache.get(x, 4, 1);
  CHECK(cache.computed() == 2);

  PriorCache reopened(dir.path());
  const SubjectPriors again = reopened.get(x, 8, 1);
  CHECK(reopened.computed() == 0);
  CHECK(again.transfer_entropy.values == first.transfer_entropy.values);
  CHECK(again.pearson.values == first.pearson.values);
  CHECK(again.transfer_entropy.bins == 8);
}
