#include <doctest.h>

#include <cmath>

#include "connlearn/losses.hpp"
#include "support.hpp"

using namespace connlearn;
using testing_support::random_matrix;
namespace oracle = testing_support::oracle;

namespace {

std::vector<std::vector<double>> to_lists(const std::vector<RowVector>& rows) {
  std::vector<std::vector<double>> out;
  for (const auto& r : rows) out.emplace_back(r.data(), r.data() + r.size());
  return out;
}

std::vector<RowVector> random_rows(Rng& rng, int b, int d) {
  std::vector<RowVector> out;
  for (int i = 0; i < b; ++i) out.push_back(random_matrix(rng, 1, d));
  return out;
}

}  // namespace

TEST_CASE("nt_xent closed forms") {
  const ContrastiveOptions unit{1.0, true, false};
  SUBCASE("a single pair costs nothing") {
    const std::vector<RowVector> f = {(RowVector(3) << 1, 2, 3).finished()};
    const std::vector<RowVector> e = {(RowVector(3) << -3, 0, 1).finished()};
    CHECK(nt_xent(f, e, unit) == 0.0);
  }
  SUBCASE("two pairs, unit positives and orthogonal negatives") {
    const RowVector e1 = (RowVector(2) << 1, 0).finished();
    const RowVector e2 = (RowVector(2) << 0, 1).finished();
    const std::vector<RowVector> f = {e1, e2};
    const std::vector<RowVector> e = {e1, e2};
    // Anchor f1: positive e1 (dot 1), negatives f2, e2 (dot 0).
    const double want = std::log(1.0 + 2.0 / std::exp(1.0));
    CHECK(std::abs(nt_xent(f, e, unit) - want) <= 1e-9);
    CHECK(want == doctest::Approx(0.5514).epsilon(1e-4));
  }
  SUBCASE("common scaling does not change the loss") {
    Rng rng(1);
    const auto f = random_rows(rng, 4, 5);
    const auto e = random_rows(rng, 4, 5);
    std::vector<RowVector> f10, e10;
    for (const auto& r : f) f10.push_back(10 * r);
    for (const auto& r : e) e10.push_back(10 * r);
    const ContrastiveOptions o{0.5, true, false};
    CHECK(nt_xent(f10, e10, o) == doctest::Approx(nt_xent(f, e, o)).epsilon(1e-12));
  }
}

TEST_CASE("nt_xent agrees with the loop oracle, is nonnegative and order-invariant") {
  Rng rng(2);
  for (int b : {2, 3, 6}) {
    const auto f = random_rows(rng, b, 4);
    const auto e = random_rows(rng, b, 4);
    const ContrastiveOptions o{0.5, true, false};
    const double got = nt_xent(f, e, o);
    CHECK(got == doctest::Approx(oracle::nt_xent(to_lists(f), to_lists(e), 0.5)).epsilon(1e-12));
    CHECK(got >= 0.0);
    std::vector<RowVector> fr(f.rbegin(), f.rend()), er(e.rbegin(), e.rend());
    CHECK(std::abs(nt_xent(fr, er, o) - got) <= 1e-12);
  }
}

TEST_CASE("nt_xent variants") {
  Rng rng(3);
  const auto f = random_rows(rng, 3, 4);
  const auto e = random_rows(rng, 3, 4);
  SUBCASE("symmetric mode averages both anchorings") {
    const double fwd = nt_xent(f, e, {0.5, true, false});
    const double rev = nt_xent(e, f, {0.5, true, false});
    CHECK(nt_xent(f, e, {0.5, true, true}) == doctest::Approx(0.5 * (fwd + rev)).epsilon(1e-12));
  }
  SUBCASE("normalize=false uses raw dot products") {
    std::vector<RowVector> fu, eu;
    for (const auto& r : f) fu.push_back(r.normalized());
    for (const auto& r : e) eu.push_back(r.normalized());
    CHECK(nt_xent(fu, eu, {0.5, false, false}) == doctest::Approx(nt_xent(f, e, {0.5, true, false})).epsilon(1e-12));
    std::vector<RowVector> f2;
    for (const auto& r : f) f2.push_back(2 * r);
    CHECK(nt_xent(f2, e, {0.5, false, false}) != doctest::Approx(nt_xent(f, e, {0.5, false, false})));
  }
  SUBCASE("zero-norm embeddings are counted and give finite loss") {
    const std::size_t before = zero_norm_embedding_count();
    std::vector<RowVector> fz = f;
    fz[1].setZero();
    CHECK(std::isfinite(nt_xent(fz, e, {0.5, true, false})));
    CHECK(zero_norm_embedding_count() == before + 1);
  }
}

TEST_CASE("graph loss examples") {
  SUBCASE("two-node hand value") {
    const Matrix h = (Matrix(2, 1) << 0, 2).finished();
    const Matrix a = (Matrix(2, 2) << 0, 0.5, 0.5, 0).finished();
    CHECK(std::abs(graph_loss(h, a, 0.01) - 4.005) <= 1e-12);
  }
  SUBCASE("identical rows leave the Frobenius term") {
    const Matrix h = Matrix::Constant(3, 4, 1.5);
    Rng rng(4);
    const Matrix a = random_matrix(rng, 3, 3).cwiseAbs();
    CHECK(graph_loss(h, a, 0.3) == doctest::Approx(0.3 * a.squaredNorm()).epsilon(1e-14));
    CHECK(graph_loss(h, a, 0.0) == 0.0);
  }
  SUBCASE("empty graph") {
    Rng rng(5);
    CHECK(graph_loss(random_matrix(rng, 4, 3), Matrix::Zero(4, 4), 0.01) == 0.0);
  }
}

TEST_CASE("graph loss agrees with the loop oracle and grows with gamma") {
  Rng rng(6);
  const Matrix h = random_matrix(rng, 5, 3);
  const Matrix a = random_matrix(rng, 5, 5).cwiseAbs();
  CHECK(graph_loss(h, a, 0.01) == doctest::Approx(oracle::graph_loss(h, a, 0.01)).epsilon(1e-12));
  double prev = -1.0;
  for (double g : {0.0, 0.01, 0.1, 1.0, 10.0}) {
    const double v = graph_loss(h, a, g);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("cross entropy") {
  const RowVector zero = RowVector::Zero(2);
  CHECK(cross_entropy(zero, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cross_entropy(zero, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const RowVector big = (RowVector(2) << 1000, 0).finished();
  CHECK(cross_entropy(big, 0) == doctest::Approx(0.0));
  CHECK(std::isfinite(cross_entropy(big, 1)));
  CHECK(cross_entropy(big, 1) == doctest::Approx(1000.0));
  const RowVector pm = (RowVector(2) << 1, -1).finished();
  const double want = -std::log(std::exp(-1.0) / (std::exp(1.0) + std::exp(-1.0)));
  CHECK(cross_entropy(pm, 1) == doctest::Approx(want).epsilon(1e-14));
  CHECK(want == doctest::Approx(2.1269).epsilon(1e-4));
}

TEST_CASE("loss report serializes every term and the coefficients") {
  LossReport r;
  r.contrastive = 1.5;
  r.alpha = 0.001;
  r.tau = 0.5;
  const auto j = r.to_json();
  for (const char* k : {"contrastive", "graph_fc", "graph_ec", "encoder_reg", "classification", "total"}) {
    CHECK(j.contains(k));
  }
  CHECK(j["coefficients"]["alpha"] == 0.001);
  CHECK(j["coefficients"]["tau"] == 0.5);
}
