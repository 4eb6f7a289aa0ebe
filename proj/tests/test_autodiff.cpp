#include <doctest.h>

#include <functional>

#include "connlearn/autodiff.hpp"
#include "support.hpp"

using namespace connlearn;
using testing_support::random_matrix;

namespace {

/// Central-difference gradient of a scalar function of one matrix.
Matrix numeric_grad(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double keep = x.data()[k];
    x.data()[k] = keep + h;
    const double up = f(x);
    x.data()[k] = keep - h;
    const double down = f(x);
    x.data()[k] = keep;
    g.data()[k] = (up - down) / (2 * h);
  }
  return g;
}

using UnaryOp = std::function<ad::Var(ad::Tape&, ad::Var)>;

/// Reduces op(x) to a scalar by a fixed random projection and compares
/// the tape gradient with central differences.
void check_op(const UnaryOp& op, Matrix x, std::uint64_t seed, double tol = 1e-6) {
  Rng rng(seed);
  Matrix probe;
  auto value = [&](const Matrix& at) {
    ad::Tape tape;
    const ad::Var out = op(tape, tape.constant(at));
    if (probe.size() == 0) probe = random_matrix(rng, out.rows(), out.cols());
    return out.value().cwiseProduct(probe).sum();
  };
  value(x);
  ad::Tape tape;
  const ad::Var in = tape.leaf(x);
  const ad::Var out = op(tape, in);
  const ad::Var loss = ad::sum(ad::hadamard(out, tape.constant(probe)));
  tape.backward(loss);
  const Matrix want = numeric_grad(value, x);
  const double err = (in.grad() - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
  CHECK(err < tol);
}

}  // namespace

TEST_CASE("tape gradients of elementwise and matrix ops") {
  Rng rng(1);
  const Matrix a = random_matrix(rng, 4, 3);
  const Matrix b = random_matrix(rng, 3, 5);
  const Matrix c = random_matrix(rng, 4, 3);
  const Matrix row = random_matrix(rng, 1, 3);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::matmul(x, t.constant(b)); }, a, 2);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::matmul(t.constant(c.transpose()), x); }, a, 3);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::matmul_nt(x, t.constant(c)); }, a, 4);
  check_op([&](ad::Tape&, ad::Var x) { return ad::matmul_nt(x, x); }, a, 5);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::sub(ad::add(x, t.constant(c)), ad::hadamard(x, x)); }, a, 6);
  check_op([&](ad::Tape&, ad::Var x) { return ad::scale(x, -2.5); }, a, 7);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::add_row(t.constant(c), x); }, row, 8);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::scale_cols(x, t.constant(row)); }, a, 9);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::scale_cols(t.constant(a), x); }, row, 10);
  check_op([&](ad::Tape&, ad::Var x) { return ad::relu(x); }, a, 11);
  check_op([&](ad::Tape&, ad::Var x) { return ad::l2_normalize_rows(x); }, a, 12);
  check_op([&](ad::Tape&, ad::Var x) { return ad::row_normalize(ad::relu(x), 1e-12); }, a.cwiseAbs(), 13);
  check_op([&](ad::Tape&, ad::Var x) { return ad::log_softmax_rows(x); }, a, 14);
  check_op([&](ad::Tape&, ad::Var x) { return ad::softmax_col(x); }, random_matrix(rng, 4, 1), 15);
  check_op([&](ad::Tape&, ad::Var x) { return ad::pairwise_sq_dist(x); }, a, 16);
  check_op([&](ad::Tape&, ad::Var x) { return ad::col_mean(x); }, a, 17);
  check_op([&](ad::Tape&, ad::Var x) { return ad::entry(x, 2, 1); }, a, 18);
  check_op([&](ad::Tape&, ad::Var x) { return ad::hcat(x, ad::scale(x, 2.0)); }, a, 19);
  check_op([&](ad::Tape& t, ad::Var x) { return ad::mul_scalar(x, ad::entry(t.constant(b), 0, 0)); }, a, 20);
  check_op([&](ad::Tape&, ad::Var x) { return ad::mul_scalar(x, ad::entry(x, 1, 1)); }, a, 21);
  check_op(
      [&](ad::Tape&, ad::Var x) {
        const std::vector<ad::Var> parts = {x, ad::relu(x)};
        return ad::vstack(parts);
      },
      a, 22);
  Matrix mask = Matrix::Ones(4, 3);
  mask(1, 1) = 0;
  mask(3, 0) = 0;
  check_op([&](ad::Tape&, ad::Var x) { return ad::masked_logsumexp_rows(x, mask); }, a, 23);
}

TEST_CASE("gradients accumulate over every use of a leaf") {
  ad::Tape tape;
  const Matrix x0 = (Matrix(1, 2) << 2.0, -3.0).finished();
  const ad::Var x = tape.leaf(x0);
  // f = sum(x*x) + 3 sum(x)  ->  df/dx = 2x + 3
  const ad::Var f = ad::add(ad::sum(ad::hadamard(x, x)), ad::scale(ad::sum(x), 3.0));
  tape.backward(f);
  CHECK(x.grad()(0, 0) == doctest::Approx(7.0));
  CHECK(x.grad()(0, 1) == doctest::Approx(-3.0));
}

TEST_CASE("constants receive no gradient and zero rows normalize to zero") {
  ad::Tape tape;
  const ad::Var c = tape.constant(Matrix::Ones(2, 2));
  Matrix z = Matrix::Ones(2, 3);
  z.row(0).setZero();
  const ad::Var x = tape.leaf(z);
  const ad::Var y = ad::l2_normalize_rows(x);
  CHECK(y.value().row(0).isZero(0.0));
  tape.backward(ad::sum(ad::add(ad::matmul(c, y), ad::matmul(c, y))));
  CHECK(!c.requires_grad());
  CHECK(x.grad().allFinite());
  CHECK(x.grad().row(0).isZero(0.0));
}

TEST_CASE("relu uses subgradient zero at the kink") {
  ad::Tape tape;
  const ad::Var x = tape.leaf((Matrix(1, 3) << -1.0, 0.0, 1.0).finished());
  tape.backward(ad::sum(ad::relu(x)));
  CHECK(x.grad()(0, 0) == 0.0);
  CHECK(x.grad()(0, 1) == 0.0);
  CHECK(x.grad()(0, 2) == 1.0);
}
