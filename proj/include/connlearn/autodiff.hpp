#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records every operation as a node holding its forward value and a
// closure that pushes the node's adjoint into its parents. Values are
// Eigen matrices; scalars are 1x1. Nodes built only from constants carry no
// closure, so a tape of constants is a plain forward evaluator.

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace connlearn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

namespace ad {

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// A leaf whose gradient is accumulated by backward().
  Var leaf(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  /// Adjoint of v; an empty matrix until backward() reaches it.
  const Matrix& grad(Var v) const { return nodes_[v.id()].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(output)/d(output) = 1 and runs the reverse sweep. output must be 1x1.
  void backward(Var output);

  // Used by operation implementations.
  /// Receives the node's own forward value and its adjoint.
  using Backward = std::function<void(Tape&, const Matrix& value, const Matrix& grad)>;
  Var record(Matrix value, std::initializer_list<Var> parents, Backward fn);
  Var record(Matrix value, std::span<const Var> parents, Backward fn);
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }
inline const Matrix& Var::grad() const { return tape_->grad(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }

// Linear algebra.
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// s * a where s is a 1x1 node.
Var mul_scalar(Var a, Var s);
/// Adds the 1xd row r to every row of a.
Var add_row(Var a, Var r);
/// a * diag(w), w a 1xd row.
Var scale_cols(Var a, Var w);

// Elementwise and row-wise maps.
Var relu(Var a);
/// Rows divided by their L2 norm; zero rows stay zero with zero gradient.
Var l2_normalize_rows(Var a);
/// Rows divided by max(row sum, eps); all-zero rows stay zero.
Var row_normalize(Var a, double eps);
Var log_softmax_rows(Var a);
/// Softmax down a single column.
Var softmax_col(Var a);
/// Per-row log-sum-exp over the entries where mask is nonzero; returns rows x 1.
Var masked_logsumexp_rows(Var a, const Matrix& mask);
/// D_ij = ||a_i - a_j||^2 over rows.
Var pairwise_sq_dist(Var a);

// Reductions and reshaping.
Var sum(Var a);
Var col_mean(Var a);
Var entry(Var a, Eigen::Index i, Eigen::Index j);
Var vstack(std::span<const Var> parts);
Var hcat(Var a, Var b);

}  // namespace ad
}  // namespace connlearn
