#include "connlearn/autodiff.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "connlearn/errors.hpp"

namespace connlearn::ad {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ContractError("operands recorded on different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(fn) : nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var output) {
  if (value(output).size() != 1) throw ContractError("backward() needs a scalar output");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[output.id()].requires_grad) return;
  nodes_[output.id()].grad = Matrix::Ones(1, 1);
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.backward && n.grad.size() != 0) n.backward(*this, n.value, n.grad);
  }
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) throw ContractError("matmul: inner dimensions differ");
  return a.tape()->record(av * bv, {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) throw ContractError("matmul_nt: column counts differ");
  return a.tape()->record(av * bv.transpose(), {a, b},
                          [a, b](Tape& t, const Matrix&, const Matrix& g) {
                            if (a.requires_grad()) t.accumulate(a, g * b.value());
                            if (b.requires_grad()) t.accumulate(b, g.transpose() * a.value());
                          });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  return a.tape()->record(a.value() + b.value(), {a, b},
                          [a, b](Tape& t, const Matrix&, const Matrix& g) {
                            t.accumulate(a, g);
                            t.accumulate(b, g);
                          });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  return a.tape()->record(a.value() - b.value(), {a, b},
                          [a, b](Tape& t, const Matrix&, const Matrix& g) {
                            t.accumulate(a, g);
                            if (b.requires_grad()) t.accumulate(b, -g);
                          });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Tape& t, const Matrix&, const Matrix& g) {
                            if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
                            if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
                          });
}

Var scale(Var a, double s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g * s);
  });
}

Var mul_scalar(Var a, Var s) {
  if (s.value().size() != 1) throw ContractError("mul_scalar: factor must be 1x1");
  return a.tape()->record(a.value() * s.scalar(), {a, s},
                          [a, s](Tape& t, const Matrix&, const Matrix& g) {
                            if (a.requires_grad()) t.accumulate(a, g * s.scalar());
                            if (s.requires_grad()) {
                              t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
                            }
                          });
}

Var add_row(Var a, Var r) {
  const Matrix& av = a.value();
  const Matrix& rv = r.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw ContractError("add_row: bad row shape");
  Matrix out = av;
  out.rowwise() += rv.row(0);
  return a.tape()->record(std::move(out), {a, r}, [a, r](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, g);
    if (r.requires_grad()) t.accumulate(r, g.colwise().sum());
  });
}

Var scale_cols(Var a, Var w) {
  const Matrix& av = a.value();
  const Matrix& wv = w.value();
  if (wv.rows() != 1 || wv.cols() != av.cols()) {
    throw ContractError("scale_cols: weight has " + std::to_string(wv.cols()) +
                        " entries for " + std::to_string(av.cols()) + " columns");
  }
  Matrix out = av * wv.row(0).asDiagonal();
  return a.tape()->record(std::move(out), {a, w}, [a, w](Tape& t, const Matrix&, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * w.value().row(0).asDiagonal());
    if (w.requires_grad()) t.accumulate(w, g.cwiseProduct(a.value()).colwise().sum());
  });
}

Var relu(Var a) {
  // Subgradient 0 at the kink.
  return a.tape()->record(a.value().cwiseMax(0.0), {a},
                          [a](Tape& t, const Matrix&, const Matrix& g) {
                            t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
                          });
}

Var l2_normalize_rows(Var a) {
  const Matrix& av = a.value();
  const Vector norms = av.rowwise().norm();
  Matrix out = Matrix::Zero(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    if (norms(i) > 0.0) out.row(i) = av.row(i) / norms(i);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, norms](Tape& t, const Matrix& y, const Matrix& g) {
                            Matrix dx = Matrix::Zero(y.rows(), y.cols());
                            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                              if (norms(i) == 0.0) continue;
                              const double proj = y.row(i).dot(g.row(i));
                              dx.row(i) = (g.row(i) - proj * y.row(i)) / norms(i);
                            }
                            t.accumulate(a, dx);
                          });
}

Var row_normalize(Var a, double eps) {
  const Matrix& av = a.value();
  const Vector sums = av.rowwise().sum();
  const Vector denom = sums.cwiseMax(eps);
  Matrix out = Matrix::Zero(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    if (sums(i) != 0.0) out.row(i) = av.row(i) / denom(i);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, sums, eps](Tape& t, const Matrix& y, const Matrix& g) {
                            Matrix dx = Matrix::Zero(y.rows(), y.cols());
                            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                              if (sums(i) > eps) {
                                const double proj = y.row(i).dot(g.row(i));
                                dx.row(i) = (g.row(i).array() - proj) / sums(i);
                              } else {
                                dx.row(i) = g.row(i) / eps;
                              }
                            }
                            t.accumulate(a, dx);
                          });
}

Var log_softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    const double mx = av.row(i).maxCoeff();
    const double lse = mx + std::log((av.row(i).array() - mx).exp().sum());
    out.row(i) = av.row(i).array() - lse;
  }
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    const Matrix p = y.array().exp().matrix();
    Matrix dx = g;
    for (Eigen::Index i = 0; i < y.rows(); ++i) dx.row(i) -= g.row(i).sum() * p.row(i);
    t.accumulate(a, dx);
  });
}

Var softmax_col(Var a) {
  const Matrix& av = a.value();
  if (av.cols() != 1) throw ContractError("softmax_col: expects a column");
  const double mx = av.maxCoeff();
  Matrix out = (av.array() - mx).exp().matrix();
  out /= out.sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    const double dot = y.col(0).dot(g.col(0));
    t.accumulate(a, y.cwiseProduct((g.array() - dot).matrix()));
  });
}

Var masked_logsumexp_rows(Var a, const Matrix& mask) {
  const Matrix& av = a.value();
  require_same_shape(av, mask, "masked_logsumexp_rows");
  Matrix out(av.rows(), 1);
  Matrix weights = Matrix::Zero(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < av.cols(); ++j) {
      if (mask(i, j) != 0.0) mx = std::max(mx, av(i, j));
    }
    if (!std::isfinite(mx)) throw ContractError("masked_logsumexp_rows: empty mask row");
    double total = 0.0;
    for (Eigen::Index j = 0; j < av.cols(); ++j) {
      if (mask(i, j) == 0.0) continue;
      weights(i, j) = std::exp(av(i, j) - mx);
      total += weights(i, j);
    }
    weights.row(i) /= total;
    out(i, 0) = mx + std::log(total);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, weights](Tape& t, const Matrix&, const Matrix& g) {
                            t.accumulate(a, g.col(0).asDiagonal() * weights);
                          });
}

Var pairwise_sq_dist(Var a) {
  const Matrix& h = a.value();
  const Vector sq = h.rowwise().squaredNorm();
  Matrix out = -2.0 * h * h.transpose();
  out.colwise() += sq;
  out.rowwise() += sq.transpose();
  out.diagonal().setZero();
  out = out.cwiseMax(0.0);
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    const Matrix& hv = a.value();
    const Matrix sym = g + g.transpose();
    const Vector weight = sym.rowwise().sum();
    t.accumulate(a, 2.0 * (weight.asDiagonal() * hv - sym * hv));
  });
}

Var sum(Var a) {
  return a.tape()->record(Matrix::Constant(1, 1, a.value().sum()), {a},
                          [a](Tape& t, const Matrix&, const Matrix& g) {
                            t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                          });
}

Var col_mean(Var a) {
  const double n = static_cast<double>(a.rows());
  return a.tape()->record(a.value().colwise().mean(), {a},
                          [a, n](Tape& t, const Matrix&, const Matrix& g) {
                            t.accumulate(a, (g / n).replicate(a.rows(), 1));
                          });
}

Var entry(Var a, Eigen::Index i, Eigen::Index j) {
  return a.tape()->record(Matrix::Constant(1, 1, a.value()(i, j)), {a},
                          [a, i, j](Tape& t, const Matrix&, const Matrix& g) {
                            Matrix d = Matrix::Zero(a.rows(), a.cols());
                            d(i, j) = g(0, 0);
                            t.accumulate(a, d);
                          });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("vstack: no parts");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ContractError("vstack: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(out), parts,
                                 [owned](Tape& t, const Matrix&, const Matrix& g) {
                                   Eigen::Index row = 0;
                                   for (const Var& p : owned) {
                                     if (p.requires_grad()) t.accumulate(p, g.middleRows(row, p.rows()));
                                     row += p.rows();
                                   }
                                 });
}

Var hcat(Var a, Var b) {
  if (a.rows() != b.rows()) throw ContractError("hcat: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.leftCols(a.cols()));
    if (b.requires_grad()) t.accumulate(b, g.rightCols(b.cols()));
  });
}

}  // namespace connlearn::ad
