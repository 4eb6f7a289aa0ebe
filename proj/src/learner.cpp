#include "connlearn/learner.hpp"

#include "connlearn/errors.hpp"

namespace connlearn {

ad::Var multihead_similarity(ad::Var features, std::span<const ad::Var> head_weights) {
  if (head_weights.empty()) throw ContractError("multihead_similarity: no heads");
  ad::Var total;
  for (const ad::Var& w : head_weights) {
    const ad::Var unit = ad::l2_normalize_rows(ad::scale_cols(features, w));
    const ad::Var sim = ad::matmul_nt(unit, unit);
    total = total.valid() ? ad::add(total, sim) : sim;
  }
  return ad::scale(total, 1.0 / static_cast<double>(head_weights.size()));
}

FusedGraph fuse_normalize(ad::Var similarity, const Matrix& prior) {
  if (similarity.rows() != prior.rows() || similarity.cols() != prior.cols()) {
    throw ContractError("fuse_normalize: similarity and prior shapes differ");
  }
  Matrix off_diagonal_prior = prior;
  off_diagonal_prior.diagonal().setZero();
  ad::Tape& tape = *similarity.tape();
  const ad::Var product = ad::hadamard(similarity, tape.constant(std::move(off_diagonal_prior)));
  const ad::Var raw = ad::relu(product);
  return FusedGraph{raw, ad::row_normalize(raw, kFuseEpsilon)};
}

FusedGraph build_connectivity(ad::Var features, std::span<const ad::Var> head_weights,
                              const Matrix& prior) {
  return fuse_normalize(multihead_similarity(features, head_weights), prior);
}

Matrix multihead_similarity(const Matrix& features, std::span<const Matrix> head_weights) {
  ad::Tape tape;
  const ad::Var f = tape.constant(features);
  std::vector<ad::Var> heads;
  for (const Matrix& w : head_weights) heads.push_back(tape.constant(w));
  return multihead_similarity(f, heads).value();
}

Matrix fuse_raw(const Matrix& similarity, const PriorMatrix& prior) {
  ad::Tape tape;
  return fuse_normalize(tape.constant(similarity), prior.values).raw.value();
}

namespace {

std::size_t count_zero_rows(const Matrix& m) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if ((m.row(i).array() == 0.0).all()) ++n;
  }
  return n;
}

}  // namespace

ConnectivityMatrix fuse_normalize(const Matrix& similarity, const PriorMatrix& prior, View view,
                                  int iteration) {
  ad::Tape tape;
  const FusedGraph g = fuse_normalize(tape.constant(similarity), prior.values);
  return ConnectivityMatrix{g.adjacency.value(), view, iteration, count_zero_rows(g.raw.value())};
}

ConnectivityMatrix build_connectivity(const Matrix& features, const LearnerT<Matrix>& params,
                                      const PriorMatrix& prior, int layer, View view) {
  if (layer < 0 || static_cast<std::size_t>(layer) >= params.weights.size()) {
    throw ContractError("build_connectivity: layer out of range");
  }
  const Matrix s = multihead_similarity(features, params.weights[static_cast<std::size_t>(layer)]);
  return fuse_normalize(s, prior, view, layer);
}

ConnectivityMatrix fixed_connectivity(const PriorMatrix& prior, View view, int iteration) {
  const Matrix ones = Matrix::Ones(prior.values.rows(), prior.values.cols());
  return fuse_normalize(ones, prior, view, iteration);
}

}  // namespace connlearn
