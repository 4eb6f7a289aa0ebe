#include "connlearn/encoder.hpp"

#include "connlearn/errors.hpp"

namespace connlearn {

ad::Var normalize_adjacency(ad::Var adjacency) {
  ad::Tape& tape = *adjacency.tape();
  const ad::Var with_loops = ad::add(adjacency, tape.constant(Matrix::Identity(adjacency.rows(), adjacency.cols())));
  return ad::row_normalize(with_loops, 0.0);
}

EncoderOutput multi_state_forward(ad::Var adjacency, ad::Var features, const EncoderT<ad::Var>& params,
                                  int iteration) {
  if (params.branches.empty()) throw ContractError("encoder has no state branches");
  if (adjacency.rows() != features.rows()) throw ContractError("encoder: node counts differ");
  const ad::Var propagate = normalize_adjacency(adjacency);
  EncoderOutput out;
  std::vector<ad::Var> branch_nodes;
  std::vector<ad::Var> scores;
  for (const auto& b : params.branches) {
    const ad::Var& w1 = iteration == 0 ? b.w1_input : b.w1_hidden;
    if (w1.rows() != features.cols()) {
      throw ContractError("encoder: input width " + std::to_string(features.cols()) +
                          " does not match layer weights (" + std::to_string(w1.rows()) + ")");
    }
    const ad::Var z1 = ad::relu(ad::add_row(ad::matmul(propagate, ad::matmul(features, w1)), b.b1));
    const ad::Var z2 = ad::relu(ad::add_row(ad::matmul(propagate, ad::matmul(z1, b.w2)), b.b2));
    const ad::Var pooled = ad::col_mean(z2);
    branch_nodes.push_back(z2);
    out.state_pooled.push_back(pooled);
    scores.push_back(ad::matmul(pooled, params.attention));
  }
  out.attention = ad::softmax_col(ad::vstack(scores));
  ad::Var node;
  for (std::size_t s = 0; s < branch_nodes.size(); ++s) {
    const ad::Var weighted =
        ad::mul_scalar(branch_nodes[s], ad::entry(out.attention, static_cast<Eigen::Index>(s), 0));
    node = node.valid() ? ad::add(node, weighted) : weighted;
  }
  out.node = node;
  out.pooled = ad::col_mean(node);
  return out;
}

ad::Var encoder_loss(std::span<const ad::Var> state_pooled) {
  if (state_pooled.empty()) throw ContractError("encoder_loss: no states");
  ad::Tape& tape = *state_pooled.front().tape();
  const auto c = static_cast<Eigen::Index>(state_pooled.size());
  if (c == 1) return tape.constant(Matrix::Zero(1, 1));
  const ad::Var unit = ad::l2_normalize_rows(ad::vstack(state_pooled));
  const ad::Var cos = ad::matmul_nt(unit, unit);
  Matrix upper = Matrix::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) upper(i, j) = 1.0;
  }
  const ad::Var total = ad::sum(ad::hadamard(ad::hadamard(cos, cos), tape.constant(std::move(upper))));
  return ad::scale(total, 2.0 / static_cast<double>(c * (c - 1)));
}

ad::Var classify_head(ad::Var fc_pooled, ad::Var ec_pooled, const HeadT<ad::Var>& params) {
  const ad::Var input = ad::hcat(fc_pooled, ec_pooled);
  const ad::Var inner = ad::relu(ad::add_row(ad::matmul(input, params.w1), params.b1));
  return ad::add_row(ad::matmul(inner, params.w2), params.b2);
}

Matrix normalize_adjacency(const Matrix& adjacency) {
  ad::Tape tape;
  return normalize_adjacency(tape.constant(adjacency)).value();
}

namespace {

EncoderT<ad::Var> as_constants(ad::Tape& tape, const EncoderT<Matrix>& p) {
  EncoderT<ad::Var> out;
  for (const auto& b : p.branches) {
    out.branches.push_back(BranchT<ad::Var>{tape.constant(b.w1_input), tape.constant(b.w1_hidden),
                                            tape.constant(b.b1), tape.constant(b.w2),
                                            tape.constant(b.b2)});
  }
  out.attention = tape.constant(p.attention);
  return out;
}

}  // namespace

HiddenRep multi_state_forward(const ConnectivityMatrix& a, const Matrix& features,
                              const EncoderT<Matrix>& params) {
  ad::Tape tape;
  const EncoderOutput out = multi_state_forward(tape.constant(a.values), tape.constant(features),
                                                as_constants(tape, params), a.iteration);
  HiddenRep rep;
  rep.node_matrix = out.node.value();
  rep.pooled = out.pooled.value().row(0);
  for (const auto& z : out.state_pooled) rep.state_pooled.push_back(z.value().row(0));
  rep.attention = out.attention.value().col(0);
  rep.view = a.view;
  rep.iteration = a.iteration;
  return rep;
}

double encoder_loss(std::span<const RowVector> state_pooled) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& z : state_pooled) vars.push_back(tape.constant(Matrix(z)));
  return encoder_loss(vars).scalar();
}

RowVector classify_head(const RowVector& fc_pooled, const RowVector& ec_pooled,
                        const HeadT<Matrix>& params) {
  ad::Tape tape;
  const HeadT<ad::Var> head{tape.constant(params.w1), tape.constant(params.b1),
                            tape.constant(params.w2), tape.constant(params.b2)};
  return classify_head(tape.constant(Matrix(fc_pooled)), tape.constant(Matrix(ec_pooled)), head)
      .value()
      .row(0);
}

int predicted_class(const RowVector& logits) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < logits.size(); ++k) {
    if (logits(k) > logits(best)) best = k;
  }
  return static_cast<int>(best);
}

}  // namespace connlearn
