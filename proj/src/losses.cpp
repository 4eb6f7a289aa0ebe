#include "connlearn/losses.hpp"

#include <atomic>
#include <iostream>

#include "connlearn/errors.hpp"

namespace connlearn {

namespace {

std::atomic<std::size_t> g_zero_norm{0};

// Mean over anchors of -log(exp(pos) / sum over the pool without the anchor).
// Row i of `others` is the positive of anchor i.
ad::Var anchored_loss(ad::Var anchors, ad::Var others, double tau) {
  ad::Tape& tape = *anchors.tape();
  const Eigen::Index b = anchors.rows();
  const std::vector<ad::Var> parts{anchors, others};
  const ad::Var pool = ad::vstack(parts);
  const ad::Var logits = ad::scale(ad::matmul_nt(anchors, pool), 1.0 / tau);  // B x 2B
  Matrix mask = Matrix::Ones(b, 2 * b);
  Matrix positive = Matrix::Zero(b, 2 * b);
  for (Eigen::Index i = 0; i < b; ++i) {
    mask(i, i) = 0.0;
    positive(i, b + i) = 1.0;
  }
  const ad::Var lse = ad::masked_logsumexp_rows(logits, mask);
  const ad::Var pos = ad::sum(ad::hadamard(logits, tape.constant(std::move(positive))));
  return ad::scale(ad::sub(ad::sum(lse), pos), 1.0 / static_cast<double>(b));
}

}  // namespace

ad::Var nt_xent(std::span<const ad::Var> fc, std::span<const ad::Var> ec, const ContrastiveOptions& options) {
  if (fc.empty() || fc.size() != ec.size()) throw ContractError("nt_xent: batches must be equal and non-empty");
  if (!(options.tau > 0.0)) throw ConfigError("nt_xent: tau must be positive");
  ad::Var f = ad::vstack(fc);
  ad::Var e = ad::vstack(ec);
  if (options.normalize) {
    for (const Matrix* m : {&f.value(), &e.value()}) {
      const auto zeros = (m->rowwise().squaredNorm().array() == 0.0).count();
      if (zeros > 0) {
        g_zero_norm += static_cast<std::size_t>(zeros);
        std::cerr << "warning: nt_xent met " << zeros << " zero-norm embedding(s)\n";
      }
    }
    f = ad::l2_normalize_rows(f);
    e = ad::l2_normalize_rows(e);
  }
  const ad::Var forward = anchored_loss(f, e, options.tau);
  if (!options.symmetric) return forward;
  const ad::Var mirror = anchored_loss(e, f, options.tau);
  return ad::scale(ad::add(forward, mirror), 0.5);
}

double nt_xent(std::span<const RowVector> fc, std::span<const RowVector> ec, const ContrastiveOptions& options) {
  ad::Tape tape;
  std::vector<ad::Var> f, e;
  for (const auto& v : fc) f.push_back(tape.constant(Matrix(v)));
  for (const auto& v : ec) e.push_back(tape.constant(Matrix(v)));
  return nt_xent(f, e, options).scalar();
}

ad::Var graph_loss(ad::Var node_features, ad::Var adjacency, double gamma) {
  if (node_features.rows() != adjacency.rows() || adjacency.rows() != adjacency.cols()) {
    throw ContractError("graph_loss: shapes do not match");
  }
  const ad::Var smooth = ad::sum(ad::hadamard(ad::pairwise_sq_dist(node_features), adjacency));
  const ad::Var sparsity = ad::sum(ad::hadamard(adjacency, adjacency));
  return ad::add(smooth, ad::scale(sparsity, gamma));
}

double graph_loss(const Matrix& node_features, const Matrix& adjacency, double gamma) {
  ad::Tape tape;
  return graph_loss(tape.constant(node_features), tape.constant(adjacency), gamma).scalar();
}

ad::Var cross_entropy(ad::Var logits, int label) {
  if (logits.rows() != 1) throw ContractError("cross_entropy: logits must be a single row");
  if (label < 0 || label >= logits.cols()) throw ContractError("cross_entropy: label out of range");
  return ad::scale(ad::entry(ad::log_softmax_rows(logits), 0, label), -1.0);
}

double cross_entropy(const RowVector& logits, int label) {
  ad::Tape tape;
  return cross_entropy(tape.constant(Matrix(logits)), label).scalar();
}

nlohmann::json LossReport::to_json() const {
  return nlohmann::json{{"contrastive", contrastive},
                        {"graph_fc", graph_fc},
                        {"graph_ec", graph_ec},
                        {"encoder_reg", encoder_reg},
                        {"classification", classification},
                        {"total", total},
                        {"coefficients", {{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"tau", tau}}}};
}

std::size_t zero_norm_embedding_count() { return g_zero_norm.load(); }

}  // namespace connlearn
