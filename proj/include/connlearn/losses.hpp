#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "connlearn/autodiff.hpp"

namespace connlearn {

struct ContrastiveOptions {
  double tau = 0.5;
  /// L2-normalize embeddings before the dot products.
  bool normalize = true;
  /// Average in the EC-anchored mirror of the loss.
  bool symmetric = false;
};

/// NT-Xent across views. Anchor i is the FC embedding of subject i; its
/// positive is the EC embedding of the same subject and the denominator runs
/// over all 2B embeddings of the batch except the anchor itself.
ad::Var nt_xent(std::span<const ad::Var> fc, std::span<const ad::Var> ec, const ContrastiveOptions& options);
double nt_xent(std::span<const RowVector> fc, std::span<const RowVector> ec, const ContrastiveOptions& options);

/// sum_ij ||h_i - h_j||^2 A_ij + gamma ||A||_F^2
ad::Var graph_loss(ad::Var node_features, ad::Var adjacency, double gamma);
double graph_loss(const Matrix& node_features, const Matrix& adjacency, double gamma);

/// -log softmax(logits)[label] for a 1 x K row of logits.
ad::Var cross_entropy(ad::Var logits, int label);
double cross_entropy(const RowVector& logits, int label);

struct LossReport {
  double contrastive = 0.0;
  double graph_fc = 0.0;
  double graph_ec = 0.0;
  double encoder_reg = 0.0;
  double classification = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double tau = 0.0;

  nlohmann::json to_json() const;
};

/// Number of zero-norm embeddings met by nt_xent since process start.
std::size_t zero_norm_embedding_count();

}  // namespace connlearn
