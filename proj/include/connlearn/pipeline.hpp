#pragma once

// The unrolled joint iteration for one subject and view:
//   features_0 = X
//   A^l = fuse(similarity(features_l; w_l), W)       l = 0..L
//   H^l = Encoder(A^l, features_l; theta),  features_{l+1} = H^l

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "connlearn/config.hpp"
#include "connlearn/encoder.hpp"
#include "connlearn/learner.hpp"
#include "connlearn/losses.hpp"
#include "connlearn/params.hpp"
#include "connlearn/priors.hpp"
#include "connlearn/signals.hpp"

namespace connlearn {

/// Learner input and cached priors of one subject.
struct PreparedSubject {
  std::string id;
  Matrix features;  // N x T, standardized when the config says so
  SubjectPriors priors;
  std::optional<int> label;
  std::vector<Eigen::Index> constant_rows;

  const PriorMatrix& prior(View v) const {
    return v == View::fc ? priors.pearson : priors.transfer_entropy;
  }
};

std::vector<PreparedSubject> prepare_subjects(const Dataset& dataset, const TrainConfig& config,
                                              PriorCache& cache);

enum class ParamGroup { learner, encoder, head };
ParamGroup param_group(const std::string& name);

/// Which groups become differentiable leaves; the rest enter as constants.
struct Trainable {
  bool learner = false;
  bool encoder = false;
  bool head = false;

  bool contains(const std::string& name) const;
  static Trainable pretraining() { return {true, true, false}; }
  static Trainable finetuning() { return {false, true, true}; }
  static Trainable none() { return {}; }
};

ModelT<ad::Var> bind_params(ad::Tape& tape, const ModelT<Matrix>& params, const Trainable& trainable);

struct ViewTrace {
  std::vector<ad::Var> raw;        // per iteration, pre-normalization
  std::vector<ad::Var> adjacency;  // per iteration
  std::vector<EncoderOutput> hidden;

  const EncoderOutput& last() const { return hidden.back(); }
};

struct SubjectTrace {
  std::array<ViewTrace, 2> views;
  const ViewTrace& view(View v) const { return views[view_index(v)]; }
};

/// adaptive=false replaces the learner by the row-normalized prior at every
/// iteration (the fixed-graph baseline); the encoder chain is unchanged.
SubjectTrace forward_subject(ad::Tape& tape, const ModelT<ad::Var>& params, const PreparedSubject& subject,
                             int layers, bool adaptive);

struct BatchLoss {
  ad::Var total;
  LossReport report;
};

/// contrastive + alpha (graph_fc + graph_ec) + beta encoder_reg, with the
/// graph and encoder terms averaged over the batch at the final iteration.
BatchLoss total_pretrain_loss(std::span<const SubjectTrace> traces, const TrainConfig& config);

/// mean cross-entropy + beta encoder_reg.
BatchLoss total_finetune_loss(std::span<const SubjectTrace> traces, std::span<const ad::Var> logits,
                              std::span<const int> labels, const TrainConfig& config);

ContrastiveOptions contrastive_options(const TrainConfig& config);

/// Forward values of one subject, no gradients.
struct SubjectInference {
  std::array<std::vector<ConnectivityMatrix>, 2> graphs;  // [view][iteration]
  std::array<std::vector<Matrix>, 2> raw;
  std::array<RowVector, 2> pooled;                         // final iteration
  RowVector logits;
};

SubjectInference infer_subject(const Model& model, const PreparedSubject& subject, bool adaptive);

}  // namespace connlearn
