#pragma once

// Multi-state graph encoder.
//
// Each of c state branches runs two graph convolutions over the propagation
// operator D^-1 (A + I). A softmax over states of (attention . mean-pooled
// branch output) weights the branches into the node representation. The
// states are kept apart by a diversity penalty (encoder_loss) on their
// pooled vectors.

#include <span>
#include <vector>

#include "connlearn/autodiff.hpp"
#include "connlearn/learner.hpp"
#include "connlearn/params.hpp"

namespace connlearn {

struct EncoderOutput {
  ad::Var node;                        // N x d_h
  ad::Var pooled;                      // 1 x d_h column mean of node
  std::vector<ad::Var> state_pooled;   // per-state 1 x d_h
  ad::Var attention;                   // c x 1
};

ad::Var normalize_adjacency(ad::Var adjacency);

/// iteration selects the first-layer input weights: the raw series at 0,
/// hidden features afterwards.
EncoderOutput multi_state_forward(ad::Var adjacency, ad::Var features, const EncoderT<ad::Var>& params,
                                  int iteration);

/// Mean squared cosine over distinct state pairs; 0 for a single state.
ad::Var encoder_loss(std::span<const ad::Var> state_pooled);

/// Two affine layers with relu between, on [fc_pooled, ec_pooled].
ad::Var classify_head(ad::Var fc_pooled, ad::Var ec_pooled, const HeadT<ad::Var>& params);

// Plain-value forms.

struct HiddenRep {
  Matrix node_matrix;
  RowVector pooled;
  std::vector<RowVector> state_pooled;
  Vector attention;
  View view = View::fc;
  int iteration = 0;
};

Matrix normalize_adjacency(const Matrix& adjacency);
HiddenRep multi_state_forward(const ConnectivityMatrix& a, const Matrix& features,
                              const EncoderT<Matrix>& params);
double encoder_loss(std::span<const RowVector> state_pooled);
RowVector classify_head(const RowVector& fc_pooled, const RowVector& ec_pooled,
                        const HeadT<Matrix>& params);

/// Lowest index wins ties.
int predicted_class(const RowVector& logits);

}  // namespace connlearn
