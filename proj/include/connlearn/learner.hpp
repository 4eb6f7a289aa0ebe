#pragma once

#include <span>
#include <vector>

#include "connlearn/autodiff.hpp"
#include "connlearn/params.hpp"
#include "connlearn/priors.hpp"

namespace connlearn {

/// Denominator guard of the row normalization.
inline constexpr double kFuseEpsilon = 1e-12;

/// Learned graph of one view at one iteration: nonnegative, zero diagonal,
/// every row sums to 1 or is entirely zero.
struct ConnectivityMatrix {
  Matrix values;
  View view = View::fc;
  int iteration = 0;
  /// Rows with no positive mass before normalization.
  std::size_t isolated_rows = 0;
};

// Differentiable forms, recorded on the features' tape.

/// s_ij = mean over heads of cos(w ⊙ f_i, w ⊙ f_j); a row whose weighted
/// vector is zero has similarity 0 with everything, itself included.
ad::Var multihead_similarity(ad::Var features, std::span<const ad::Var> head_weights);

struct FusedGraph {
  ad::Var raw;        // max(W ⊙ s, 0) with zero diagonal
  ad::Var adjacency;  // raw rows divided by max(row sum, eps)
};

/// The prior enters as a constant: it never receives gradient.
FusedGraph fuse_normalize(ad::Var similarity, const Matrix& prior);

FusedGraph build_connectivity(ad::Var features, std::span<const ad::Var> head_weights,
                              const Matrix& prior);

// Plain-value forms.

Matrix multihead_similarity(const Matrix& features, std::span<const Matrix> head_weights);
/// Pre-normalization product max(W ⊙ s, 0) with zero diagonal.
Matrix fuse_raw(const Matrix& similarity, const PriorMatrix& prior);
ConnectivityMatrix fuse_normalize(const Matrix& similarity, const PriorMatrix& prior,
                                  View view = View::fc, int iteration = 0);
ConnectivityMatrix build_connectivity(const Matrix& features, const LearnerT<Matrix>& params,
                                      const PriorMatrix& prior, int layer, View view);

/// Row-normalized clamp of the prior alone: the fixed-graph baseline.
ConnectivityMatrix fixed_connectivity(const PriorMatrix& prior, View view, int iteration = 0);

}  // namespace connlearn
