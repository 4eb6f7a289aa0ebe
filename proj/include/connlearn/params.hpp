#pragma once

// Parameter trees. The same templates hold parameter values (Matrix), tape
// handles (ad::Var) and gradients (Matrix, empty when absent), so one visit
// order defines checkpoint layout, optimizer state and gradient checks.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "connlearn/autodiff.hpp"

namespace connlearn {

enum class View { fc = 0, ec = 1 };
inline constexpr std::array<View, 2> kViews = {View::fc, View::ec};
inline const char* view_name(View v) { return v == View::fc ? "fc" : "ec"; }
inline std::size_t view_index(View v) { return static_cast<std::size_t>(v); }

/// Per-view weight vectors of the similarity metric, [layer][head], each 1 x d_l.
template <class T>
struct LearnerT {
  std::vector<std::vector<T>> weights;
};

/// One state branch: two graph convolutions. The first layer has separate
/// input weights for the raw series (iteration 0) and hidden features.
template <class T>
struct BranchT {
  T w1_input;
  T w1_hidden;
  T b1;
  T w2;
  T b2;
};

template <class T>
struct EncoderT {
  std::vector<BranchT<T>> branches;
  T attention;  // d_h x 1
};

template <class T>
struct HeadT {
  T w1;  // 2 d_h x d_cls
  T b1;
  T w2;  // d_cls x 2
  T b2;
};

template <class T>
struct ModelT {
  std::array<LearnerT<T>, 2> learner;
  std::array<EncoderT<T>, 2> encoder;
  HeadT<T> head;
};

/// Visits every parameter in checkpoint order as fn(name, item).
template <class M, class Fn>
void for_each_param(M& model, Fn&& fn) {
  for (View v : kViews) {
    const std::string prefix = std::string(view_name(v)) + ".";
    auto& learner = model.learner[view_index(v)];
    for (std::size_t l = 0; l < learner.weights.size(); ++l) {
      for (std::size_t h = 0; h < learner.weights[l].size(); ++h) {
        fn(prefix + "learner.l" + std::to_string(l) + ".h" + std::to_string(h), learner.weights[l][h]);
      }
    }
    auto& enc = model.encoder[view_index(v)];
    for (std::size_t s = 0; s < enc.branches.size(); ++s) {
      const std::string b = prefix + "encoder.s" + std::to_string(s) + ".";
      fn(b + "w1_input", enc.branches[s].w1_input);
      fn(b + "w1_hidden", enc.branches[s].w1_hidden);
      fn(b + "b1", enc.branches[s].b1);
      fn(b + "w2", enc.branches[s].w2);
      fn(b + "b2", enc.branches[s].b2);
    }
    fn(prefix + "encoder.attention", enc.attention);
  }
  fn(std::string("head.w1"), model.head.w1);
  fn(std::string("head.b1"), model.head.b1);
  fn(std::string("head.w2"), model.head.w2);
  fn(std::string("head.b2"), model.head.b2);
}

/// Same tree shape with default-constructed leaves.
template <class U, class T>
ModelT<U> skeleton_like(const ModelT<T>& m) {
  ModelT<U> out;
  for (std::size_t v = 0; v < 2; ++v) {
    out.learner[v].weights.resize(m.learner[v].weights.size());
    for (std::size_t l = 0; l < m.learner[v].weights.size(); ++l) {
      out.learner[v].weights[l].resize(m.learner[v].weights[l].size());
    }
    out.encoder[v].branches.resize(m.encoder[v].branches.size());
  }
  return out;
}

/// Builds a tree of U by applying fn(name, item) to every parameter.
template <class U, class T, class Fn>
ModelT<U> map_params(const ModelT<T>& src, Fn&& fn) {
  ModelT<U> out = skeleton_like<U>(src);
  std::vector<U*> slots;
  for_each_param(out, [&](const std::string&, U& item) { slots.push_back(&item); });
  std::size_t k = 0;
  for_each_param(src, [&](const std::string& name, const T& item) { *slots[k++] = fn(name, item); });
  return out;
}

/// Structural hyperparameters that fix every parameter shape.
struct ModelShape {
  int timepoints = 0;  // d_0 of the learner and encoder input at iteration 0
  int layers = 3;      // L; iterations run l = 0..L
  int heads = 4;
  int states = 3;
  int hidden = 64;
  int classifier_hidden = 32;

  bool operator==(const ModelShape&) const = default;
};

struct Model {
  ModelShape shape;
  ModelT<Matrix> params;
};

/// Learner weights start at one plus N(0, 0.01^2) noise; encoder and head
/// weights are He-normal with zero biases.
Model init_model(const ModelShape& shape, std::uint64_t seed);

/// Fresh classifier head drawn from the given seed.
HeadT<Matrix> init_head(const ModelShape& shape, std::uint64_t seed);

/// Number of scalar parameters in the tree.
std::size_t parameter_count(const ModelT<Matrix>& params);

/// sha256 of the learner weights' bytes for both views.
std::string learner_digest(const ModelT<Matrix>& params);

}  // namespace connlearn
