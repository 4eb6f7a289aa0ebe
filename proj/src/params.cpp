#include "connlearn/params.hpp"

#include <cmath>

#include "connlearn/errors.hpp"
#include "connlearn/io.hpp"
#include "connlearn/rng.hpp"

namespace connlearn {

namespace {

// He-normal: keeps the activation scale through relu layers.
Matrix he_normal(Rng& rng, int fan_in, int fan_out) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = stddev * rng.normal();
  }
  return m;
}

void check_shape(const ModelShape& s) {
  if (s.timepoints < 1) throw ConfigError("model needs a positive series length");
  if (s.layers < 1) throw ConfigError("L must be at least 1");
  if (s.heads < 1) throw ConfigError("at least one head is required");
  if (s.states < 1) throw ConfigError("at least one encoder state is required");
  if (s.hidden < 2) throw ConfigError("hidden width must be at least 2");
  if (s.classifier_hidden < 1) throw ConfigError("classifier width must be positive");
}

}  // namespace

HeadT<Matrix> init_head(const ModelShape& shape, std::uint64_t seed) {
  Rng rng(seed);
  HeadT<Matrix> head;
  head.w1 = he_normal(rng, 2 * shape.hidden, shape.classifier_hidden);
  head.b1 = Matrix::Zero(1, shape.classifier_hidden);
  head.w2 = he_normal(rng, shape.classifier_hidden, 2);
  head.b2 = Matrix::Zero(1, 2);
  return head;
}

Model init_model(const ModelShape& shape, std::uint64_t seed) {
  check_shape(shape);
  Model model;
  model.shape = shape;
  Rng rng(derive_seed(seed, 1));
  for (View v : kViews) {
    auto& learner = model.params.learner[view_index(v)];
    learner.weights.resize(static_cast<std::size_t>(shape.layers) + 1);
    for (int l = 0; l <= shape.layers; ++l) {
      const int dim = l == 0 ? shape.timepoints : shape.hidden;
      for (int h = 0; h < shape.heads; ++h) {
        Matrix w(1, dim);
        for (int k = 0; k < dim; ++k) w(0, k) = 1.0 + 0.01 * rng.normal();
        learner.weights[static_cast<std::size_t>(l)].push_back(std::move(w));
      }
    }
    auto& enc = model.params.encoder[view_index(v)];
    for (int s = 0; s < shape.states; ++s) {
      BranchT<Matrix> b;
      b.w1_input = he_normal(rng, shape.timepoints, shape.hidden);
      b.w1_hidden = he_normal(rng, shape.hidden, shape.hidden);
      b.b1 = Matrix::Zero(1, shape.hidden);
      b.w2 = he_normal(rng, shape.hidden, shape.hidden);
      b.b2 = Matrix::Zero(1, shape.hidden);
      enc.branches.push_back(std::move(b));
    }
    enc.attention = he_normal(rng, shape.hidden, 1);
  }
  model.params.head = init_head(shape, derive_seed(seed, 2));
  return model;
}

std::size_t parameter_count(const ModelT<Matrix>& params) {
  std::size_t n = 0;
  for_each_param(params, [&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

std::string learner_digest(const ModelT<Matrix>& params) {
  std::string bytes;
  for (const auto& learner : params.learner) {
    for (const auto& layer : learner.weights) {
      for (const Matrix& w : layer) {
        bytes.append(reinterpret_cast<const char*>(w.data()),
                     static_cast<std::size_t>(w.size()) * sizeof(double));
      }
    }
  }
  return sha256_hex(bytes);
}

}  // namespace connlearn
