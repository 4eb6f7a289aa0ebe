#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "connlearn/config.hpp"
#include "connlearn/eval.hpp"
#include "connlearn/losses.hpp"
#include "connlearn/params.hpp"
#include "connlearn/pipeline.hpp"

namespace connlearn {

/// Gradients share the parameter tree; an empty matrix marks a parameter
/// that is not being trained.
using Gradients = ModelT<Matrix>;

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> first;   // in for_each_param order; empty until first use
  std::vector<Matrix> second;
};

/// Bias-corrected Adam with decoupled weight decay:
/// p <- p (1 - lr wd), then p <- p - lr m_hat / (sqrt(v_hat) + eps).
/// Parameters whose gradient is empty are left untouched.
void adam_step(ModelT<Matrix>& params, const Gradients& grads, AdamState& state, double lr,
               double weight_decay);
/// Same update with a learning rate chosen per parameter name.
void adam_step(ModelT<Matrix>& params, const Gradients& grads, AdamState& state,
               const std::function<double(const std::string&)>& lr_of, double weight_decay);

enum class Objective { pretrain, finetune, contrastive, graph, encoder_reg, classification };
const char* objective_name(Objective o);
Trainable objective_trainable(Objective o);

struct BatchGradients {
  LossReport report;
  double loss = 0.0;
  Gradients grads;
};

/// Forward over the batch, then the reverse sweep. Throws
/// NonFiniteGradientError naming the first parameter with a NaN/inf entry.
BatchGradients compute_gradients(const Model& model, std::span<const PreparedSubject* const> batch,
                                 const TrainConfig& config, Objective objective);

/// Loss value only; used by finite differences.
double evaluate_objective(const Model& model, std::span<const PreparedSubject* const> batch,
                          const TrainConfig& config, Objective objective);

struct GradcheckEntry {
  std::string param;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::string objective;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::vector<GradcheckEntry> entries;
  bool pass = true;

  nlohmann::json to_json() const;
};

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Floor of the relative-error denominator, so entries whose true
  /// gradient is ~0 are judged on absolute error.
  double scale_floor = 1e-6;
  /// Test hook: adds 1e-3 to this parameter's analytic gradient.
  std::optional<std::string> corrupt_param;
};

/// Central differences on every entry of every trainable parameter.
GradcheckReport gradcheck(const Model& model, std::span<const PreparedSubject* const> batch,
                          const TrainConfig& config, Objective objective, const GradcheckOptions& options = {});

struct DeskScale {
  int regions = 6;
  int timepoints = 20;
  int layers = 2;
  int heads = 2;
  int states = 2;
  int hidden = 5;
  int classifier_hidden = 4;
  int batch = 3;
};

/// Random desk-scale instance checked for the pretrain and fine-tune totals
/// and each loss term alone.
std::vector<GradcheckReport> gradcheck_suite(std::uint64_t seed, const DeskScale& scale = {},
                                             const GradcheckOptions& options = {});

struct EpochLog {
  int epoch = 0;
  LossReport report;
  std::optional<double> wall_time_s;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  /// Adds per-epoch wall time to the log (breaks byte-identical logs).
  bool log_wall_time = false;
  std::function<void(const EpochLog&)> on_epoch;
};

struct PretrainResult {
  Model model;
  std::vector<EpochLog> log;
};

PretrainResult pretrain(std::span<const PreparedSubject> subjects, const TrainConfig& config,
                        const TrainOptions& options = {});

struct FoldResult {
  int fold = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  MetricsReport metrics;
  Model fitted;
  std::vector<EpochLog> log;
};

struct FinetuneResult {
  std::vector<FoldResult> folds;
  AggregateReport aggregate;
  std::string learner_digest_before;
  std::string learner_digest_after;
};

/// Stratified k-fold: per fold the pretrained learner is frozen, the
/// encoder starts from the checkpoint and a fresh head is trained on the
/// training part, then scored on the held-out part.
FinetuneResult finetune(std::span<const PreparedSubject> subjects, const Model& pretrained,
                        const TrainConfig& config, int folds, const TrainOptions& options = {});

}  // namespace connlearn
