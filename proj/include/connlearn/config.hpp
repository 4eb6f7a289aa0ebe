#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "connlearn/params.hpp"

namespace connlearn {

struct TrainConfig {
  // Structure.
  int layers = 3;  // L
  int heads = 4;   // m
  int states = 3;  // c
  int hidden = 64;
  int classifier_hidden = 32;
  // Loss weights.
  double gamma = 0.01;
  double alpha = 0.001;
  double beta = 0.001;
  double tau = 0.5;
  // Optimization.
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int epochs = 400;
  int batch_size = 32;
  int finetune_epochs = 400;
  double finetune_lr = 1e-4;       // encoder during fine-tuning
  double finetune_head_lr = 1e-4;  // classifier head during fine-tuning
  // Priors and preprocessing.
  int te_bins = 8;
  int te_lag = 1;
  bool standardize = true;
  // Switches.
  bool contrastive_normalize = true;
  bool contrastive_symmetric = false;
  bool adaptive_learner = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError on any non-positive or out-of-range value.
  void validate() const;
  ModelShape shape(int timepoints) const;

  nlohmann::json to_json() const;
  /// Overlays the keys present in j onto *this; unknown keys are rejected.
  void merge_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j);
};

TrainConfig load_config(const std::filesystem::path& path);

}  // namespace connlearn
