#include "connlearn/config.hpp"

#include <string>

#include "connlearn/errors.hpp"
#include "connlearn/io.hpp"

namespace connlearn {

using nlohmann::json;

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (layers < 1) throw ConfigError("L must be at least 1");
  positive(heads, "m");
  positive(states, "c");
  if (hidden < 2) throw ConfigError("hidden must be at least 2");
  positive(classifier_hidden, "classifier_hidden");
  positive(gamma, "gamma");
  positive(tau, "tau");
  positive(lr, "lr");
  positive(finetune_lr, "finetune_lr");
  positive(finetune_head_lr, "finetune_head_lr");
  positive(epochs, "epochs");
  positive(finetune_epochs, "finetune_epochs");
  positive(batch_size, "batch_size");
  if (te_bins < 2) throw ConfigError("te_bins must be at least 2");
  if (te_lag < 1) throw ConfigError("te_lag must be at least 1");
  // Ablations switch these terms off, so zero is allowed.
  if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
}

ModelShape TrainConfig::shape(int timepoints) const {
  return ModelShape{timepoints, layers, heads, states, hidden, classifier_hidden};
}

json TrainConfig::to_json() const {
  return json{{"L", layers},
              {"m", heads},
              {"c", states},
              {"hidden", hidden},
              {"classifier_hidden", classifier_hidden},
              {"gamma", gamma},
              {"alpha", alpha},
              {"beta", beta},
              {"tau", tau},
              {"lr", lr},
              {"weight_decay", weight_decay},
              {"epochs", epochs},
              {"batch_size", batch_size},
              {"finetune_epochs", finetune_epochs},
              {"finetune_lr", finetune_lr},
              {"finetune_head_lr", finetune_head_lr},
              {"te_bins", te_bins},
              {"te_lag", te_lag},
              {"standardize", standardize},
              {"contrastive", {{"normalize", contrastive_normalize}, {"symmetric", contrastive_symmetric}}},
              {"learner", {{"adaptive", adaptive_learner}}},
              {"seed", seed}};
}

void TrainConfig::merge_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "L") layers = value.get<int>();
      else if (key == "m") heads = value.get<int>();
      else if (key == "c") states = value.get<int>();
      else if (key == "hidden") hidden = value.get<int>();
      else if (key == "classifier_hidden") classifier_hidden = value.get<int>();
      else if (key == "gamma") gamma = value.get<double>();
      else if (key == "alpha") alpha = value.get<double>();
      else if (key == "beta") beta = value.get<double>();
      else if (key == "tau") tau = value.get<double>();
      else if (key == "lr") lr = value.get<double>();
      else if (key == "weight_decay") weight_decay = value.get<double>();
      else if (key == "epochs") epochs = value.get<int>();
      else if (key == "batch_size") batch_size = value.get<int>();
      else if (key == "finetune_epochs") finetune_epochs = value.get<int>();
      else if (key == "finetune_lr") finetune_lr = value.get<double>();
      else if (key == "finetune_head_lr") finetune_head_lr = value.get<double>();
      else if (key == "te_bins") te_bins = value.get<int>();
      else if (key == "te_lag") te_lag = value.get<int>();
      else if (key == "standardize") standardize = value.get<bool>();
      else if (key == "seed") seed = value.get<std::uint64_t>();
      else if (key == "contrastive") {
        for (const auto& [k, v] : value.items()) {
          if (k == "normalize") contrastive_normalize = v.get<bool>();
          else if (k == "symmetric") contrastive_symmetric = v.get<bool>();
          else throw ConfigError("unknown config key 'contrastive." + k + "'");
        }
      } else if (key == "learner") {
        for (const auto& [k, v] : value.items()) {
          if (k == "adaptive") adaptive_learner = v.get<bool>();
          else throw ConfigError("unknown config key 'learner." + k + "'");
        }
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.merge_json(j);
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  return TrainConfig::from_json(read_json(path));
}

}  // namespace connlearn
